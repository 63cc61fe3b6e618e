//! Falcon-signed meta-transactions wrapped for the relay hub, and the
//! relay-signer JSON-RPC endpoint that builds them.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use pqchain_crypto::ecdsa::{Address, EcdsaKeyPair};
use pqchain_crypto::falcon::{self, FalconKeyPair, FalconSignature, SignatureEncoding};
use pqchain_crypto::{Digest256, RandomSource};
use ruint::aliases::U256;
use serde_json::{json, Value};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::did::{Did, Registry};
use crate::tx::{sign_inner, SignedTransaction, Transaction, TxError};

const PAYLOAD_MAGIC: &[u8; 4] = b"MTX1";
const PAYLOAD_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaTxError {
    #[error("UnregisteredWriter: {0} is not in the registry")]
    UnregisteredWriter(Did),
    #[error("KeyMismatch: writer keys differ from the registered record")]
    KeyMismatch,
    #[error("Malformed: {0}")]
    Malformed(String),
    #[error("NotRelayHub: wrapper has no destination")]
    NoDestination,
}

impl MetaTxError {
    pub fn code(&self) -> &'static str {
        match self {
            MetaTxError::UnregisteredWriter(_) => "UnregisteredWriter",
            MetaTxError::KeyMismatch => "KeyMismatch",
            MetaTxError::Malformed(_) => "Malformed",
            MetaTxError::NoDestination => "NotRelayHub",
        }
    }
}

impl From<DecodeError> for MetaTxError {
    fn from(e: DecodeError) -> Self {
        MetaTxError::Malformed(e.to_string())
    }
}

impl From<TxError> for MetaTxError {
    fn from(e: TxError) -> Self {
        MetaTxError::Malformed(e.to_string())
    }
}

/// What the wrapper carries to the relay hub.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaPayload {
    pub inner: SignedTransaction,
    pub writer_did: Did,
    pub falcon_signature: FalconSignature,
}

impl MetaPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_header(PAYLOAD_MAGIC, PAYLOAD_VERSION);
        w.bytes(&self.inner.raw())
            .str(self.writer_did.as_str())
            .bytes(self.falcon_signature.as_bytes());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MetaTxError> {
        let (mut r, version) = Reader::with_header(bytes, PAYLOAD_MAGIC)?;
        if version != PAYLOAD_VERSION {
            return Err(DecodeError::UnknownVersion(version).into());
        }
        let inner = SignedTransaction::decode_raw(r.bytes()?)?;
        let writer_did = Did::parse(&r.string()?).map_err(|e| MetaTxError::Malformed(e.to_string()))?;
        let falcon_signature =
            FalconSignature::from_slice(r.bytes()?).map_err(|_| MetaTxError::Malformed("falcon signature length".into()))?;
        r.finish()?;
        Ok(MetaPayload {
            inner,
            writer_did,
            falcon_signature,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaTransaction {
    pub relay_hub: Address,
    pub inner: SignedTransaction,
    pub writer_did: Did,
    pub falcon_signature: FalconSignature,
    /// The writer's own transaction to the relay hub carrying the payload.
    pub wrapper: SignedTransaction,
}

impl MetaTransaction {
    pub fn from_wrapper(wrapper: SignedTransaction) -> Result<Self, MetaTxError> {
        let relay_hub = wrapper.tx.to.ok_or(MetaTxError::NoDestination)?;
        let p = MetaPayload::decode(&wrapper.tx.data)?;
        Ok(MetaTransaction {
            relay_hub,
            inner: p.inner,
            writer_did: p.writer_did,
            falcon_signature: p.falcon_signature,
            wrapper,
        })
    }

    pub fn decode_raw(raw: &[u8]) -> Result<Self, MetaTxError> {
        Self::from_wrapper(SignedTransaction::decode_raw(raw)?)
    }

    pub fn payload(&self) -> MetaPayload {
        MetaPayload {
            inner: self.inner.clone(),
            writer_did: self.writer_did.clone(),
            falcon_signature: self.falcon_signature.clone(),
        }
    }

    pub fn hash(&self) -> Digest256 {
        self.wrapper.hash()
    }

    pub fn raw(&self) -> Vec<u8> {
        self.wrapper.raw()
    }
}

/// Fields of the writer's outer transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrapperParams {
    pub nonce: u64,
    pub gas_price: U256,
    pub gas_limit: u64,
    pub chain_id: u64,
}

/// Falcon-signs the inner EIP-155 stream, embeds it with the writer DID and
/// wraps everything in a writer-signed call to the relay hub.
#[allow(clippy::too_many_arguments)]
pub fn sign_outer(
    inner: SignedTransaction,
    writer_did: &Did,
    falcon_keys: &FalconKeyPair,
    writer_eth: &EcdsaKeyPair,
    relay_hub: Address,
    params: &WrapperParams,
    registry: &Registry,
    rng: &mut dyn RandomSource,
) -> Result<MetaTransaction, MetaTxError> {
    let record = registry
        .resolve(writer_did)
        .map_err(|_| MetaTxError::UnregisteredWriter(writer_did.clone()))?;
    if record.falcon_public_key != falcon_keys.public || record.eth_public_key != *writer_eth.public() {
        return Err(MetaTxError::KeyMismatch);
    }
    Ok(sign_outer_unchecked(inner, writer_did, falcon_keys, writer_eth, relay_hub, params, rng))
}

/// [`sign_outer`] without the registry checks; used to build adversarial inputs.
pub fn sign_outer_unchecked(
    inner: SignedTransaction,
    writer_did: &Did,
    falcon_keys: &FalconKeyPair,
    writer_eth: &EcdsaKeyPair,
    relay_hub: Address,
    params: &WrapperParams,
    rng: &mut dyn RandomSource,
) -> MetaTransaction {
    let falcon_signature = falcon::sign(&inner.tx.signing_stream(), &falcon_keys.secret, rng, SignatureEncoding::Padded)
        .expect("writer Falcon key is well formed");
    wrap(inner, writer_did, falcon_signature, writer_eth, relay_hub, params)
}

/// Builds and signs the wrapper around an already Falcon-signed inner tx.
pub fn wrap(
    inner: SignedTransaction,
    writer_did: &Did,
    falcon_signature: FalconSignature,
    writer_eth: &EcdsaKeyPair,
    relay_hub: Address,
    params: &WrapperParams,
) -> MetaTransaction {
    let payload = MetaPayload {
        inner,
        writer_did: writer_did.clone(),
        falcon_signature,
    };
    let wrapper = sign_inner(
        Transaction {
            nonce: params.nonce,
            gas_price: params.gas_price,
            gas_limit: params.gas_limit,
            to: Some(relay_hub),
            value: U256::ZERO,
            data: payload.encode(),
            chain_id: params.chain_id,
        },
        writer_eth,
    );
    MetaTransaction {
        relay_hub,
        inner: payload.inner,
        writer_did: payload.writer_did,
        falcon_signature: payload.falcon_signature,
        wrapper,
    }
}

// ---------------------------------------------------------------------------
// Relay signer

/// Default gas limit for wrapper transactions.
pub const WRAPPER_GAS_LIMIT: u64 = 1_000_000;

struct RelayState {
    account_nonce: u64,
    wrapper_nonce: u64,
    submitted: BTreeMap<String, MetaTransaction>,
    outbox: Vec<MetaTransaction>,
}

/// Writer-side JSON-RPC service. `relay_send` signs a user transaction with
/// the local account key (like `eth_sendTransaction`), then Falcon-signs and
/// wraps it; `relay_status` reports what it has seen.
pub struct RelaySigner {
    writer_did: Did,
    writer_eth: EcdsaKeyPair,
    falcon: FalconKeyPair,
    account: EcdsaKeyPair,
    relay_hub: Address,
    chain_id: u64,
    registry: Registry,
    state: Mutex<RelayState>,
    rng: Mutex<Box<dyn RandomSource + Send>>,
}

pub struct RelaySignerConfig {
    pub writer_did: Did,
    pub writer_eth: EcdsaKeyPair,
    pub falcon: FalconKeyPair,
    pub account: EcdsaKeyPair,
    pub relay_hub: Address,
    pub chain_id: u64,
    pub registry: Registry,
}

mod rpc_code {
    pub const PARSE: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const DOMAIN: i64 = -32000;
}

struct RpcError(i64, String);

fn quantity(v: Option<&Value>, default: U256) -> Result<U256, RpcError> {
    let bad = || RpcError(rpc_code::INVALID_PARAMS, "bad quantity".into());
    match v {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Number(n)) => n.as_u64().map(U256::from).ok_or_else(bad),
        Some(Value::String(s)) => match s.strip_prefix("0x") {
            Some(h) if !h.is_empty() => U256::from_str_radix(h, 16).map_err(|_| bad()),
            Some(_) => Err(bad()),
            None => U256::from_str_radix(s, 10).map_err(|_| bad()),
        },
        _ => Err(bad()),
    }
}

fn small(v: U256) -> Result<u64, RpcError> {
    u64::try_from(v).map_err(|_| RpcError(rpc_code::INVALID_PARAMS, "value exceeds 64 bits".into()))
}

fn hex_data(v: Option<&Value>) -> Result<Vec<u8>, RpcError> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) => hex::decode(s.strip_prefix("0x").unwrap_or(s))
            .map_err(|_| RpcError(rpc_code::INVALID_PARAMS, "bad hex data".into())),
        _ => Err(RpcError(rpc_code::INVALID_PARAMS, "bad hex data".into())),
    }
}

impl RelaySigner {
    pub fn new(config: RelaySignerConfig, rng: Box<dyn RandomSource + Send>) -> Self {
        RelaySigner {
            writer_did: config.writer_did,
            writer_eth: config.writer_eth,
            falcon: config.falcon,
            account: config.account,
            relay_hub: config.relay_hub,
            chain_id: config.chain_id,
            registry: config.registry,
            state: Mutex::new(RelayState {
                account_nonce: 0,
                wrapper_nonce: 0,
                submitted: BTreeMap::new(),
                outbox: Vec::new(),
            }),
            rng: Mutex::new(rng),
        }
    }

    /// Meta-transactions built since the last call, in submission order.
    pub fn take_outbox(&self) -> Vec<MetaTransaction> {
        std::mem::take(&mut self.state.lock().unwrap().outbox)
    }

    /// Handles one JSON-RPC request line and returns the response line.
    pub fn handle_line(&self, line: &str) -> String {
        let req: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return Self::error(Value::Null, RpcError(rpc_code::PARSE, e.to_string())),
        };
        let id = req.get("id").cloned().unwrap_or(Value::Null);
        if req.get("jsonrpc") != Some(&json!("2.0")) {
            return Self::error(id, RpcError(rpc_code::INVALID_REQUEST, "jsonrpc must be \"2.0\"".into()));
        }
        let params = req.get("params").cloned().unwrap_or(json!([]));
        let result = match req.get("method").and_then(Value::as_str) {
            Some("relay_send") => self.relay_send(&params),
            Some("relay_status") => self.relay_status(&params),
            Some(m) => Err(RpcError(rpc_code::METHOD_NOT_FOUND, format!("unknown method {m}"))),
            None => Err(RpcError(rpc_code::INVALID_REQUEST, "missing method".into())),
        };
        match result {
            Ok(v) => json!({"jsonrpc": "2.0", "id": id, "result": v}).to_string(),
            Err(e) => Self::error(id, e),
        }
    }

    fn error(id: Value, e: RpcError) -> String {
        json!({"jsonrpc": "2.0", "id": id, "error": {"code": e.0, "message": e.1}}).to_string()
    }

    fn first_param(params: &Value) -> Result<&Value, RpcError> {
        params
            .as_array()
            .and_then(|a| a.first())
            .ok_or_else(|| RpcError(rpc_code::INVALID_PARAMS, "expected one positional parameter".into()))
    }

    fn relay_send(&self, params: &Value) -> Result<Value, RpcError> {
        let p = Self::first_param(params)?;
        if !p.is_object() {
            return Err(RpcError(rpc_code::INVALID_PARAMS, "transaction object expected".into()));
        }
        let mut state = self.state.lock().unwrap();
        let inner = if let Some(raw) = p.get("raw") {
            SignedTransaction::decode_raw(&hex_data(Some(raw))?).map_err(|e| RpcError(rpc_code::INVALID_PARAMS, e.to_string()))?
        } else {
            let to = match p.get("to") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => {
                    Some(s.parse::<Address>().map_err(|_| RpcError(rpc_code::INVALID_PARAMS, "bad to address".into()))?)
                }
                _ => return Err(RpcError(rpc_code::INVALID_PARAMS, "bad to address".into())),
            };
            let nonce = match p.get("nonce") {
                None | Some(Value::Null) => state.account_nonce,
                v => small(quantity(v, U256::ZERO)?)?,
            };
            let tx = Transaction {
                nonce,
                gas_price: quantity(p.get("gasPrice"), U256::ZERO)?,
                gas_limit: small(quantity(p.get("gas"), U256::from(21_000u64))?)?,
                to,
                value: quantity(p.get("value"), U256::ZERO)?,
                data: hex_data(p.get("data"))?,
                chain_id: self.chain_id,
            };
            state.account_nonce = state.account_nonce.max(nonce + 1);
            sign_inner(tx, &self.account)
        };
        let params = WrapperParams {
            nonce: state.wrapper_nonce,
            gas_price: U256::ZERO,
            gas_limit: WRAPPER_GAS_LIMIT,
            chain_id: self.chain_id,
        };
        let mut rng = self.rng.lock().unwrap();
        let meta = sign_outer(
            inner,
            &self.writer_did,
            &self.falcon,
            &self.writer_eth,
            self.relay_hub,
            &params,
            &self.registry,
            &mut **rng,
        )
        .map_err(|e| RpcError(rpc_code::DOMAIN, e.to_string()))?;
        state.wrapper_nonce += 1;
        let id = meta.hash().to_string();
        let result = json!({
            "id": id,
            "inner_hash": meta.inner.hash().to_string(),
            "writer_did": self.writer_did.as_str(),
            "raw": format!("0x{}", hex::encode(meta.raw())),
        });
        state.submitted.insert(id, meta.clone());
        state.outbox.push(meta);
        Ok(result)
    }

    fn relay_status(&self, params: &Value) -> Result<Value, RpcError> {
        let id = Self::first_param(params)?
            .as_str()
            .ok_or_else(|| RpcError(rpc_code::INVALID_PARAMS, "id string expected".into()))?;
        let state = self.state.lock().unwrap();
        Ok(match state.submitted.get(id) {
            Some(m) => json!({
                "id": id,
                "status": "submitted",
                "inner_hash": m.inner.hash().to_string(),
                "relay_hub": m.relay_hub.to_string(),
            }),
            None => json!({"id": id, "status": "unknown"}),
        })
    }

    /// Serves newline-delimited JSON-RPC on a Unix socket. Stops after
    /// `max_connections` clients if given.
    #[cfg(unix)]
    pub fn serve_unix(&self, path: &Path, max_connections: Option<usize>) -> std::io::Result<()> {
        let listener = std::os::unix::net::UnixListener::bind(path)?;
        for (n, stream) in listener.incoming().enumerate() {
            let stream = stream?;
            let mut out = stream.try_clone()?;
            for line in BufReader::new(stream).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                writeln!(out, "{}", self.handle_line(&line))?;
            }
            if max_connections.is_some_and(|m| n + 1 >= m) {
                break;
            }
        }
        Ok(())
    }
}
