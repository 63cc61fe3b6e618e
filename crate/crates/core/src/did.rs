//! DID registry: CA-gated registration, open resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use pqchain_crypto::ecdsa::{derive_address, Address, EcdsaPublicKey};
use pqchain_crypto::falcon::{self, FalconPublicKey};
use pqchain_crypto::{keccak256, Digest256};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};

pub const DEFAULT_METHOD: &str = "lac";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DidError {
    #[error("MalformedDid: {0:?}")]
    MalformedDid(String),
    #[error("NotFound: {0}")]
    NotFound(Did),
    #[error("Unauthorized: {0} may not register")]
    Unauthorized(Did),
    #[error("DuplicateDid: {0} is already registered with different content")]
    DuplicateDid(Did),
}

impl DidError {
    pub fn code(&self) -> &'static str {
        match self {
            DidError::MalformedDid(_) => "MalformedDid",
            DidError::NotFound(_) => "NotFound",
            DidError::Unauthorized(_) => "Unauthorized",
            DidError::DuplicateDid(_) => "DuplicateDid",
        }
    }
}

/// `did:<method>:<40 lowercase hex>`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Did(String);

impl Did {
    pub fn parse(s: &str) -> Result<Self, DidError> {
        let bad = || DidError::MalformedDid(s.to_string());
        let mut parts = s.split(':');
        let (Some("did"), Some(method), Some(id), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let method_ok = !method.is_empty() && method.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit());
        let id_ok = id.len() == 40 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !method_ok || !id_ok {
            return Err(bad());
        }
        Ok(Did(s.to_string()))
    }

    pub fn from_address(address: &Address) -> Self {
        Self::with_method(DEFAULT_METHOD, address)
    }

    pub fn with_method(method: &str, address: &Address) -> Self {
        Did(format!("did:{method}:{}", hex::encode(address.0)))
    }

    pub fn for_key(public: &EcdsaPublicKey) -> Self {
        Self::from_address(&derive_address(public))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn method(&self) -> &str {
        self.0.split(':').nth(1).expect("validated")
    }

    pub fn specific_id(&self) -> &str {
        self.0.rsplit(':').next().expect("validated")
    }

    pub fn address(&self) -> Address {
        let mut a = [0u8; 20];
        hex::decode_to_slice(self.specific_id(), &mut a).expect("validated");
        Address(a)
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({})", self.0)
    }
}

impl FromStr for Did {
    type Err = DidError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Did::parse(s)
    }
}

impl TryFrom<String> for Did {
    type Error = DidError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Did::parse(&s)
    }
}

impl From<Did> for String {
    fn from(d: Did) -> String {
        d.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DidRecord {
    pub did: Did,
    pub eth_public_key: EcdsaPublicKey,
    pub falcon_public_key: FalconPublicKey,
    pub subject_proof: Digest256,
    pub controller: Did,
    pub registered_at: u64,
}

const RECORD_MAGIC: &[u8; 4] = b"DID1";
const RECORD_VERSION: u8 = 1;

impl DidRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_header(RECORD_MAGIC, RECORD_VERSION);
        w.str(self.did.as_str())
            .bytes(self.eth_public_key.as_bytes())
            .bytes(self.falcon_public_key.as_bytes())
            .raw(self.subject_proof.as_bytes())
            .str(self.controller.as_str())
            .u64(self.registered_at);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (mut r, version) = Reader::with_header(bytes, RECORD_MAGIC)?;
        if version != RECORD_VERSION {
            return Err(DecodeError::UnknownVersion(version));
        }
        let did = Did::parse(&r.string()?).map_err(|_| DecodeError::Invalid("did"))?;
        let eth = EcdsaPublicKey::from_slice(r.fixed(64, "eth public key")?)
            .map_err(|_| DecodeError::Invalid("eth public key"))?;
        let falcon = FalconPublicKey::from_slice(r.fixed(falcon::PUBLIC_KEY_BYTES, "falcon public key")?)
            .map_err(|_| DecodeError::Invalid("falcon public key"))?;
        let subject_proof = Digest256(r.array()?);
        let controller = Did::parse(&r.string()?).map_err(|_| DecodeError::Invalid("controller"))?;
        let registered_at = r.u64()?;
        r.finish()?;
        Ok(DidRecord {
            did,
            eth_public_key: eth,
            falcon_public_key: falcon,
            subject_proof,
            controller,
            registered_at,
        })
    }

    fn same_content(&self, other: &DidRecord) -> bool {
        DidRecord {
            registered_at: other.registered_at,
            ..self.clone()
        } == *other
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub did: Did,
    /// False when an identical record was already present.
    pub created: bool,
}

/// Outcome of [`Registry::controls`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Granted,
    /// The key's address is not the DID's method-specific id.
    AddressMismatch,
    /// Address matches but the registered key differs.
    KeyMismatch,
    NotFound,
}

impl Control {
    pub fn is_granted(self) -> bool {
        self == Control::Granted
    }
}

/// Contract-like registry state. Each simulated node holds its own replica;
/// reads never mutate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registry {
    ca: Did,
    records: BTreeMap<Did, DidRecord>,
}

impl Registry {
    pub fn new(ca: Did) -> Self {
        Registry {
            ca,
            records: BTreeMap::new(),
        }
    }

    pub fn ca(&self) -> &Did {
        &self.ca
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &DidRecord> {
        self.records.values()
    }

    pub fn register(&mut self, caller: &Did, record: DidRecord) -> Result<Receipt, DidError> {
        if *caller != self.ca {
            return Err(DidError::Unauthorized(caller.clone()));
        }
        let did = record.did.clone();
        if let Some(existing) = self.records.get(&did) {
            return if existing.same_content(&record) {
                Ok(Receipt { did, created: false })
            } else {
                Err(DidError::DuplicateDid(did))
            };
        }
        self.records.insert(did.clone(), record);
        Ok(Receipt { did, created: true })
    }

    pub fn resolve(&self, did: &Did) -> Result<&DidRecord, DidError> {
        self.records.get(did).ok_or_else(|| DidError::NotFound(did.clone()))
    }

    pub fn resolve_str(&self, did: &str) -> Result<&DidRecord, DidError> {
        self.resolve(&Did::parse(did)?)
    }

    pub fn controls(&self, eth_public_key: &EcdsaPublicKey, did: &Did) -> Control {
        if derive_address(eth_public_key) != did.address() {
            return Control::AddressMismatch;
        }
        match self.records.get(did) {
            None => Control::NotFound,
            Some(r) if r.eth_public_key == *eth_public_key => Control::Granted,
            Some(_) => Control::KeyMismatch,
        }
    }

    /// Sorted `hex(did) hex(record)` lines.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (did, record) in &self.records {
            out.push_str(&hex::encode(did.as_str()));
            out.push(' ');
            out.push_str(&hex::encode(record.encode()));
            out.push('\n');
        }
        out
    }

    pub fn from_snapshot(ca: Did, text: &str) -> Result<Self, DecodeError> {
        let mut reg = Registry::new(ca);
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once(' ').ok_or(DecodeError::Invalid("snapshot line"))?;
            let record = DidRecord::decode(&hex::decode(v).map_err(|_| DecodeError::Invalid("hex"))?)?;
            if hex::encode(record.did.as_str()) != k || reg.records.contains_key(&record.did) {
                return Err(DecodeError::Invalid("snapshot key"));
            }
            reg.records.insert(record.did.clone(), record);
        }
        Ok(reg)
    }

    pub fn state_hash(&self) -> Digest256 {
        keccak256(self.snapshot().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn did_syntax() {
        let good = "did:lac:00112233445566778899aabbccddeeff00112233";
        assert_eq!(Did::parse(good).unwrap().method(), "lac");
        for bad in [
            "did:lac",
            "did:lac:00112233445566778899AABBCCDDEEFF00112233",
            "did:lac:0011",
            "did::00112233445566778899aabbccddeeff00112233",
            "uri:lac:00112233445566778899aabbccddeeff00112233",
            "did:lac:00112233445566778899aabbccddeeff00112233:x",
        ] {
            assert!(matches!(Did::parse(bad), Err(DidError::MalformedDid(_))), "{bad}");
        }
    }
}
