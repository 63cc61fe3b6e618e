//! Node-side admission control: entry-point check, the three-step
//! DID/ECDSA/Falcon protocol, pool gating, and two verification backends
//! with a gas model.

use std::collections::HashSet;
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use pqchain_crypto::ecdsa::{derive_address, Address};
use pqchain_crypto::falcon::{self, meter::OpCounts, FalconPublicKey, FalconSignature};
use pqchain_crypto::Digest256;
use ruint::aliases::U256;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::did::{Control, Registry};
use crate::metatx::MetaTransaction;
use crate::tx::SignedTransaction;

/// Mainnet block gas limit.
pub const BLOCK_GAS_LIMIT: u64 = 12_000_000;
/// Mainnet contract code size limit (EIP-170).
pub const CODE_SIZE_LIMIT: u32 = 24_576;

/// Per-event prices for the metered backend and the precompile table for
/// the native one. A cost model, not EVM-exact accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasModel {
    /// Per 32-byte word absorbed into or squeezed out of SHAKE256.
    pub hash_word: u64,
    /// Per multiplication in Z_q.
    pub field_mul: u64,
    /// Per coefficient-sized memory word read or written.
    pub memory_word: u64,
    /// Flat price of a dedicated verify opcode.
    pub verify_opcode: u64,
    pub precompile_base: u64,
    pub precompile_per_word: u64,
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel {
            hash_word: 36,
            field_mul: 5,
            memory_word: 3,
            verify_opcode: 1,
            precompile_base: 30,
            precompile_per_word: 6,
        }
    }
}

impl GasModel {
    pub fn block_gas_limit(&self) -> u64 {
        BLOCK_GAS_LIMIT
    }

    pub fn code_size_limit(&self) -> u32 {
        CODE_SIZE_LIMIT
    }

    pub fn price(&self, counts: &OpCounts) -> u64 {
        let hash_words = (counts.hash_absorbed_bytes + counts.hash_squeezed_bytes).div_ceil(32);
        self.hash_word * hash_words + self.field_mul * counts.field_muls + self.memory_word * counts.memory_words
    }

    /// Applies `key=value` overrides; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: u64) -> Result<(), String> {
        let slot = match key {
            "hash_word" => &mut self.hash_word,
            "field_mul" => &mut self.field_mul,
            "memory_word" => &mut self.memory_word,
            "verify_opcode" => &mut self.verify_opcode,
            "precompile_base" => &mut self.precompile_base,
            "precompile_per_word" => &mut self.precompile_per_word,
            _ => return Err(format!("unknown gas parameter {key:?}")),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Charging {
    OpcodeFlat,
    PrecompileTable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Metered,
    NativeFast(Charging),
}

impl Backend {
    pub fn kind(self) -> BackendKind {
        match self {
            Backend::Metered => BackendKind::Metered,
            Backend::NativeFast(_) => BackendKind::NativeFast,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "metered" => Ok(Backend::Metered),
            "native" | "native-fast" | "opcode" | "opcode-flat" => Ok(Backend::NativeFast(Charging::OpcodeFlat)),
            "precompile" | "precompile-table" => Ok(Backend::NativeFast(Charging::PrecompileTable)),
            _ => Err(format!("unknown backend {s:?} (metered, opcode-flat, precompile-table)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackendKind {
    Metered,
    NativeFast,
}

/// Interpreted-cost model: verification runs natively with every primitive
/// event counted and priced.
pub fn metered_falcon_verify(stream: &[u8], sig: &FalconSignature, pk: &FalconPublicKey, model: &GasModel) -> (bool, u64) {
    let mut counts = OpCounts::default();
    let ok = falcon::verify_metered(stream, sig, pk, &mut counts).is_ok();
    (ok, model.price(&counts))
}

pub fn native_fast_verify(
    stream: &[u8],
    sig: &FalconSignature,
    pk: &FalconPublicKey,
    charging: Charging,
    model: &GasModel,
) -> (bool, u64) {
    let ok = falcon::verify(stream, sig, pk).is_ok();
    let gas = match charging {
        Charging::OpcodeFlat => model.verify_opcode,
        Charging::PrecompileTable => {
            let words = (stream.len() + sig.len() + falcon::PUBLIC_KEY_BYTES).div_ceil(32) as u64;
            model.precompile_base + model.precompile_per_word * words
        }
    };
    (ok, gas)
}

pub fn verify_with(backend: Backend, stream: &[u8], sig: &FalconSignature, pk: &FalconPublicKey, model: &GasModel) -> (bool, u64) {
    match backend {
        Backend::Metered => metered_falcon_verify(stream, sig, pk, model),
        Backend::NativeFast(c) => native_fast_verify(stream, sig, pk, c, model),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Admit,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    NotRelayHub,
    SenderControlFailed,
    DidUnresolvable,
    PqSignatureInvalid,
    Malformed,
    /// An optional permissioning predicate refused the transaction.
    PolicyDenied,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::NotRelayHub,
        RejectReason::SenderControlFailed,
        RejectReason::DidUnresolvable,
        RejectReason::PqSignatureInvalid,
        RejectReason::Malformed,
        RejectReason::PolicyDenied,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotRelayHub => "NotRelayHub",
            RejectReason::SenderControlFailed => "SenderControlFailed",
            RejectReason::DidUnresolvable => "DidUnresolvable",
            RejectReason::PqSignatureInvalid => "PqSignatureInvalid",
            RejectReason::Malformed => "Malformed",
            RejectReason::PolicyDenied => "PolicyDenied",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AdmissionDecision {
    pub verdict: Verdict,
    pub reason: Option<RejectReason>,
    pub gas_metered: u64,
    pub backend: BackendKind,
}

impl AdmissionDecision {
    fn reject(reason: RejectReason, backend: Backend) -> Self {
        AdmissionDecision {
            verdict: Verdict::Reject,
            reason: Some(reason),
            gas_metered: 0,
            backend: backend.kind(),
        }
    }

    pub fn is_admit(&self) -> bool {
        self.verdict == Verdict::Admit
    }
}

/// Wall-clock cost of each stage, for the decision log only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepTimings {
    pub entry_us: u64,
    pub step1_us: u64,
    pub step2_us: u64,
    pub step3_us: u64,
}

/// How many times each stage has started.
#[derive(Debug, Default)]
pub struct StepCounters {
    pub entry: AtomicU64,
    pub step1: AtomicU64,
    pub step2: AtomicU64,
    pub step3: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub entry: u64,
    pub step1: u64,
    pub step2: u64,
    pub step3: u64,
}

impl StepCounters {
    pub fn snapshot(&self) -> StepCounts {
        StepCounts {
            entry: self.entry.load(Ordering::Relaxed),
            step1: self.step1.load(Ordering::Relaxed),
            step2: self.step2.load(Ordering::Relaxed),
            step3: self.step3.load(Ordering::Relaxed),
        }
    }
}

/// Inputs to the optional permissioning predicates.
#[derive(Clone, Debug)]
pub struct PermissionParams {
    pub sender: Option<Address>,
    pub target: Address,
    pub value: U256,
    pub gas_price: U256,
    pub gas_limit: u64,
    pub payload: Vec<u8>,
}

pub type Predicate = Arc<dyn Fn(&PermissionParams) -> bool + Send + Sync>;

/// Extra permissioning checks; empty (disabled) by default.
#[derive(Clone, Default)]
pub struct Policy {
    predicates: Vec<(String, Predicate)>,
}

impl Policy {
    pub fn with(mut self, name: &str, p: Predicate) -> Self {
        self.predicates.push((name.to_string(), p));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    fn allows(&self, params: &PermissionParams) -> bool {
        self.predicates.iter().all(|(_, p)| p(params))
    }
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.predicates.iter().map(|(n, _)| n)).finish()
    }
}

/// A node's verification configuration. Decisions depend only on the
/// transaction and the registry snapshot.
#[derive(Debug)]
pub struct Verifier {
    pub relay_hub: Address,
    pub backend: Backend,
    pub gas: GasModel,
    pub policy: Policy,
    counters: StepCounters,
}

impl Clone for Verifier {
    fn clone(&self) -> Self {
        Verifier {
            relay_hub: self.relay_hub,
            backend: self.backend,
            gas: self.gas.clone(),
            policy: self.policy.clone(),
            counters: StepCounters::default(),
        }
    }
}

pub fn check_entry_point(wrapper: &SignedTransaction, relay_hub: &Address) -> Result<(), RejectReason> {
    match wrapper.tx.to {
        Some(to) if to == *relay_hub => Ok(()),
        _ => Err(RejectReason::NotRelayHub),
    }
}

fn micros(t: Instant) -> u64 {
    t.elapsed().as_micros() as u64
}

impl Verifier {
    pub fn new(relay_hub: Address, backend: Backend) -> Self {
        Verifier {
            relay_hub,
            backend,
            gas: GasModel::default(),
            policy: Policy::default(),
            counters: StepCounters::default(),
        }
    }

    pub fn counters(&self) -> StepCounts {
        self.counters.snapshot()
    }

    pub fn verify(&self, wrapper: &SignedTransaction, registry: &Registry) -> AdmissionDecision {
        self.verify_timed(wrapper, registry).0
    }

    /// Entry point, decoding, then steps 1 to 3 in order; the first failure
    /// ends evaluation.
    pub fn verify_timed(&self, wrapper: &SignedTransaction, registry: &Registry) -> (AdmissionDecision, StepTimings) {
        let mut t = StepTimings::default();
        let reject = |r| AdmissionDecision::reject(r, self.backend);

        let start = Instant::now();
        self.counters.entry.fetch_add(1, Ordering::Relaxed);
        if let Err(r) = check_entry_point(wrapper, &self.relay_hub) {
            t.entry_us = micros(start);
            return (reject(r), t);
        }
        let meta = match MetaTransaction::from_wrapper(wrapper.clone()) {
            Ok(m) => m,
            Err(_) => return (reject(RejectReason::Malformed), t),
        };
        if !self.policy.is_empty() {
            let params = PermissionParams {
                sender: wrapper.recover_signer().ok().map(|k| derive_address(&k)),
                target: meta.relay_hub,
                value: wrapper.tx.value,
                gas_price: wrapper.tx.gas_price,
                gas_limit: wrapper.tx.gas_limit,
                payload: wrapper.tx.data.clone(),
            };
            if !self.policy.allows(&params) {
                return (reject(RejectReason::PolicyDenied), t);
            }
        }
        t.entry_us = micros(start);

        // Step 1: the key that signed the wrapper controls the writer DID.
        let start = Instant::now();
        self.counters.step1.fetch_add(1, Ordering::Relaxed);
        let step1 = match wrapper.recover_signer() {
            Err(_) => Err(RejectReason::SenderControlFailed),
            Ok(key) => match registry.controls(&key, &meta.writer_did) {
                Control::Granted => Ok(()),
                Control::NotFound => Err(RejectReason::DidUnresolvable),
                Control::AddressMismatch | Control::KeyMismatch => Err(RejectReason::SenderControlFailed),
            },
        };
        t.step1_us = micros(start);
        if let Err(r) = step1 {
            return (reject(r), t);
        }

        // Step 2: the Falcon key registered for the same DID.
        let start = Instant::now();
        self.counters.step2.fetch_add(1, Ordering::Relaxed);
        let falcon_key = match registry.resolve(&meta.writer_did) {
            Ok(record) => record.falcon_public_key.clone(),
            Err(_) => return (reject(RejectReason::DidUnresolvable), t),
        };
        t.step2_us = micros(start);

        // Step 3: the Falcon signature over the inner EIP-155 stream.
        let start = Instant::now();
        self.counters.step3.fetch_add(1, Ordering::Relaxed);
        let stream = meta.inner.tx.signing_stream();
        let (ok, gas) = verify_with(self.backend, &stream, &meta.falcon_signature, &falcon_key, &self.gas);
        t.step3_us = micros(start);
        let decision = AdmissionDecision {
            verdict: if ok { Verdict::Admit } else { Verdict::Reject },
            reason: (!ok).then_some(RejectReason::PqSignatureInvalid),
            gas_metered: gas,
            backend: self.backend.kind(),
        };
        (decision, t)
    }
}

/// Per-node transaction pool: insertion-ordered, deduplicated by wrapper hash.
#[derive(Clone, Debug, Default)]
pub struct Pool {
    order: Vec<MetaTransaction>,
    seen: HashSet<Digest256>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolAction {
    /// Admitted and new: forward to peers.
    Inserted,
    Duplicate,
    Dropped(RejectReason),
}

impl Pool {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, hash: &Digest256) -> bool {
        self.seen.contains(hash)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetaTransaction> {
        self.order.iter()
    }

    /// Removes the given transactions (after finalization). They stay in the
    /// seen-set so replays are still deduplicated.
    pub fn remove_finalized<'a>(&mut self, hashes: impl IntoIterator<Item = &'a Digest256>) {
        let gone: HashSet<&Digest256> = hashes.into_iter().collect();
        self.order.retain(|m| !gone.contains(&m.hash()));
    }

    pub fn mark_seen(&mut self, hash: Digest256) {
        self.seen.insert(hash);
    }
}

/// Admit inserts (deduplicated); reject drops. The caller forwards on
/// `Inserted` only.
pub fn gate_and_propagate(pool: &mut Pool, meta: &MetaTransaction, decision: &AdmissionDecision) -> PoolAction {
    if let Some(r) = decision.reason.filter(|_| !decision.is_admit()) {
        return PoolAction::Dropped(r);
    }
    if !pool.seen.insert(meta.hash()) {
        return PoolAction::Duplicate;
    }
    pool.order.push(meta.clone());
    PoolAction::Inserted
}

pub fn decision_json(tx_hash: &Digest256, d: &AdmissionDecision, t: &StepTimings) -> serde_json::Value {
    json!({
        "tx_hash": tx_hash.to_string(),
        "verdict": d.verdict,
        "reason": d.reason.map(RejectReason::as_str),
        "backend": d.backend,
        "gas": d.gas_metered,
        "step_timings_us": [t.entry_us, t.step1_us, t.step2_us, t.step3_us],
    })
}

/// Appends one JSON line to an append-only decision log.
pub fn append_decision(path: &Path, tx_hash: &Digest256, d: &AdmissionDecision, t: &StepTimings) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", decision_json(tx_hash, d, t))
}

/// One row of the per-vector cost report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRow {
    pub vector: usize,
    pub message_len: usize,
    pub accepted: bool,
    pub gas: u64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("vector,message_len,verdict,gas,block_limit_ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            r.vector,
            r.message_len,
            if r.accepted { "accept" } else { "reject" },
            r.gas,
            r.gas as f64 / BLOCK_GAS_LIMIT as f64
        ));
    }
    out
}
