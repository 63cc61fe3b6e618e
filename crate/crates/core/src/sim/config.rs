//! Scenario configuration: a `key = value` text format.
//!
//! ```text
//! # comment
//! seed = 7
//! writers = 1
//! validators = 4
//! observers = 1
//! adversaries = stolen-ecdsa-keys, tamper-in-flight
//! backend = metered
//! gas.hash_word = 36
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pqchain_crypto::KemAlgorithm;

use crate::verify::{Backend, Charging, GasModel};

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Adversary {
    /// Flips bits in tunnel records on the wire.
    TamperInFlight,
    /// Submits transactions whose Falcon signature is forged.
    ForgeFalcon,
    /// Re-submits transactions already seen on the network.
    ReplayMetatx,
    /// Holds every validator ECDSA secret, but no Falcon secret and no
    /// tunnel session key.
    StolenEcdsaKeys,
    /// Submits wrappers addressed somewhere other than the relay hub.
    RogueEntryPoint,
}

impl Adversary {
    pub const ALL: [Adversary; 5] = [
        Adversary::TamperInFlight,
        Adversary::ForgeFalcon,
        Adversary::ReplayMetatx,
        Adversary::StolenEcdsaKeys,
        Adversary::RogueEntryPoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Adversary::TamperInFlight => "tamper-in-flight",
            Adversary::ForgeFalcon => "forge-falcon",
            Adversary::ReplayMetatx => "replay-metatx",
            Adversary::StolenEcdsaKeys => "stolen-ecdsa-keys",
            Adversary::RogueEntryPoint => "rogue-entry-point",
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Adversary {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Adversary::ALL
            .into_iter()
            .find(|a| a.name().replace('-', "") == norm)
            .ok_or_else(|| SimError::UnknownScenario(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub writers: usize,
    pub validators: usize,
    pub observers: usize,
    /// Transactions submitted by each writer.
    pub transactions: u64,
    pub tx_interval_ms: u64,
    pub max_block_txs: usize,
    pub adversaries: BTreeSet<Adversary>,
    /// Attack attempts per enabled adversary.
    pub adversary_actions: usize,
    /// Per-mille chance that TamperInFlight corrupts a record.
    pub tamper_permille: u32,
    pub backend: Backend,
    pub gas: GasModel,
    pub entropy_kem: KemAlgorithm,
    pub tunnel_kem: KemAlgorithm,
    pub pq_block_signatures: bool,
    pub event_budget: u64,
    pub chain_id: u64,
    /// Keep plaintext inbox logs and decision logs (memory heavy).
    pub record_logs: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            writers: 1,
            validators: 4,
            observers: 1,
            transactions: 20,
            tx_interval_ms: 20,
            max_block_txs: 50,
            adversaries: BTreeSet::new(),
            adversary_actions: 3,
            tamper_permille: 50,
            backend: Backend::NativeFast(Charging::OpcodeFlat),
            gas: GasModel::default(),
            entropy_kem: KemAlgorithm::McEliece348864,
            tunnel_kem: KemAlgorithm::MlKem768,
            pq_block_signatures: false,
            event_budget: 1_000_000,
            chain_id: 648_529,
            record_logs: false,
            output_dir: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, SimError> {
    v.parse().map_err(|_| SimError::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, SimError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(SimError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_kem(key: &str, v: &str) -> Result<KemAlgorithm, SimError> {
    KemAlgorithm::ALL
        .into_iter()
        .find(|k| k.name() == v)
        .ok_or_else(|| SimError::Config(format!("{key}: unknown KEM {v:?}")))
}

impl SimConfig {
    pub const KEYS: [&'static str; 19] = [
        "seed",
        "writers",
        "validators",
        "observers",
        "transactions",
        "tx_interval_ms",
        "max_block_txs",
        "adversaries",
        "adversary_actions",
        "tamper_permille",
        "backend",
        "gas.<parameter>",
        "entropy_kem",
        "tunnel_kem",
        "pq_block_signatures",
        "event_budget",
        "chain_id",
        "record_logs",
        "output_dir",
    ];

    /// Applies one setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_num(key, v)?,
            "writers" => self.writers = parse_num(key, v)?,
            "validators" => self.validators = parse_num(key, v)?,
            "observers" => self.observers = parse_num(key, v)?,
            "transactions" => self.transactions = parse_num(key, v)?,
            "tx_interval_ms" => self.tx_interval_ms = parse_num(key, v)?,
            "max_block_txs" => self.max_block_txs = parse_num(key, v)?,
            "adversaries" => {
                self.adversaries = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && *s != "none")
                    .map(str::parse)
                    .collect::<Result<_, _>>()?
            }
            "adversary_actions" => self.adversary_actions = parse_num(key, v)?,
            "tamper_permille" => self.tamper_permille = parse_num(key, v)?,
            "backend" => self.backend = v.parse().map_err(SimError::Config)?,
            "entropy_kem" => self.entropy_kem = parse_kem(key, v)?,
            "tunnel_kem" => self.tunnel_kem = parse_kem(key, v)?,
            "pq_block_signatures" => self.pq_block_signatures = parse_bool(key, v)?,
            "event_budget" => self.event_budget = parse_num(key, v)?,
            "chain_id" => self.chain_id = parse_num(key, v)?,
            "record_logs" => self.record_logs = parse_bool(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            k => match k.strip_prefix("gas.") {
                Some(param) => self.gas.set(param, parse_num(key, v)?).map_err(SimError::Config)?,
                None => return Err(SimError::Config(format!("unknown key {k:?}"))),
            },
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<SimConfig, SimError> {
        let mut cfg = SimConfig::default();
        let mut seen = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("line {}: expected key = value", n + 1)))?;
            if !seen.insert(k.trim().to_string()) {
                return Err(SimError::Config(format!("line {}: duplicate key {:?}", n + 1, k.trim())));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.validators == 0 {
            return bad("at least one validator is required");
        }
        if self.writers == 0 && self.transactions > 0 {
            return bad("transactions need at least one writer");
        }
        if self.writers + self.validators + self.observers > 64 {
            return bad("at most 64 nodes");
        }
        if self.tamper_permille > 1000 {
            return bad("tamper_permille must be at most 1000");
        }
        if self.max_block_txs == 0 {
            return bad("max_block_txs must be positive");
        }
        if self.event_budget == 0 {
            return bad("event_budget must be positive");
        }
        Ok(())
    }
}
