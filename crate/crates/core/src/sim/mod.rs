//! Deterministic multi-node harness: writer, validator and observer nodes
//! joined by tunnels, transaction flooding, threshold block production and
//! adversary injection.
//!
//! [`spawn_network`] does the expensive setup once (entropy bootstrap,
//! certificates, DID registration, the tunnel mesh). [`Simulation::fork`]
//! reuses those identities and sessions for another seed.

mod block;
mod config;

pub use block::*;
pub use config::*;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use pqchain_crypto::ecdsa::{Address, EcdsaKeyPair};
use pqchain_crypto::falcon::{self, FalconKeyPair, FalconSignature, SignatureEncoding};
use pqchain_crypto::{keccak256, Digest256, RandomSource, ShakeStream};
use ruint::aliases::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::{
    build_csr, CertError, CertificateAuthority, KeyMaterial, LegacyCertificate, PqCertificate, SubjectInfo, TrustedRoot,
    ECDSA_SECP256K1_OID, FALCON512_OID,
};
use crate::codec::{DecodeError, Reader, Writer};
use crate::did::{Did, Registry};
use crate::entropy::{
    deliver_shares, establish_entropy_session, request_entropy, EntropyError, EntropyService, EntropySource, Recomposer,
};
use crate::metatx::{sign_outer, wrap, MetaTransaction, WrapperParams, WRAPPER_GAS_LIMIT};
use crate::tunnel::{handshake, TunnelConfig, TunnelError, TunnelRecord, TunnelSession};
use crate::tx::{sign_inner, SignedTransaction, Transaction};
use crate::verify::{decision_json, gate_and_propagate, Pool, PoolAction, RejectReason, Verifier};
use crate::wire::{Link, WireLog};

/// Unix time at simulation start; simulated time advances in milliseconds.
pub const TIME_BASE: u64 = 1_700_000_000;
pub const TICK_MS: u64 = 100;
/// Reason code for transactions refused by role enforcement.
pub const ROLE_NOT_PERMITTED: &str = "RoleNotPermitted";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("ConfigInvalid: {0}")]
    Config(String),
    #[error("UnknownScenario: {0}")]
    UnknownScenario(String),
    #[error("bootstrap failed: {0}")]
    Entropy(#[from] EntropyError),
    #[error("certificate issuance failed: {0}")]
    Cert(#[from] CertError),
    #[error("tunnel setup failed: {0}")]
    Tunnel(#[from] TunnelError),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::Config(_) => "ConfigInvalid",
            SimError::UnknownScenario(_) => "UnknownScenario",
            SimError::Entropy(e) => e.code(),
            SimError::Cert(e) => e.code(),
            SimError::Tunnel(e) => e.code(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRole {
    Writer,
    Validator,
    Observer,
}

/// The seven fields of an inner transaction, for tamper sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InnerField {
    Nonce,
    GasPrice,
    GasLimit,
    To,
    Value,
    Data,
    ChainId,
}

impl InnerField {
    pub const ALL: [InnerField; 7] = [
        InnerField::Nonce,
        InnerField::GasPrice,
        InnerField::GasLimit,
        InnerField::To,
        InnerField::Value,
        InnerField::Data,
        InnerField::ChainId,
    ];

    /// Changes the field as it appears on the wire; the signing stream
    /// always changes. The chain id travels inside `v`, so `v` moves with it.
    pub fn mutate(self, signed: &mut SignedTransaction) {
        let tx = &mut signed.tx;
        match self {
            InnerField::Nonce => tx.nonce = tx.nonce.wrapping_add(1),
            InnerField::GasPrice => tx.gas_price = tx.gas_price.wrapping_add(U256::from(1u8)),
            InnerField::GasLimit => tx.gas_limit = tx.gas_limit.wrapping_add(1),
            InnerField::To => {
                tx.to = Some(match tx.to {
                    Some(mut a) => {
                        a.0[19] ^= 1;
                        a
                    }
                    None => Address([0x11; 20]),
                })
            }
            InnerField::Value => tx.value = tx.value.wrapping_add(U256::from(1u8)),
            InnerField::Data => match tx.data.first_mut() {
                Some(b) => *b ^= 0x80,
                None => tx.data.push(1),
            },
            InnerField::ChainId => {
                tx.chain_id += 1;
                signed.v += 2;
            }
        }
    }
}

/// Where a tampered transaction enters the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperVia {
    /// Submitted to a node's local ingress.
    Ingress(usize),
    /// Packed into a block by an insider validator, which signs and
    /// proposes it over its legitimate tunnels.
    ByzantineProposer(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    #[default]
    Quiescent,
    BudgetExhausted,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryMetrics {
    pub injected_txs: u64,
    pub injected_blocks: u64,
    pub tampered_records: u64,
    pub rogue_sessions: u64,
    pub adversarial_txs_finalized: u64,
    pub adversarial_blocks_finalized: u64,
    pub adversarial_txs_in_pools: u64,
    pub duplicate_finalizations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub outcome: RunOutcome,
    pub events: u64,
    pub submitted: u64,
    pub admitted: u64,
    pub duplicates: u64,
    pub rejected: BTreeMap<String, u64>,
    pub blocks_finalized: u64,
    pub txs_finalized: u64,
    pub honest_txs_finalized: u64,
    pub blocks_refused: BTreeMap<String, u64>,
    pub stale_messages: u64,
    pub handshakes: u64,
    pub handshake_failures: BTreeMap<String, u64>,
    pub record_failures: BTreeMap<String, u64>,
    pub retransmissions: u64,
    pub adversary: AdversaryMetrics,
    pub chains_consistent: bool,
    pub chain_head: String,
}

impl Metrics {
    pub fn rejected_for(&self, reason: &str) -> u64 {
        self.rejected.get(reason).copied().unwrap_or(0)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str) {
    *map.entry(key.to_string()).or_default() += 1;
}

pub fn metrics_csv(rows: &[Metrics]) -> String {
    let reasons: Vec<&str> = RejectReason::ALL
        .iter()
        .map(|r| r.as_str())
        .chain([ROLE_NOT_PERMITTED])
        .collect();
    let mut out = String::from("seed,outcome,events,submitted,admitted,duplicates");
    for r in &reasons {
        out.push_str(&format!(",rejected_{r}"));
    }
    out.push_str(
        ",blocks_finalized,txs_finalized,honest_txs_finalized,blocks_refused,handshakes,record_failures,retransmissions,\
         adv_injected_txs,adv_injected_blocks,adv_tampered_records,adv_rogue_sessions,adv_txs_finalized,\
         adv_blocks_finalized,adv_txs_in_pools,duplicate_finalizations,chains_consistent,chain_head\n",
    );
    for m in rows {
        let outcome = match m.outcome {
            RunOutcome::Quiescent => "quiescent",
            RunOutcome::BudgetExhausted => "budget_exhausted",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            m.seed, outcome, m.events, m.submitted, m.admitted, m.duplicates
        ));
        for r in &reasons {
            out.push_str(&format!(",{}", m.rejected_for(r)));
        }
        let a = &m.adversary;
        out.push_str(&format!(
            ",{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            m.blocks_finalized,
            m.txs_finalized,
            m.honest_txs_finalized,
            m.blocks_refused.values().sum::<u64>(),
            m.handshakes,
            m.record_failures.values().sum::<u64>(),
            m.retransmissions,
            a.injected_txs,
            a.injected_blocks,
            a.tampered_records,
            a.rogue_sessions,
            a.adversarial_txs_finalized,
            a.adversarial_blocks_finalized,
            a.adversarial_txs_in_pools,
            a.duplicate_finalizations,
            m.chains_consistent,
            m.chain_head
        ));
    }
    out
}

/// The single entry-point contract every wrapper must target.
pub fn relay_hub_address() -> Address {
    let h = keccak256(b"pqchain/relay-hub");
    Address::from_slice(&h.0[12..]).expect("20 bytes")
}

#[derive(Clone, Debug)]
enum Msg {
    Tx(Vec<u8>),
    Proposal(Block),
    Vote(u64, Digest256, ValidatorSignature),
    Commit(Block),
}

impl Msg {
    fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Msg::Tx(raw) => {
                w.u8(1).bytes(raw);
            }
            Msg::Proposal(b) => {
                w.u8(2).bytes(&b.encode());
            }
            Msg::Vote(n, h, s) => {
                w.u8(3).u64(*n).raw(&h.0);
                s.write(&mut w);
            }
            Msg::Commit(b) => {
                w.u8(4).bytes(&b.encode());
            }
        }
        w.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Msg, DecodeError> {
        let mut r = Reader::new(bytes);
        let m = match r.u8()? {
            1 => Msg::Tx(r.bytes()?.to_vec()),
            2 => Msg::Proposal(Block::decode(r.bytes()?)?),
            3 => Msg::Vote(r.u64()?, Digest256(r.array()?), ValidatorSignature::read(&mut r)?),
            4 => Msg::Commit(Block::decode(r.bytes()?)?),
            _ => return Err(DecodeError::Invalid("message type")),
        };
        r.finish()?;
        Ok(m)
    }
}

#[derive(Clone, Debug)]
enum Attack {
    /// Handshake presenting a validator's certificate without its Falcon key.
    Impersonate { target: usize, victim: usize },
    /// Handshake with a certificate signed by a rogue CA.
    RogueCa { target: usize, victim: usize },
    /// A forged commit pushed into an existing link without session keys.
    InjectRecord { target: usize, claimed: usize },
    ByzantineProposal { proposer: usize, tx: Box<MetaTransaction> },
}

#[derive(Clone, Debug)]
enum Event {
    Submit { writer: usize, index: u64 },
    Deliver { from: usize, to: usize, epoch: u64, record: Vec<u8>, plain: Vec<u8> },
    Ingress { node: usize, raw: Vec<u8> },
    Replay { node: usize, attempts: u8 },
    Tick,
    Attack(Attack),
}

#[derive(Clone)]
struct Pending {
    block: Block,
    votes: BTreeMap<Did, ValidatorSignature>,
}

#[derive(Clone)]
pub struct SimNode {
    pub id: usize,
    pub role: NodeRole,
    pub did: Did,
    pub certificate: PqCertificate,
    pub ecdsa: EcdsaKeyPair,
    pub falcon: FalconKeyPair,
    /// End-user account that signs inner transactions (writers only use it).
    pub account: EcdsaKeyPair,
    pub pool: Pool,
    pub peers: BTreeMap<usize, TunnelSession>,
    pub registry: Registry,
    pub chain: Vec<Block>,
    pub finalized: HashSet<Digest256>,
    pub verifier: Verifier,
    /// Insider that deviates from the protocol; excluded from honest checks.
    pub byzantine: bool,
    /// Decrypted tunnel payloads received, when logging is on.
    pub inbox: WireLog,
    /// JSONL admission decisions, when logging is on.
    pub decisions: Vec<String>,
    tunnel: TunnelConfig,
    rng: ShakeStream,
    voted: BTreeSet<u64>,
    pending: Option<Pending>,
    deferred: Vec<(usize, Msg)>,
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

#[derive(Clone)]
pub struct Simulation {
    config: SimConfig,
    nodes: Vec<SimNode>,
    consensus: ConsensusParams,
    writers: BTreeSet<Did>,
    relay_hub: Address,
    adversary_falcon: FalconKeyPair,
    /// A signature under the adversary's own key, reused where any
    /// well-formed but non-verifying signature will do.
    adversary_sig: FalconSignature,
    /// Validator certificates re-signed by a rogue CA, by node index.
    rogue_certs: BTreeMap<usize, PqCertificate>,
    bootstrap_wire: WireLog,
    initial_state: Digest256,

    rng: ShakeStream,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    now: u64,
    primed: bool,
    epochs: BTreeMap<(usize, usize), u64>,
    last_delivery: BTreeMap<(usize, usize), u64>,
    metrics: Metrics,
    history: Vec<MetaTransaction>,
    honest: HashSet<Digest256>,
    adversarial_txs: HashSet<Digest256>,
    adversarial_inner: HashSet<Digest256>,
    adversarial_blocks: HashSet<Digest256>,
    stolen: Vec<EcdsaKeyPair>,
    crafted: u64,
}

/// Builds the network: CA, entropy bootstrap, certificates and DIDs for every
/// node, and a full tunnel mesh. Deterministic given the configured seed.
pub fn spawn_network(config: &SimConfig) -> Result<Simulation, SimError> {
    config.validate()?;
    let seed = config.seed;
    let now = TIME_BASE;
    let mut master = ShakeStream::new(&[b"pqchain/sim/spawn/".as_slice(), &seed.to_be_bytes()].concat());
    let mut bootstrap_wire = WireLog::new();
    let mut service = EntropyService::new(EntropySource::seeded("qrng-sim", &seed.to_be_bytes()));

    let ca_eth = EcdsaKeyPair::generate(&mut master);
    let ca_falcon = falcon::keygen(&mut master).expect("Falcon keygen");
    let root_key = EcdsaKeyPair::generate(&mut master);
    let roots = vec![TrustedRoot {
        name: "Legacy Root".into(),
        public_key: *root_key.public(),
    }];
    let mut ca = CertificateAuthority::new(ca_eth.public(), ca_falcon, roots);
    let mut registry = Registry::new(ca.did().clone());

    let roles = std::iter::repeat(NodeRole::Writer)
        .take(config.writers)
        .chain(std::iter::repeat(NodeRole::Validator).take(config.validators))
        .chain(std::iter::repeat(NodeRole::Observer).take(config.observers));

    struct Identity {
        role: NodeRole,
        did: Did,
        certificate: PqCertificate,
        ecdsa: EcdsaKeyPair,
        falcon: FalconKeyPair,
        account: EcdsaKeyPair,
        rng: ShakeStream,
    }
    let mut ids = Vec::new();
    for (id, role) in roles.enumerate() {
        let node_id = format!("node-{id}");
        let mut link = Link::new(&mut bootstrap_wire);
        let shares = service.issue_bootstrap(&node_id, now)?;
        let shares = deliver_shares(&mut link, &shares)?;
        let mut node_rng = ShakeStream::new(format!("pqchain/sim/node-rng/{seed}/{id}").as_bytes());
        let mut session = establish_entropy_session(
            &node_id,
            &shares,
            &mut Recomposer::new(),
            &mut service,
            &mut link,
            config.entropy_kem,
            &mut node_rng,
            now,
        )?;
        let material = request_entropy(&mut session, &mut service, &mut link, 128)?;
        session.close();

        let falcon_keys = falcon::keygen_from_entropy(&material[..48]).expect("Falcon keygen");
        let mut rng = ShakeStream::new(&material[48..]);
        let ecdsa = EcdsaKeyPair::generate(&mut rng);
        let account = EcdsaKeyPair::generate(&mut rng);
        let did = Did::for_key(ecdsa.public());
        let subject = SubjectInfo::new(&node_id, "LACChain Simulation", "UY", did.clone())?;
        let legacy = LegacyCertificate::issue(
            subject.clone(),
            "Legacy Root",
            &root_key,
            now - 3600,
            now + 365 * 86_400,
            *ecdsa.public(),
        );
        let csr_eth = build_csr(subject.clone(), KeyMaterial::Ecdsa(&ecdsa), ECDSA_SECP256K1_OID, &mut rng)?;
        let csr_falcon = build_csr(subject, KeyMaterial::Falcon(&falcon_keys), FALCON512_OID, &mut rng)?;
        let issued = ca.issue_certificate(&mut registry, &legacy, &csr_eth, &csr_falcon, now, &mut master)?;
        ids.push(Identity {
            role,
            did,
            certificate: issued.certificate,
            ecdsa,
            falcon: falcon_keys,
            account,
            rng,
        });
    }

    let all_dids: Vec<Did> = ids.iter().map(|i| i.did.clone()).collect();
    let relay_hub = relay_hub_address();
    let mut nodes: Vec<SimNode> = ids
        .into_iter()
        .enumerate()
        .map(|(id, i)| {
            let mut tunnel = TunnelConfig::new(
                i.certificate.clone(),
                i.falcon.clone(),
                ca.did().clone(),
                ca.falcon_public().clone(),
                all_dids.iter().cloned(),
            );
            tunnel.kem = config.tunnel_kem;
            let mut verifier = Verifier::new(relay_hub, config.backend);
            verifier.gas = config.gas.clone();
            SimNode {
                id,
                role: i.role,
                did: i.did,
                certificate: i.certificate,
                ecdsa: i.ecdsa,
                falcon: i.falcon,
                account: i.account,
                pool: Pool::default(),
                peers: BTreeMap::new(),
                registry: registry.clone(),
                chain: Vec::new(),
                finalized: HashSet::new(),
                verifier,
                byzantine: false,
                inbox: WireLog::new(),
                decisions: Vec::new(),
                tunnel,
                rng: i.rng,
                voted: BTreeSet::new(),
                pending: None,
                deferred: Vec::new(),
            }
        })
        .collect();

    let mut mesh_log = WireLog::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let (na, nb) = two_mut(&mut nodes, a, b);
            let mut link = Link::new(&mut mesh_log);
            let (sa, sb) = handshake(&na.tunnel, &nb.tunnel, &mut link, &mut na.rng, &mut nb.rng, now)?;
            na.peers.insert(b, sa);
            nb.peers.insert(a, sb);
        }
    }

    let validators = nodes
        .iter()
        .filter(|n| n.role == NodeRole::Validator)
        .map(|n| n.did.clone())
        .collect();
    let consensus = ConsensusParams::new(validators, config.pq_block_signatures).map_err(|e| SimError::Config(e.to_string()))?;
    let writers = nodes
        .iter()
        .filter(|n| n.role == NodeRole::Writer)
        .map(|n| n.did.clone())
        .collect();
    let adversary_falcon = falcon::keygen(&mut master).expect("Falcon keygen");
    let adversary_sig = falcon::sign(b"pqchain/adversary", &adversary_falcon.secret, &mut master, SignatureEncoding::Padded)
        .expect("Falcon signing");

    let mut sim = Simulation {
        config: config.clone(),
        nodes,
        consensus,
        writers,
        relay_hub,
        adversary_falcon,
        adversary_sig,
        rogue_certs: BTreeMap::new(),
        bootstrap_wire,
        initial_state: Digest256([0; 32]),
        rng: ShakeStream::new(b""),
        queue: BTreeMap::new(),
        seq: 0,
        now: 0,
        primed: false,
        epochs: BTreeMap::new(),
        last_delivery: BTreeMap::new(),
        metrics: Metrics::default(),
        history: Vec::new(),
        honest: HashSet::new(),
        adversarial_txs: HashSet::new(),
        adversarial_inner: HashSet::new(),
        adversarial_blocks: HashSet::new(),
        stolen: Vec::new(),
        crafted: 0,
    };
    if config.adversaries.contains(&Adversary::StolenEcdsaKeys) {
        let validators: Vec<usize> = sim.nodes.iter().filter(|n| n.role == NodeRole::Validator).map(|n| n.id).collect();
        for v in validators {
            sim.rogue_cert(v);
        }
    }
    sim.initial_state = sim.state_hash();
    sim.reset_runtime(seed);
    Ok(sim)
}

impl Simulation {
    /// Same identities and tunnel sessions, fresh runtime state for `seed`.
    pub fn fork(&self, seed: u64) -> Simulation {
        let mut s = self.clone();
        s.reset_runtime(seed);
        s
    }

    fn reset_runtime(&mut self, seed: u64) {
        self.config.seed = seed;
        self.rng = ShakeStream::new(&[b"pqchain/sim/run/".as_slice(), &seed.to_be_bytes()].concat());
        for n in &mut self.nodes {
            n.rng = ShakeStream::new(&[n.did.as_str().as_bytes(), &seed.to_be_bytes()].concat());
            n.pool = Pool::default();
            n.chain.clear();
            n.finalized.clear();
            n.verifier = n.verifier.clone();
            n.byzantine = false;
            n.inbox = WireLog::new();
            n.decisions.clear();
            n.voted.clear();
            n.pending = None;
            n.deferred.clear();
        }
        self.queue.clear();
        self.seq = 0;
        self.now = 0;
        self.primed = false;
        self.epochs.clear();
        self.last_delivery.clear();
        self.metrics = Metrics {
            seed,
            ..Metrics::default()
        };
        self.history.clear();
        self.honest.clear();
        self.adversarial_txs.clear();
        self.adversarial_inner.clear();
        self.adversarial_blocks.clear();
        self.stolen.clear();
        self.crafted = 0;
    }

    /// Replaces runtime settings (seed, adversaries, rates, backend) and
    /// resets runtime state. Topology and key choices are fixed at spawn.
    pub fn set_config(&mut self, config: SimConfig) -> Result<(), SimError> {
        config.validate()?;
        let fixed = |c: &SimConfig| (c.writers, c.validators, c.observers, c.entropy_kem, c.tunnel_kem, c.pq_block_signatures);
        if fixed(&config) != fixed(&self.config) {
            return Err(SimError::Config("topology and KEM choices are fixed after spawn".into()));
        }
        let seed = config.seed;
        for n in &mut self.nodes {
            n.verifier.backend = config.backend;
            n.verifier.gas = config.gas.clone();
        }
        self.config = config;
        self.reset_runtime(seed);
        Ok(())
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[SimNode] {
        &self.nodes
    }

    pub fn consensus(&self) -> &ConsensusParams {
        &self.consensus
    }

    pub fn writers(&self) -> &BTreeSet<Did> {
        &self.writers
    }

    pub fn relay_hub(&self) -> Address {
        self.relay_hub
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// Every byte of the entropy bootstrap as it crossed the wire.
    pub fn bootstrap_wire(&self) -> &WireLog {
        &self.bootstrap_wire
    }

    /// Honestly submitted transactions, in submission order.
    pub fn history(&self) -> &[MetaTransaction] {
        &self.history
    }

    pub fn chain_snapshot(&self, node: usize) -> Vec<u8> {
        chain_snapshot(&self.nodes[node].chain)
    }

    /// Hash over registry replicas, certificates and chains.
    pub fn state_hash(&self) -> Digest256 {
        let mut buf = Vec::new();
        for n in &self.nodes {
            buf.extend_from_slice(&n.registry.state_hash().0);
            buf.extend_from_slice(&n.certificate.encode());
            buf.extend_from_slice(&keccak256(&chain_snapshot(&n.chain)).0);
        }
        keccak256(&buf)
    }

    /// State hash right after setup, before any runtime activity.
    pub fn initial_state_hash(&self) -> Digest256 {
        self.initial_state
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = &SimNode> {
        self.nodes.iter().filter(|n| !n.byzantine)
    }

    pub fn inject_adversary(&mut self, adversary: Adversary) {
        self.config.adversaries.insert(adversary);
    }

    pub fn inject_adversary_named(&mut self, name: &str) -> Result<(), SimError> {
        self.inject_adversary(name.parse()?);
        Ok(())
    }

    fn now_secs(&self) -> u64 {
        TIME_BASE + self.now / 1000
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        self.seq += 1;
        self.queue.insert((at, self.seq), ev);
    }

    fn rand_u64(&mut self) -> u64 {
        let mut b = [0u8; 8];
        self.rng.fill_bytes(&mut b);
        u64::from_be_bytes(b)
    }

    fn rand_below(&mut self, n: u64) -> u64 {
        self.rand_u64() % n.max(1)
    }

    fn first_writer(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == NodeRole::Writer)
    }

    fn window(&self) -> u64 {
        10 + self.config.transactions * self.config.tx_interval_ms
    }

    fn random_honest_node(&mut self) -> usize {
        let honest: Vec<usize> = self.nodes.iter().filter(|n| !n.byzantine).map(|n| n.id).collect();
        honest[self.rand_below(honest.len() as u64) as usize]
    }

    fn random_inner(&mut self, author: usize, nonce: u64) -> SignedTransaction {
        let mut to = [0u8; 20];
        self.rng.fill_bytes(&mut to);
        let mut data = vec![0u8; self.rand_below(65) as usize];
        self.rng.fill_bytes(&mut data);
        let value = self.rand_below(1_000_000_000_000_000_000);
        let tx = Transaction {
            nonce,
            gas_price: U256::from(1_000_000_000u64),
            gas_limit: 21_000 + 68 * data.len() as u64,
            to: Some(Address(to)),
            value: U256::from(value),
            data,
            chain_id: self.config.chain_id,
        };
        sign_inner(tx, &self.nodes[author].account)
    }

    fn wrapper_params(&self, nonce: u64) -> WrapperParams {
        WrapperParams {
            nonce,
            gas_price: U256::ZERO,
            gas_limit: WRAPPER_GAS_LIMIT,
            chain_id: self.config.chain_id,
        }
    }

    fn next_crafted_nonce(&mut self) -> u64 {
        self.crafted += 1;
        (1 << 40) | self.crafted
    }

    /// A correctly signed meta-transaction authored by any node under its
    /// own DID. Only writer-authored ones pass role enforcement.
    pub fn craft_metatx(&mut self, author: usize) -> MetaTransaction {
        let nonce = self.next_crafted_nonce();
        let inner = self.random_inner(author, nonce);
        let params = self.wrapper_params(nonce);
        let hub = self.relay_hub;
        let n = &mut self.nodes[author];
        sign_outer(inner, &n.did, &n.falcon, &n.ecdsa, hub, &params, &n.registry, &mut n.rng).expect("author is registered")
    }

    /// Delivers raw wrapper bytes to a node's local ingress right away.
    pub fn inject_ingress(&mut self, node: usize, raw: &[u8]) {
        self.accept_tx(node, raw, None);
    }

    fn mark_adversarial(&mut self, meta: &MetaTransaction) {
        self.adversarial_txs.insert(meta.hash());
        self.adversarial_inner.insert(meta.inner.tx.signing_hash());
        self.metrics.adversary.injected_txs += 1;
    }

    /// A writer-signed transaction whose inner field is changed after the
    /// Falcon signature was made, re-wrapped with the writer's ECDSA key.
    pub fn schedule_tampered(&mut self, field: InnerField, via: TamperVia) -> Option<Digest256> {
        self.schedule_tampered_fields(&[field], via).pop()
    }

    /// One writer-signed transaction, mutated once per field in
    /// [`InnerField::ALL`]; every variant reuses the original signature.
    pub fn schedule_tamper_matrix(&mut self, via: TamperVia) -> Vec<Digest256> {
        self.schedule_tampered_fields(&InnerField::ALL, via)
    }

    fn schedule_tampered_fields(&mut self, fields: &[InnerField], via: TamperVia) -> Vec<Digest256> {
        let Some(w) = self.first_writer() else {
            return Vec::new();
        };
        let nonce = self.next_crafted_nonce();
        let inner = self.random_inner(w, nonce);
        let params = self.wrapper_params(nonce);
        let hub = self.relay_hub;
        let n = &mut self.nodes[w];
        let sig = falcon::sign(&inner.tx.signing_stream(), &n.falcon.secret, &mut n.rng, SignatureEncoding::Padded)
            .expect("Falcon signing");
        let mut hashes = Vec::new();
        for field in fields {
            let n = &self.nodes[w];
            let mut tampered = inner.clone();
            field.mutate(&mut tampered);
            let meta = wrap(tampered, &n.did, sig.clone(), &n.ecdsa, hub, &params);
            self.mark_adversarial(&meta);
            hashes.push(meta.hash());
            let at = 1 + self.rand_below(self.window());
            match via {
                TamperVia::Ingress(node) => self.schedule(at, Event::Ingress { node, raw: meta.raw() }),
                TamperVia::ByzantineProposer(b) => {
                    self.nodes[b].byzantine = true;
                    self.schedule(
                        at,
                        Event::Attack(Attack::ByzantineProposal {
                            proposer: b,
                            tx: Box::new(meta),
                        }),
                    )
                }
            }
        }
        hashes
    }

    fn forged_falcon_tx(&mut self, variant: usize) -> Option<MetaTransaction> {
        let w = self.first_writer()?;
        let nonce = self.next_crafted_nonce();
        let inner = self.random_inner(w, nonce);
        let stream = inner.tx.signing_stream();
        let sig = match variant % 3 {
            // The adversary's own Falcon key.
            0 => falcon::sign(&stream, &self.adversary_falcon.secret, &mut self.rng, SignatureEncoding::Padded),
            // A genuine writer signature over a different message.
            1 => {
                let other = self.random_inner(w, nonce + 1);
                let n = &mut self.nodes[w];
                falcon::sign(&other.tx.signing_stream(), &n.falcon.secret, &mut n.rng, SignatureEncoding::Padded)
            }
            // A genuine signature with one byte of the body changed.
            _ => {
                let n = &mut self.nodes[w];
                let good = falcon::sign(&stream, &n.falcon.secret, &mut n.rng, SignatureEncoding::Padded).expect("sign");
                let mut bytes = good.as_bytes().to_vec();
                let at = 41 + self.rand_below(bytes.len() as u64 - 41) as usize;
                bytes[at] ^= 0x04;
                FalconSignature::from_slice(&bytes)
                    .or_else(|_| falcon::sign(&stream, &self.adversary_falcon.secret, &mut self.rng, SignatureEncoding::Padded))
            }
        }
        .expect("Falcon signing");
        let params = self.wrapper_params(nonce);
        let n = &self.nodes[w];
        Some(wrap(inner, &n.did, sig, &n.ecdsa, self.relay_hub, &params))
    }

    /// Wrappers signed with stolen validator keys: one claims the writer's
    /// DID, one the validator's own.
    fn stolen_key_txs(&mut self, k: usize) -> Vec<MetaTransaction> {
        let Some(w) = self.first_writer() else {
            return Vec::new();
        };
        let v = self.nodes.iter().filter(|n| n.role == NodeRole::Validator).nth(k % self.consensus.validator_set.len()).map(|n| n.id);
        let Some(v) = v else { return Vec::new() };
        let key = self.stolen[k % self.stolen.len()].clone();
        let mut out = Vec::new();
        for did in [self.nodes[w].did.clone(), self.nodes[v].did.clone()] {
            let nonce = self.next_crafted_nonce();
            let inner = self.random_inner(w, nonce);
            let params = self.wrapper_params(nonce);
            out.push(wrap(inner, &did, self.adversary_sig.clone(), &key, self.relay_hub, &params));
        }
        out
    }

    fn rogue_entry_tx(&mut self, k: usize) -> Option<MetaTransaction> {
        let w = self.first_writer()?;
        let nonce = self.next_crafted_nonce();
        let inner = self.random_inner(w, nonce);
        let target = if k == 0 {
            Address::default()
        } else {
            let mut a = [0u8; 20];
            self.rng.fill_bytes(&mut a);
            Address(a)
        };
        let params = self.wrapper_params(nonce);
        let n = &mut self.nodes[w];
        let sig = falcon::sign(&inner.tx.signing_stream(), &n.falcon.secret, &mut n.rng, SignatureEncoding::Padded).expect("sign");
        Some(wrap(inner, &n.did, sig, &n.ecdsa, target, &params))
    }

    /// The victim's certificate with the adversary's Falcon key, signed by
    /// the adversary posing as CA. Cached across forks of a warmed network.
    fn rogue_cert(&mut self, victim: usize) -> PqCertificate {
        if let Some(c) = self.rogue_certs.get(&victim) {
            return c.clone();
        }
        let mut cert = self.nodes[victim].certificate.clone();
        cert.falcon_public_key = self.adversary_falcon.public.clone();
        let mut rng = ShakeStream::new(&[b"pqchain/rogue-ca/".as_slice(), &(victim as u64).to_be_bytes()].concat());
        cert.ca_falcon_signature =
            falcon::sign(&cert.to_be_signed(), &self.adversary_falcon.secret, &mut rng, SignatureEncoding::Padded)
                .expect("Falcon signing");
        self.rogue_certs.insert(victim, cert.clone());
        cert
    }

    /// A block over a forged transaction, signed with every stolen key.
    fn forged_block(&mut self, target: usize) -> Block {
        let (number, prev) = self.nodes[target]
            .chain
            .last()
            .map_or((0, Digest256([0; 32])), |b| (b.number + 1, b.block_hash));
        let txs = self.stolen_key_txs(0);
        for t in &txs {
            self.mark_adversarial(t);
        }
        let nonce = self.rand_u64();
        let mut block = Block::assemble(number, nonce, prev, txs);
        let validators: Vec<usize> = self.nodes.iter().filter(|n| n.role == NodeRole::Validator).map(|n| n.id).collect();
        for (v, key) in validators.iter().zip(&self.stolen) {
            let sig = block.sign(&self.nodes[*v].did, key, None);
            block.validator_signatures.push(sig);
        }
        self.adversarial_blocks.insert(block.block_hash);
        self.metrics.adversary.injected_blocks += 1;
        block
    }

    fn prime(&mut self) {
        if self.primed {
            return;
        }
        self.primed = true;
        let writers: Vec<usize> = self.nodes.iter().filter(|n| n.role == NodeRole::Writer).map(|n| n.id).collect();
        for (k, &w) in writers.iter().enumerate() {
            for index in 0..self.config.transactions {
                let at = 10 + index * self.config.tx_interval_ms + k as u64;
                self.schedule(at, Event::Submit { writer: w, index });
            }
        }
        self.schedule(TICK_MS, Event::Tick);

        let window = self.window();
        let actions = self.config.adversary_actions;
        for adv in self.config.adversaries.clone() {
            match adv {
                Adversary::TamperInFlight => {}
                Adversary::ForgeFalcon => {
                    for k in 0..actions {
                        if let Some(meta) = self.forged_falcon_tx(k) {
                            self.mark_adversarial(&meta);
                            let node = self.random_honest_node();
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Ingress { node, raw: meta.raw() });
                        }
                    }
                }
                Adversary::ReplayMetatx => {
                    for _ in 0..actions {
                        let node = self.random_honest_node();
                        let at = 1 + self.rand_below(window);
                        self.schedule(at, Event::Replay { node, attempts: 0 });
                    }
                    let node = self.random_honest_node();
                    self.schedule(window + 5_000, Event::Replay { node, attempts: 0 });
                }
                Adversary::StolenEcdsaKeys => {
                    self.stolen = self
                        .nodes
                        .iter()
                        .filter(|n| n.role == NodeRole::Validator)
                        .map(|n| n.ecdsa.clone())
                        .collect();
                    let validators: Vec<usize> = self.nodes.iter().filter(|n| n.role == NodeRole::Validator).map(|n| n.id).collect();
                    for k in 0..actions {
                        let target = self.random_honest_node();
                        let others: Vec<usize> = validators.iter().copied().filter(|v| *v != target).collect();
                        if let Some(&victim) = others.get(self.rand_below(others.len() as u64) as usize) {
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Attack(Attack::Impersonate { target, victim }));
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Attack(Attack::RogueCa { target, victim }));
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Attack(Attack::InjectRecord { target, claimed: victim }));
                        }
                        for meta in self.stolen_key_txs(k) {
                            self.mark_adversarial(&meta);
                            let node = self.random_honest_node();
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Ingress { node, raw: meta.raw() });
                        }
                    }
                }
                Adversary::RogueEntryPoint => {
                    for k in 0..actions {
                        if let Some(meta) = self.rogue_entry_tx(k) {
                            self.mark_adversarial(&meta);
                            let node = self.random_honest_node();
                            let at = 1 + self.rand_below(window);
                            self.schedule(at, Event::Ingress { node, raw: meta.raw() });
                        }
                    }
                }
            }
        }
    }

    /// Discrete-event execution until the queue drains or the event budget
    /// is spent.
    pub fn run(&mut self) -> &Metrics {
        self.prime();
        let budget = self.config.event_budget;
        while self.metrics.events < budget {
            let Some(((t, _), ev)) = self.queue.pop_first() else {
                break;
            };
            self.now = t;
            self.metrics.events += 1;
            self.dispatch(ev);
        }
        self.metrics.outcome = if self.queue.is_empty() {
            RunOutcome::Quiescent
        } else {
            RunOutcome::BudgetExhausted
        };
        self.finish_metrics();
        &self.metrics
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::Submit { writer, index } => self.submit(writer, index),
            Event::Deliver {
                from,
                to,
                epoch,
                record,
                plain,
            } => {
                if epoch != self.epoch(from, to) {
                    // Sealed under a session that has since been replaced.
                    self.metrics.retransmissions += 1;
                    self.send_bytes(from, to, plain, true);
                    return;
                }
                match self.receive(from, to, &record) {
                    Some(msg) => self.handle(to, from, msg),
                    None => {
                        self.metrics.retransmissions += 1;
                        self.send_bytes(from, to, plain, true);
                    }
                }
            }
            Event::Ingress { node, raw } => self.accept_tx(node, &raw, None),
            Event::Replay { node, attempts } => {
                if self.history.is_empty() {
                    if attempts < 50 {
                        let at = self.now + 50;
                        self.schedule(at, Event::Replay { node, attempts: attempts + 1 });
                    }
                    return;
                }
                let pick = self.rand_below(self.history.len() as u64) as usize;
                let raw = self.history[pick].raw();
                self.metrics.adversary.injected_txs += 1;
                self.accept_tx(node, &raw, None);
            }
            Event::Tick => self.tick(),
            Event::Attack(a) => self.attack(a),
        }
    }

    fn submit(&mut self, writer: usize, index: u64) {
        let inner = self.random_inner(writer, index);
        let params = self.wrapper_params(index);
        let hub = self.relay_hub;
        let n = &mut self.nodes[writer];
        let meta = sign_outer(inner, &n.did, &n.falcon, &n.ecdsa, hub, &params, &n.registry, &mut n.rng).expect("writer is registered");
        self.metrics.submitted += 1;
        self.honest.insert(meta.hash());
        let raw = meta.raw();
        self.history.push(meta);
        self.accept_tx(writer, &raw, None);
    }

    fn epoch(&self, a: usize, b: usize) -> u64 {
        self.epochs.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    fn rehandshake(&mut self, a: usize, b: usize) {
        let (i, r) = (a.min(b), a.max(b));
        *self.epochs.entry((i, r)).or_default() += 1;
        let now = self.now_secs();
        let mut log = WireLog::new();
        let (ni, nr) = two_mut(&mut self.nodes, i, r);
        let mut link = Link::new(&mut log);
        match handshake(&ni.tunnel, &nr.tunnel, &mut link, &mut ni.rng, &mut nr.rng, now) {
            Ok((si, sr)) => {
                ni.peers.insert(r, si);
                nr.peers.insert(i, sr);
                self.metrics.handshakes += 1;
            }
            Err(e) => {
                ni.peers.remove(&r);
                nr.peers.remove(&i);
                bump(&mut self.metrics.handshake_failures, e.code());
            }
        }
    }

    fn send(&mut self, from: usize, to: usize, msg: &Msg) {
        self.send_bytes(from, to, msg.encode(), false);
    }

    fn send_bytes(&mut self, from: usize, to: usize, plain: Vec<u8>, retransmit: bool) {
        let now_s = self.now_secs();
        let usable = self.nodes[from]
            .peers
            .get(&to)
            .is_some_and(|s| s.is_open() && !s.needs_renegotiation(now_s));
        if !usable {
            self.rehandshake(from, to);
        }
        let Some(record) = self.nodes[from].peers.get_mut(&to).and_then(|s| s.seal(&plain).ok()) else {
            bump(&mut self.metrics.record_failures, "Undeliverable");
            return;
        };
        let mut record = record.encode();
        let tamper = !retransmit
            && self.config.adversaries.contains(&Adversary::TamperInFlight)
            && self.rand_below(1000) < u64::from(self.config.tamper_permille);
        if tamper {
            let bit = self.rand_below(record.len() as u64 * 8) as usize;
            record[bit / 8] ^= 1 << (bit % 8);
            self.metrics.adversary.tampered_records += 1;
        }
        let latency = 1 + self.rand_below(9);
        let last = self.last_delivery.get(&(from, to)).copied().unwrap_or(0);
        let at = (self.now + latency).max(last);
        self.last_delivery.insert((from, to), at);
        let epoch = self.epoch(from, to);
        self.schedule(
            at,
            Event::Deliver {
                from,
                to,
                epoch,
                record,
                plain,
            },
        );
    }

    /// Opens a record from `from` at `to`. Any failure re-establishes the
    /// tunnel and yields nothing.
    fn receive(&mut self, from: usize, to: usize, record: &[u8]) -> Option<Msg> {
        let res = match self.nodes[to].peers.get_mut(&from) {
            Some(s) => s.open_bytes(record),
            None => Err(TunnelError::SessionClosed),
        };
        match res {
            Ok(plain) => {
                if self.config.record_logs {
                    self.nodes[to].inbox.record(format!("{from}->{to}"), &plain);
                }
                match Msg::decode(&plain) {
                    Ok(m) => Some(m),
                    Err(_) => {
                        bump(&mut self.metrics.record_failures, "Malformed");
                        None
                    }
                }
            }
            Err(e) => {
                bump(&mut self.metrics.record_failures, e.code());
                self.rehandshake(from, to);
                None
            }
        }
    }

    fn handle(&mut self, n: usize, from: usize, msg: Msg) {
        match msg {
            Msg::Tx(raw) => self.accept_tx(n, &raw, Some(from)),
            Msg::Proposal(b) => self.on_proposal(n, from, b),
            Msg::Vote(number, hash, sig) => self.on_vote(n, from, number, hash, sig),
            Msg::Commit(b) => self.on_commit(n, from, b),
        }
    }

    fn accept_tx(&mut self, n: usize, raw: &[u8], origin: Option<usize>) {
        let meta = match MetaTransaction::decode_raw(raw) {
            Ok(m) => m,
            Err(_) => {
                bump(&mut self.metrics.rejected, RejectReason::Malformed.as_str());
                return;
            }
        };
        let h = meta.hash();
        let node = &mut self.nodes[n];
        if node.pool.contains(&h) || node.finalized.contains(&h) {
            self.metrics.duplicates += 1;
            return;
        }
        // Role enforcement happens before any verification work.
        if !self.writers.contains(&meta.writer_did) {
            bump(&mut self.metrics.rejected, ROLE_NOT_PERMITTED);
            return;
        }
        let (decision, timings) = node.verifier.verify_timed(&meta.wrapper, &node.registry);
        if self.config.record_logs {
            node.decisions.push(decision_json(&h, &decision, &timings).to_string());
        }
        match gate_and_propagate(&mut node.pool, &meta, &decision) {
            PoolAction::Inserted => {
                self.metrics.admitted += 1;
                let peers: Vec<usize> = node.peers.keys().copied().filter(|p| Some(*p) != origin).collect();
                for p in peers {
                    self.send(n, p, &Msg::Tx(raw.to_vec()));
                }
            }
            PoolAction::Duplicate => self.metrics.duplicates += 1,
            PoolAction::Dropped(r) => bump(&mut self.metrics.rejected, r.as_str()),
        }
    }

    fn sign_block(&mut self, n: usize, block: &Block) -> ValidatorSignature {
        let pq = self.consensus.pq_block_signatures;
        let node = &mut self.nodes[n];
        if pq {
            block.sign(&node.did, &node.ecdsa, Some((&node.falcon, &mut node.rng)))
        } else {
            block.sign(&node.did, &node.ecdsa, None)
        }
    }

    fn on_proposal(&mut self, n: usize, from: usize, block: Block) {
        if !self.consensus.is_validator(&self.nodes[n].did) {
            return;
        }
        if !self.consensus.is_validator(&self.nodes[from].did) {
            bump(&mut self.metrics.blocks_refused, "NotValidator");
            return;
        }
        let tip = self.nodes[n].chain.len() as u64;
        if block.number > tip {
            self.nodes[n].deferred.push((from, Msg::Proposal(block)));
            return;
        }
        if block.number < tip {
            self.metrics.stale_messages += 1;
            return;
        }
        if self.nodes[n].voted.contains(&block.number) {
            bump(&mut self.metrics.blocks_refused, "AlreadyVoted");
            return;
        }
        let node = &self.nodes[n];
        if let Err(e) = check_body(&block, node.chain.last(), &node.verifier, &node.registry, &self.writers, &node.finalized) {
            bump(&mut self.metrics.blocks_refused, e.code());
            return;
        }
        self.nodes[n].voted.insert(block.number);
        let sig = self.sign_block(n, &block);
        self.send(n, from, &Msg::Vote(block.number, block.block_hash, sig));
    }

    fn on_vote(&mut self, n: usize, from: usize, number: u64, hash: Digest256, sig: ValidatorSignature) {
        let node = &self.nodes[n];
        let Some(p) = &node.pending else {
            self.metrics.stale_messages += 1;
            return;
        };
        if p.block.number != number || p.block.block_hash != hash {
            self.metrics.stale_messages += 1;
            return;
        }
        if sig.validator != self.nodes[from].did || check_signature(&hash, &sig, &self.consensus, &node.registry).is_err() {
            bump(&mut self.metrics.blocks_refused, "BadVote");
            return;
        }
        let threshold = self.consensus.threshold();
        let p = self.nodes[n].pending.as_mut().expect("checked above");
        p.votes.insert(sig.validator.clone(), sig);
        if p.votes.len() >= threshold {
            self.finish_proposal(n);
        }
    }

    fn finish_proposal(&mut self, n: usize) {
        let Some(p) = self.nodes[n].pending.take() else { return };
        let mut block = p.block;
        block.validator_signatures = p.votes.into_values().collect();
        let peers: Vec<usize> = self.nodes[n].peers.keys().copied().collect();
        for peer in peers {
            self.send(n, peer, &Msg::Commit(block.clone()));
        }
        self.apply_commit(n, block);
    }

    fn on_commit(&mut self, n: usize, from: usize, block: Block) {
        let tip = self.nodes[n].chain.len() as u64;
        if block.number < tip {
            return;
        }
        if block.number > tip {
            self.nodes[n].deferred.push((from, Msg::Commit(block)));
            return;
        }
        let node = &self.nodes[n];
        let res = check_body(&block, node.chain.last(), &node.verifier, &node.registry, &self.writers, &node.finalized)
            .and_then(|_| check_signatures(&block, &self.consensus, &node.registry));
        match res {
            Ok(()) => self.apply_commit(n, block),
            Err(e) => bump(&mut self.metrics.blocks_refused, e.code()),
        }
    }

    fn apply_commit(&mut self, n: usize, block: Block) {
        let node = &mut self.nodes[n];
        let hashes: Vec<Digest256> = block.transactions.iter().map(|t| t.hash()).collect();
        for h in &hashes {
            node.finalized.insert(*h);
            node.pool.mark_seen(*h);
        }
        node.pool.remove_finalized(hashes.iter());
        if node.pending.as_ref().is_some_and(|p| p.block.number <= block.number) {
            node.pending = None;
        }
        node.chain.push(block);
        let deferred = std::mem::take(&mut node.deferred);
        for (from, msg) in deferred {
            self.handle(n, from, msg);
        }
    }

    fn tick(&mut self) {
        let validators: Vec<usize> = self.nodes.iter().filter(|n| n.role == NodeRole::Validator).map(|n| n.id).collect();
        for v in validators {
            let node = &self.nodes[v];
            let next = node.chain.len() as u64;
            if self.consensus.proposer(next) != &node.did || node.pending.is_some() || node.voted.contains(&next) {
                continue;
            }
            let txs: Vec<MetaTransaction> = node.pool.iter().take(self.config.max_block_txs).cloned().collect();
            if txs.is_empty() {
                continue;
            }
            let prev = node.chain.last().map_or(Digest256([0; 32]), |b| b.block_hash);
            let nonce = self.rand_u64();
            let block = Block::assemble(next, nonce, prev, txs);
            let own = self.sign_block(v, &block);
            let node = &mut self.nodes[v];
            node.voted.insert(next);
            node.pending = Some(Pending {
                block: block.clone(),
                votes: BTreeMap::from([(own.validator.clone(), own)]),
            });
            if self.consensus.threshold() <= 1 {
                self.finish_proposal(v);
                continue;
            }
            let others: Vec<usize> = self
                .nodes
                .iter()
                .filter(|o| o.id != v && o.role == NodeRole::Validator)
                .map(|o| o.id)
                .collect();
            for o in others {
                self.send(v, o, &Msg::Proposal(block.clone()));
            }
        }
        let busy = !self.queue.is_empty() || self.nodes.iter().any(|n| !n.byzantine && !n.pool.is_empty());
        if busy {
            let at = self.now + TICK_MS;
            self.schedule(at, Event::Tick);
        }
    }

    fn attack(&mut self, attack: Attack) {
        let now = self.now_secs();
        match attack {
            Attack::Impersonate { target, victim } | Attack::RogueCa { target, victim } => {
                let mut cfg = self.nodes[victim].tunnel.clone();
                cfg.falcon = self.adversary_falcon.clone();
                if matches!(attack, Attack::RogueCa { .. }) {
                    cfg.certificate = self.rogue_cert(victim);
                }
                let mut log = WireLog::new();
                let mut link = Link::new(&mut log);
                let target_node = &mut self.nodes[target];
                let res = handshake(&cfg, &target_node.tunnel, &mut link, &mut self.rng, &mut target_node.rng, now);
                match res {
                    Err(e) => bump(&mut self.metrics.handshake_failures, e.code()),
                    Ok(_) => {
                        self.metrics.adversary.rogue_sessions += 1;
                        let block = self.forged_block(target);
                        self.on_commit(target, victim, block);
                    }
                }
            }
            Attack::InjectRecord { target, claimed } => {
                let block = self.forged_block(target);
                let plain = Msg::Commit(block).encode();
                let seq = self.nodes[target].peers.get(&claimed).map_or(0, TunnelSession::recv_seq);
                let mut ciphertext = vec![0u8; plain.len()];
                self.rng.fill_bytes(&mut ciphertext);
                let mut tag = [0u8; 16];
                self.rng.fill_bytes(&mut tag);
                let record = TunnelRecord { seq, ciphertext, tag }.encode();
                if let Some(msg) = self.receive(claimed, target, &record) {
                    self.handle(target, claimed, msg);
                }
            }
            Attack::ByzantineProposal { proposer, tx } => {
                let node = &self.nodes[proposer];
                let (number, prev) = node.chain.last().map_or((0, Digest256([0; 32])), |b| (b.number + 1, b.block_hash));
                let nonce = self.rand_u64();
                let mut block = Block::assemble(number, nonce, prev, vec![*tx]);
                let own = self.sign_block(proposer, &block);
                block.validator_signatures.push(own);
                self.adversarial_blocks.insert(block.block_hash);
                self.metrics.adversary.injected_blocks += 1;
                let peers: Vec<usize> = self.nodes[proposer].peers.keys().copied().collect();
                for p in peers {
                    if self.nodes[p].role == NodeRole::Validator {
                        self.send(proposer, p, &Msg::Proposal(block.clone()));
                    }
                    self.send(proposer, p, &Msg::Commit(block.clone()));
                }
            }
        }
    }

    fn finish_metrics(&mut self) {
        let honest: Vec<&SimNode> = self.nodes.iter().filter(|n| !n.byzantine).collect();
        let Some(reference) = honest.first() else { return };
        let snapshot = chain_snapshot(&reference.chain);
        self.metrics.chains_consistent = honest.iter().all(|n| chain_snapshot(&n.chain) == snapshot);
        self.metrics.blocks_finalized = reference.chain.len() as u64;
        self.metrics.txs_finalized = reference.chain.iter().map(|b| b.transactions.len() as u64).sum();
        self.metrics.honest_txs_finalized = reference
            .chain
            .iter()
            .flat_map(|b| &b.transactions)
            .filter(|t| self.honest.contains(&t.hash()))
            .count() as u64;
        self.metrics.chain_head = reference.chain.last().map(|b| b.block_hash.to_hex()).unwrap_or_default();

        let mut adv_txs = HashSet::new();
        let mut adv_blocks = HashSet::new();
        let mut dup = 0;
        let mut in_pools = 0;
        for n in &honest {
            let mut seen = HashSet::new();
            for b in &n.chain {
                if self.adversarial_blocks.contains(&b.block_hash) {
                    adv_blocks.insert(b.block_hash);
                }
                for t in &b.transactions {
                    let h = t.hash();
                    if self.adversarial_txs.contains(&h) || self.adversarial_inner.contains(&t.inner.tx.signing_hash()) {
                        adv_txs.insert(h);
                    }
                    if !seen.insert(h) {
                        dup += 1;
                    }
                }
            }
            in_pools += n
                .pool
                .iter()
                .filter(|t| self.adversarial_txs.contains(&t.hash()) || self.adversarial_inner.contains(&t.inner.tx.signing_hash()))
                .count() as u64;
        }
        let a = &mut self.metrics.adversary;
        a.adversarial_txs_finalized = adv_txs.len() as u64;
        a.adversarial_blocks_finalized = adv_blocks.len() as u64;
        a.duplicate_finalizations = dup;
        a.adversarial_txs_in_pools = in_pools;
    }
}
