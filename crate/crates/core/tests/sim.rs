use std::sync::OnceLock;

use pqchain_core::sim::*;
use pqchain_crypto::KemAlgorithm;

fn base() -> &'static Simulation {
    static BASE: OnceLock<Simulation> = OnceLock::new();
    BASE.get_or_init(|| {
        let cfg = SimConfig {
            seed: 11,
            transactions: 12,
            adversaries: Adversary::ALL.into_iter().collect(),
            entropy_kem: KemAlgorithm::MlKem768,
            ..SimConfig::default()
        };
        spawn_network(&cfg).unwrap()
    })
}

/// A fork with only the given adversaries enabled.
fn fork_with(seed: u64, adversaries: &[Adversary]) -> Simulation {
    let mut s = base().fork(seed);
    let mut cfg = s.config().clone();
    cfg.adversaries = adversaries.iter().copied().collect();
    s.set_config(cfg).unwrap();
    s
}

fn role_index(s: &Simulation, role: NodeRole) -> usize {
    s.nodes().iter().position(|n| n.role == role).unwrap()
}

#[test]
fn threshold_is_a_strict_two_thirds_majority() {
    for v in 1..=100usize {
        let t = threshold(v);
        assert!(3 * t > 2 * v, "v={v}");
        assert!(3 * (t - 1) <= 2 * v, "v={v}");
        assert!(t <= v);
    }
}

#[test]
fn honest_run_finalizes_everything() {
    let mut s = fork_with(1, &[]);
    let m = s.run().clone();
    assert_eq!(m.outcome, RunOutcome::Quiescent);
    assert_eq!(m.submitted, 12);
    assert_eq!(m.honest_txs_finalized, 12);
    assert!(m.chains_consistent);
    for n in s.honest_nodes() {
        verify_chain(&n.chain).unwrap();
        assert!(n.pool.is_empty());
    }
    let snapshot = s.chain_snapshot(0);
    assert_eq!(decode_chain_snapshot(&snapshot).unwrap(), s.nodes()[0].chain);
}

#[test]
fn stored_chain_mutations_are_detected() {
    let mut s = fork_with(2, &[]);
    s.run();
    let chain = s.nodes()[0].chain.clone();
    assert!(chain.len() >= 2);
    let mutations: Vec<(&str, fn(&mut Block))> = vec![
        ("number", |b| b.number += 1),
        ("nonce", |b| b.nonce ^= 1),
        ("prev_hash", |b| b.prev_hash.0[0] ^= 1),
        ("tx_root", |b| b.tx_root.0[5] ^= 1),
        ("block_hash", |b| b.block_hash.0[31] ^= 1),
        ("drop tx", |b| {
            b.transactions.pop();
        }),
        ("tx bytes", |b| b.transactions[0].wrapper.tx.nonce += 1),
    ];
    for h in 0..chain.len() {
        for (name, f) in &mutations {
            let mut c = chain.clone();
            if c[h].transactions.is_empty() && name.contains("tx") {
                continue;
            }
            f(&mut c[h]);
            let (at, _) = verify_chain(&c).unwrap_err();
            assert_eq!(at, h as u64, "{name} at {h}");
        }
    }
}

#[test]
fn zero_validators_rejected() {
    let cfg = SimConfig {
        validators: 0,
        ..SimConfig::default()
    };
    assert_eq!(spawn_network(&cfg).err().unwrap().code(), "ConfigInvalid");
}

#[test]
fn unknown_scenario_rejected() {
    let mut s = base().fork(3);
    assert_eq!(s.inject_adversary_named("quantum-oracle").unwrap_err().code(), "UnknownScenario");
    s.inject_adversary_named("Replay_Metatx").unwrap();
    assert!(s.config().adversaries.contains(&Adversary::ReplayMetatx));
}

#[test]
fn config_text_parsing() {
    let cfg = SimConfig::parse("seed = 9 # inline\nvalidators = 7\nadversaries = forge-falcon, rogue-entry-point\ngas.field_mul = 4\n").unwrap();
    assert_eq!((cfg.seed, cfg.validators, cfg.gas.field_mul), (9, 7, 4));
    assert_eq!(cfg.adversaries.len(), 2);
    for bad in ["colour = red", "seed = 1\nseed = 2", "validators = 0", "seed", "gas.nope = 1", "backend = quantum"] {
        assert_eq!(SimConfig::parse(bad).unwrap_err().code(), "ConfigInvalid", "{bad}");
    }
    assert_eq!(SimConfig::parse("adversaries = nope").unwrap_err().code(), "UnknownScenario");
}

#[test]
fn non_writers_cannot_author() {
    let mut s = fork_with(4, &[]);
    let validator = role_index(&s, NodeRole::Validator);
    let observer = role_index(&s, NodeRole::Observer);
    for author in [validator, observer] {
        let meta = s.craft_metatx(author);
        s.inject_ingress(validator, &meta.raw());
    }
    assert_eq!(s.metrics().rejected_for(ROLE_NOT_PERMITTED), 2);
    assert_eq!(s.metrics().admitted, 0);
    let writer = role_index(&s, NodeRole::Writer);
    let meta = s.craft_metatx(writer);
    s.inject_ingress(validator, &meta.raw());
    assert_eq!(s.metrics().admitted, 1);
}

#[test]
fn replays_are_deduplicated() {
    let mut s = fork_with(5, &[Adversary::ReplayMetatx]);
    let m = s.run().clone();
    assert!(m.duplicates > 0);
    assert_eq!(m.adversary.duplicate_finalizations, 0);
    assert_eq!(m.honest_txs_finalized, m.submitted);
    assert!(m.chains_consistent);
}

#[test]
fn tampered_records_are_dropped_and_resent() {
    let mut s = fork_with(6, &[Adversary::TamperInFlight]);
    let mut cfg = s.config().clone();
    cfg.tamper_permille = 200;
    s.set_config(cfg).unwrap();
    let m = s.run().clone();
    assert!(m.adversary.tampered_records > 0);
    assert!(m.record_failures.get("TagInvalid").copied().unwrap_or(0) > 0);
    assert!(m.retransmissions > 0);
    assert_eq!(m.rejected_for("Malformed"), 0);
    assert_eq!(m.honest_txs_finalized, m.submitted);
    assert!(m.chains_consistent);
}

#[test]
fn forks_are_deterministic() {
    let a = base().fork(8).run().clone();
    let b = base().fork(8).run().clone();
    assert_eq!(a, b);
    assert_eq!(a.to_json_line(), b.to_json_line());
    let c = base().fork(9).run().clone();
    assert_eq!(c.seed, 9);
}

#[test]
fn adversaries_never_reach_pools_or_chain() {
    for seed in 20..23 {
        let mut s = base().fork(seed);
        let m = s.run().clone();
        let a = &m.adversary;
        assert!(a.injected_txs > 0);
        assert_eq!(a.adversarial_txs_in_pools, 0);
        assert_eq!(a.adversarial_txs_finalized, 0);
        assert_eq!(a.adversarial_blocks_finalized, 0);
        assert_eq!(a.rogue_sessions, 0);
        assert!(m.chains_consistent);
    }
}

#[test]
fn metrics_exports() {
    let m = base().fork(30).run().clone();
    let parsed: Metrics = serde_json::from_str(&m.to_json_line()).unwrap();
    assert_eq!(parsed, m);
    let csv = metrics_csv(&[m.clone(), m]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
}
