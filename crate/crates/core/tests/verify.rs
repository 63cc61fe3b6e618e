mod common;

use std::sync::Arc;

use common::Fixture;
use pqchain_core::verify::*;
use pqchain_crypto::falcon::{self, SignatureEncoding};
use pqchain_crypto::ShakeStream;
use serde_json::Value;

const BACKENDS: [Backend; 3] = [
    Backend::Metered,
    Backend::NativeFast(Charging::OpcodeFlat),
    Backend::NativeFast(Charging::PrecompileTable),
];

#[test]
fn backends_agree_on_verdicts() {
    let mut fx = Fixture::new(b"verify-backends");
    let w = fx.enroll("writer");
    let good = fx.metatx(&w, 0);
    let mut bad = good.clone();
    bad.inner.tx.nonce += 1;
    let bad = pqchain_core::metatx::wrap(bad.inner, &w.did, bad.falcon_signature, &w.ecdsa, fx.hub, &Fixture::params(0));
    for meta in [&good, &bad] {
        let decisions: Vec<_> = BACKENDS
            .iter()
            .map(|b| Verifier::new(fx.hub, *b).verify(&meta.wrapper, &fx.registry))
            .collect();
        assert!(decisions.iter().all(|d| d.verdict == decisions[0].verdict && d.reason == decisions[0].reason));
    }
    let flat = Verifier::new(fx.hub, BACKENDS[1]).verify(&good.wrapper, &fx.registry);
    assert_eq!(flat.gas_metered, 1);
    let metered = Verifier::new(fx.hub, BACKENDS[0]).verify(&good.wrapper, &fx.registry);
    assert!(metered.gas_metered > 0);
}

#[test]
fn precompile_charge_is_linear_in_input() {
    let mut rng = ShakeStream::new(b"precompile");
    let kp = falcon::keygen(&mut rng).unwrap();
    let model = GasModel::default();
    let points: Vec<(f64, f64)> = [64usize, 256, 1024]
        .iter()
        .map(|&n| {
            let msg = vec![0x5a; n];
            let sig = falcon::sign(&msg, &kp.secret, &mut rng, SignatureEncoding::Padded).unwrap();
            let (ok, gas) = native_fast_verify(&msg, &sig, &kp.public, Charging::PrecompileTable, &model);
            assert!(ok);
            (n as f64, gas as f64)
        })
        .collect();
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let s1 = slope(points[0], points[1]);
    let s2 = slope(points[1], points[2]);
    assert!((s1 - s2).abs() < 1e-9, "{s1} vs {s2}");
    assert!((s1 - model.precompile_per_word as f64 / 32.0).abs() < 1e-9);
}

#[test]
fn decisions_are_deterministic() {
    let mut fx = Fixture::new(b"verify-det");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    for b in BACKENDS {
        let first = Verifier::new(fx.hub, b).verify(&meta.wrapper, &fx.registry);
        for _ in 0..3 {
            assert_eq!(Verifier::new(fx.hub, b).verify(&meta.wrapper, &fx.registry), first);
        }
    }
}

#[test]
fn failing_step_short_circuits() {
    let mut fx = Fixture::new(b"verify-steps");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let v = Verifier::new(fx.hub, Backend::Metered);
    let mut w1 = meta.wrapper.clone();
    w1.tx.gas_limit += 1;
    v.verify(&w1, &fx.registry);
    assert_eq!(v.counters(), StepCounts { entry: 1, step1: 1, step2: 0, step3: 0 });
    v.verify(&meta.wrapper, &fx.registry);
    assert_eq!(v.counters(), StepCounts { entry: 2, step1: 2, step2: 1, step3: 1 });
}

#[test]
fn policy_predicates() {
    let mut fx = Fixture::new(b"verify-policy");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let mut v = Verifier::new(fx.hub, Backend::NativeFast(Charging::OpcodeFlat));
    v.policy = Policy::default().with("small-payload", Arc::new(|p: &PermissionParams| p.payload.len() < 16));
    let d = v.verify(&meta.wrapper, &fx.registry);
    assert_eq!(d.reason, Some(RejectReason::PolicyDenied));
    assert_eq!(v.counters().step1, 0);
    v.policy = Policy::default().with("any", Arc::new(|_: &PermissionParams| true));
    assert!(v.verify(&meta.wrapper, &fx.registry).is_admit());
}

#[test]
fn pool_deduplicates_and_drops_rejects() {
    let mut fx = Fixture::new(b"verify-pool");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let v = Verifier::new(fx.hub, Backend::NativeFast(Charging::OpcodeFlat));
    let d = v.verify(&meta.wrapper, &fx.registry);
    let mut pool = Pool::default();
    assert_eq!(gate_and_propagate(&mut pool, &meta, &d), PoolAction::Inserted);
    assert_eq!(gate_and_propagate(&mut pool, &meta, &d), PoolAction::Duplicate);
    assert_eq!(pool.len(), 1);
    pool.remove_finalized([&meta.hash()]);
    assert!(pool.is_empty());
    assert_eq!(gate_and_propagate(&mut pool, &meta, &d), PoolAction::Duplicate);

    let mut other = fx.metatx(&w, 1);
    other.wrapper.tx.to = None;
    let d = v.verify(&other.wrapper, &fx.registry);
    assert_eq!(gate_and_propagate(&mut pool, &other, &d), PoolAction::Dropped(RejectReason::NotRelayHub));
}

#[test]
fn decision_log_is_jsonl() {
    let mut fx = Fixture::new(b"verify-log");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let v = Verifier::new(fx.hub, Backend::Metered);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decisions.jsonl");
    let (d, t) = v.verify_timed(&meta.wrapper, &fx.registry);
    append_decision(&path, &meta.hash(), &d, &t).unwrap();
    let mut bad = meta.wrapper.clone();
    bad.tx.nonce += 1;
    let (d2, t2) = v.verify_timed(&bad, &fx.registry);
    append_decision(&path, &bad.hash(), &d2, &t2).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["verdict"], "Admit");
    assert_eq!(lines[0]["reason"], Value::Null);
    assert_eq!(lines[0]["gas"], d.gas_metered);
    assert_eq!(lines[1]["verdict"], "Reject");
    assert_eq!(lines[1]["reason"], "SenderControlFailed");
    assert_eq!(lines[1]["step_timings_us"].as_array().unwrap().len(), 4);
}

#[test]
fn bench_csv_layout() {
    let csv = bench_csv(&[
        BenchRow { vector: 0, message_len: 33, accepted: true, gas: 120_000 },
        BenchRow { vector: 1, message_len: 66, accepted: false, gas: 0 },
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "vector,message_len,verdict,gas,block_limit_ratio");
    assert_eq!(lines[1], "0,33,accept,120000,0.010000");
    assert_eq!(lines[2], "1,66,reject,0,0.000000");
}

#[test]
fn gas_model_overrides() {
    let mut m = GasModel::default();
    m.set("field_mul", 9).unwrap();
    assert_eq!(m.field_mul, 9);
    assert!(m.set("nope", 1).is_err());
    assert_eq!(m.block_gas_limit(), BLOCK_GAS_LIMIT);
    assert_eq!("metered".parse::<Backend>().unwrap(), Backend::Metered);
    assert!("fast?".parse::<Backend>().is_err());
}
