mod common;

use std::collections::HashSet;

use common::NOW;
use pqchain_core::entropy::*;
use pqchain_core::wire::{kind, Link, WireLog};
use pqchain_crypto::{KemAlgorithm, RandomSource, ShakeStream};
use proptest::prelude::*;

struct FixedByte(u8);

impl RandomSource for FixedByte {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        dest.fill(self.0);
    }
}

fn service(seed: &[u8]) -> EntropyService {
    EntropyService::new(EntropySource::seeded("qrng-test", seed))
}

#[test]
fn split_worked_example() {
    let shares = xor_split(&[0xAA], 2, &mut FixedByte(0x3C)).unwrap();
    assert_eq!(shares, vec![vec![0x3C], vec![0x96]]);
}

#[test]
fn split_preconditions() {
    let mut rng = ShakeStream::new(b"s");
    let id = [7u8; SESSION_ID_LEN];
    assert_eq!(split_bootstrap_key(&[1; 32], 1, id, NOW, &mut rng), Err(EntropyError::TooFewShares));
    assert_eq!(split_bootstrap_key(&[1; 31], 3, id, NOW, &mut rng), Err(EntropyError::KeyTooShort));
    let shares = split_bootstrap_key(&[1; 32], 3, id, NOW, &mut rng).unwrap();
    assert!(shares.iter().enumerate().all(|(i, s)| s.index as usize == i + 1 && s.total == 3 && s.share.len() == 32));
}

#[test]
fn seeded_source_is_replayable_and_sequenced() {
    let mut a = EntropySource::seeded("a", b"seed");
    let mut b = EntropySource::seeded("a", b"seed");
    let x = a.generate(64).unwrap();
    assert_eq!(x, b.generate(64).unwrap());
    let y = a.generate(64).unwrap();
    assert!(y.sequence > x.sequence);
    assert_ne!(x.bytes, y.bytes);
    assert_eq!(a.generate(0), Err(EntropyError::ZeroLength));
}

#[test]
fn monobit_within_three_sigma() {
    let mut src = EntropySource::seeded("mono", b"monobit");
    let block = src.generate(1 << 20).unwrap();
    let ones: u64 = block.bytes.iter().map(|b| b.count_ones() as u64).sum();
    let n = (block.bytes.len() * 8) as f64;
    let sigma = (n * 0.25).sqrt();
    assert!((ones as f64 - n / 2.0).abs() < 3.0 * sigma, "ones = {ones}");
}

#[test]
fn live_source_yields_bytes() {
    let mut src = EntropySource::live("os", true);
    let block = src.generate(32).unwrap();
    assert!(block.certified);
    assert_eq!(block.bytes.len(), 32);
}

#[test]
fn recompose_errors() {
    let mut svc = service(b"recompose").with_shares(3);
    let a = svc.issue_bootstrap("a", NOW).unwrap();
    let b = svc.issue_bootstrap("b", NOW).unwrap();
    let mut r = Recomposer::new();
    assert_eq!(r.recompose(&a[..2], NOW).err().unwrap().code(), "MissingShare");
    let mixed = vec![a[0].clone(), a[1].clone(), b[2].clone()];
    assert_eq!(r.recompose(&mixed, NOW).err().unwrap().code(), "MixedSession");
    let dup = vec![a[0].clone(), a[0].clone(), a[1].clone()];
    assert_eq!(r.recompose(&dup, NOW).err().unwrap().code(), "MissingShare");
    let mut late = a.clone();
    late[1].expires_at = NOW;
    assert_eq!(r.recompose(&late, NOW).err().unwrap().code(), "Expired");
    // Failed attempts do not burn the session.
    let key = r.recompose(&a, NOW).unwrap();
    assert_eq!(key.as_bytes().len() >= MIN_BOOTSTRAP_KEY_LEN, true);
    assert_eq!(r.recompose(&a, NOW).err().unwrap().code(), "ReusedKey");
}

fn established(svc: &mut EntropyService, log: &mut WireLog, node: &str, kem: KemAlgorithm) -> EntropySession {
    let mut link = Link::new(log);
    let shares = svc.issue_bootstrap(node, NOW).unwrap();
    let shares = deliver_shares(&mut link, &shares).unwrap();
    let mut rng = ShakeStream::new(node.as_bytes());
    establish_entropy_session(node, &shares, &mut Recomposer::new(), svc, &mut link, kem, &mut rng, NOW).unwrap()
}

#[test]
fn honest_session_agrees_and_discards_bootstrap_key() {
    for kem in KemAlgorithm::ALL {
        let mut svc = service(b"honest");
        let mut log = WireLog::new();
        let session = established(&mut svc, &mut log, "n", kem);
        assert_eq!(session.state(), SessionState::Established);
        assert!(session.bootstrap_key_discarded());
        assert!(!svc.holds_bootstrap_key(&session.session_id));
        assert_eq!(
            svc.session_secret(&session.session_id).unwrap().as_bytes(),
            session.shared_secret().unwrap().as_bytes()
        );
    }
}

#[test]
fn counters_and_distinct_streams() {
    let mut svc = service(b"counters");
    let mut log = WireLog::new();
    let mut s = established(&mut svc, &mut log, "n", KemAlgorithm::MlKem768);
    let mut link = Link::new(&mut log);
    let mut seen = HashSet::new();
    for i in 0..5u64 {
        assert_eq!(s.send_counter(), i);
        let bytes = request_entropy(&mut s, &mut svc, &mut link, 48).unwrap();
        assert!(seen.insert(bytes));
        assert_eq!(s.recv_counter(), i + 1);
    }
    assert_eq!(request_entropy(&mut s, &mut svc, &mut link, 0).err().unwrap().code(), "ZeroLength");
    s.close();
    assert_eq!(
        request_entropy(&mut s, &mut svc, &mut link, 8).err().unwrap().code(),
        "SessionNotEstablished"
    );
}

#[test]
fn counter_exhaustion_closes() {
    let mut svc = service(b"exhaust");
    let mut log = WireLog::new();
    let mut s = established(&mut svc, &mut log, "n", KemAlgorithm::MlKem768);
    s.set_max_counter(2);
    let mut link = Link::new(&mut log);
    request_entropy(&mut s, &mut svc, &mut link, 8).unwrap();
    request_entropy(&mut s, &mut svc, &mut link, 8).unwrap();
    assert!(request_entropy(&mut s, &mut svc, &mut link, 8).is_err());
    assert_eq!(s.state(), SessionState::Closed);
}

#[test]
fn delivered_entropy_never_repeats_across_sessions() {
    let mut svc = service(b"reuse");
    let mut log = WireLog::new();
    let mut blocks = HashSet::new();
    for n in 0..3 {
        let mut s = established(&mut svc, &mut log, &format!("n{n}"), KemAlgorithm::MlKem768);
        let mut link = Link::new(&mut log);
        for _ in 0..4 {
            assert!(blocks.insert(request_entropy(&mut s, &mut svc, &mut link, 32).unwrap()));
        }
    }
    assert_eq!(svc.delivered_blocks(), 12);
}

#[test]
fn replayed_auth_is_detected() {
    let mut svc = service(b"replay");
    let mut log = WireLog::new();
    let mut captured = Vec::new();
    let mut tap = |_: &str, bytes: &mut Vec<u8>| {
        if bytes[4] == kind::AUTH {
            captured.push(bytes.clone());
        }
    };
    let mut link = Link::with_tap(&mut log, &mut tap);
    let shares = deliver_shares(&mut link, &svc.issue_bootstrap("n", NOW).unwrap()).unwrap();
    let mut rng = ShakeStream::new(b"n");
    establish_entropy_session("n", &shares, &mut Recomposer::new(), &mut svc, &mut link, KemAlgorithm::MlKem768, &mut rng, NOW)
        .unwrap();
    drop(link);
    let frame = pqchain_core::wire::Frame::decode(&captured[0]).unwrap();
    let err = svc.handle_auth(&frame, NOW).unwrap_err();
    assert_eq!(err.code(), "ReplayDetected");
}

#[test]
fn recorded_entropy_response_replay_rejected() {
    let mut svc = service(b"resp-replay");
    let mut log = WireLog::new();
    let mut s = established(&mut svc, &mut log, "n", KemAlgorithm::MlKem768);
    let req = s.request_frame(16).unwrap();
    let resp = svc.handle_request(&req).unwrap();
    s.handle_response(&resp).unwrap();
    assert!(s.handle_response(&resp).is_err());
}

#[test]
fn tampered_kem_ciphertext_fails_confirmation() {
    for kem in KemAlgorithm::ALL {
        let mut svc = service(b"tamper");
        let mut log = WireLog::new();
        let mut tap = |_: &str, bytes: &mut Vec<u8>| {
            if bytes[4] == kind::KEM_CT {
                // Inside the ciphertext, ahead of the trailing confirmation tag.
                let at = bytes.len() - 48;
                bytes[at] ^= 0x01;
            }
        };
        let mut link = Link::with_tap(&mut log, &mut tap);
        let shares = deliver_shares(&mut link, &svc.issue_bootstrap("n", NOW).unwrap()).unwrap();
        let mut rng = ShakeStream::new(b"n");
        let err = establish_entropy_session("n", &shares, &mut Recomposer::new(), &mut svc, &mut link, kem, &mut rng, NOW)
            .err()
            .unwrap();
        assert_eq!(err.code(), "ConfirmationMismatch", "{kem:?}");
    }
}

#[test]
fn wrong_bootstrap_key_fails_auth() {
    let mut svc = service(b"auth");
    let shares = svc.issue_bootstrap("n", NOW).unwrap();
    let mut forged = shares.clone();
    forged[0].share[0] ^= 1;
    let mut log = WireLog::new();
    let mut link = Link::new(&mut log);
    let mut rng = ShakeStream::new(b"n");
    let err = establish_entropy_session("n", &forged, &mut Recomposer::new(), &mut svc, &mut link, KemAlgorithm::MlKem768, &mut rng, NOW)
        .err()
        .unwrap();
    assert_eq!(err.code(), "AuthFailure");
}

#[test]
fn late_authentication_times_out() {
    let mut svc = service(b"timeout").with_timeout(30);
    let shares = svc.issue_bootstrap("n", NOW).unwrap();
    let key = Recomposer::new().recompose(&shares, NOW + 5).unwrap();
    let mut rng = ShakeStream::new(b"n");
    let (_session, auth) = EntropySession::begin("n", key, KemAlgorithm::MlKem768, &mut rng).unwrap();
    assert_eq!(svc.handle_auth(&auth, NOW + 31).unwrap_err().code(), "Timeout");
}

#[test]
fn share_encoding_round_trip() {
    let mut svc = service(b"enc");
    for s in svc.issue_bootstrap("n", NOW).unwrap() {
        assert_eq!(BootstrapShare::decode(&s.encode()).unwrap(), s);
        let mut longer = s.encode();
        longer.push(0);
        assert!(BootstrapShare::decode(&longer).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn xor_split_reconstructs(key in proptest::collection::vec(any::<u8>(), 1..96), n in 2usize..6, seed in any::<u64>()) {
        let mut rng = ShakeStream::new(&seed.to_be_bytes());
        let shares = xor_split(&key, n, &mut rng).unwrap();
        prop_assert_eq!(shares.len(), n);
        prop_assert!(shares.iter().all(|s| s.len() == key.len()));
        prop_assert_eq!(xor_combine(shares.iter().map(Vec::as_slice)), key);
    }

    #[test]
    fn any_proper_subset_misses(n in 2usize..6, drop in 0usize..6, seed in any::<u64>()) {
        let drop = drop % n;
        let mut rng = ShakeStream::new(&seed.to_be_bytes());
        let mut shares = split_bootstrap_key(&[9u8; 32], n, [1; SESSION_ID_LEN], NOW + 10, &mut rng).unwrap();
        shares.remove(drop);
        let err = Recomposer::new().recompose(&shares, NOW).err().unwrap();
        prop_assert_eq!(err.code(), "MissingShare");
    }
}
