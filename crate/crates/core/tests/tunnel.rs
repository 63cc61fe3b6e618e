mod common;

use common::{Fixture, Identity, NOW};
use pqchain_core::cert::{CertificateAuthority, PqCertificate};
use pqchain_core::tunnel::*;
use pqchain_core::wire::{Link, WireLog};
use pqchain_crypto::{falcon, ShakeStream};
use proptest::prelude::*;

struct Pair {
    fx: Fixture,
    a: TunnelConfig,
    b: TunnelConfig,
}

fn config(fx: &Fixture, id: &Identity, allow: &[&Identity]) -> TunnelConfig {
    TunnelConfig::new(
        id.certificate.clone().unwrap(),
        id.falcon.clone(),
        fx.ca.did().clone(),
        fx.ca.falcon_public().clone(),
        allow.iter().map(|i| i.did.clone()),
    )
}

fn pair(seed: &[u8]) -> Pair {
    let mut fx = Fixture::new(seed);
    let alice = fx.enroll("alice");
    let bob = fx.enroll("bob");
    let a = config(&fx, &alice, &[&bob]);
    let b = config(&fx, &bob, &[&alice]);
    Pair { fx, a, b }
}

fn connect(p: &Pair, log: &mut WireLog) -> Result<(TunnelSession, TunnelSession), TunnelError> {
    let mut link = Link::new(log);
    handshake(&p.a, &p.b, &mut link, &mut ShakeStream::new(b"i"), &mut ShakeStream::new(b"r"), NOW)
}

#[test]
fn thousand_messages_round_trip_in_order() {
    let p = pair(b"tunnel-1000");
    let (mut a, mut b) = connect(&p, &mut WireLog::new()).unwrap();
    assert!(a.pairs_with(&b));
    assert_eq!(a.peer_did(), p.b.did());
    for i in 0..1000u32 {
        let msg = i.to_be_bytes().repeat((i % 7 + 1) as usize);
        let rec = a.seal(&msg).unwrap();
        assert_eq!(rec.seq, i as u64);
        assert_eq!(b.open_bytes(&rec.encode()).unwrap(), msg);
        let back = b.seal(&msg).unwrap();
        assert_eq!(a.open(&back).unwrap(), msg);
    }
    assert_eq!((a.send_seq(), b.recv_seq()), (1000, 1000));
}

#[test]
fn replay_and_reorder_rejected() {
    let p = pair(b"tunnel-replay");
    let (mut a, mut b) = connect(&p, &mut WireLog::new()).unwrap();
    let r0 = a.seal(b"zero").unwrap();
    let r1 = a.seal(b"one").unwrap();
    assert_eq!(b.open(&r1).unwrap_err().code(), "ReplayOrReorder");
    b.open(&r0).unwrap();
    assert_eq!(b.open(&r0).unwrap_err().code(), "ReplayOrReorder");
    b.open(&r1).unwrap();
}

#[test]
fn bit_flip_fails_tag_and_closes() {
    let p = pair(b"tunnel-flip");
    let (mut a, mut b) = connect(&p, &mut WireLog::new()).unwrap();
    let mut rec = a.seal(b"payload").unwrap();
    rec.ciphertext[0] ^= 1;
    assert_eq!(b.open(&rec).unwrap_err().code(), "TagInvalid");
    assert!(!b.is_open());
    let next = a.seal(b"more").unwrap();
    assert_eq!(b.open(&next).unwrap_err().code(), "SessionClosed");
}

#[test]
fn sealed_records_hide_plaintext() {
    let p = pair(b"tunnel-conf");
    let mut log = WireLog::new();
    let (mut a, _b) = connect(&p, &mut log).unwrap();
    let secret = b"attack at dawn, bring the falcon".to_vec();
    let rec = a.seal(&secret).unwrap();
    let wire = rec.encode();
    assert!(!wire.windows(16).any(|w| secret.windows(16).any(|s| s == w)));
    assert!(!log.contains(&secret[..16]));
}

#[test]
fn eavesdropper_session_cannot_open() {
    let p = pair(b"tunnel-eve");
    let (mut a, _b) = connect(&p, &mut WireLog::new()).unwrap();
    let mut link_log = WireLog::new();
    let mut link = Link::new(&mut link_log);
    let (_a2, mut b2) =
        handshake(&p.a, &p.b, &mut link, &mut ShakeStream::new(b"i2"), &mut ShakeStream::new(b"r2"), NOW).unwrap();
    let rec = a.seal(b"for the first session only").unwrap();
    assert_eq!(b2.open(&rec).unwrap_err().code(), "TagInvalid");
}

#[test]
fn peer_outside_allow_list_rejected() {
    let mut p = pair(b"tunnel-allow");
    p.b.allow_list.clear();
    assert_eq!(connect(&p, &mut WireLog::new()).unwrap_err().code(), "CertificateRejected");
}

#[test]
fn rogue_ca_certificate_rejected() {
    let mut p = pair(b"tunnel-rogue");
    let mallory = p.fx.unregistered();
    let rogue_falcon = falcon::keygen(&mut p.fx.rng).unwrap();
    let rogue = CertificateAuthority::new(p.fx.ca_eth.public(), rogue_falcon.clone(), vec![]);
    // Same issuer DID as the real CA, signed with the wrong key.
    let mut cert: PqCertificate = p.a.certificate.clone();
    cert.subject.did = mallory.did.clone();
    cert.eth_public_key = *mallory.ecdsa.public();
    cert.falcon_public_key = mallory.falcon.public.clone();
    cert.issuer_did = rogue.did().clone();
    cert.ca_falcon_signature = falcon::sign(
        &cert.to_be_signed(),
        &rogue_falcon.secret,
        &mut p.fx.rng,
        falcon::SignatureEncoding::Padded,
    )
    .unwrap();
    p.b.allow_list.insert(mallory.did.clone());
    let mut evil = p.a.clone();
    evil.certificate = cert;
    evil.falcon = mallory.falcon;
    let mut link_log = WireLog::new();
    let mut link = Link::new(&mut link_log);
    let err = handshake(&evil, &p.b, &mut link, &mut ShakeStream::new(b"i"), &mut ShakeStream::new(b"r"), NOW).unwrap_err();
    assert_eq!(err.code(), "CertificateRejected");
}

#[test]
fn stolen_certificate_without_key_fails() {
    let mut p = pair(b"tunnel-stolen");
    let mut evil = p.a.clone();
    evil.falcon = falcon::keygen(&mut p.fx.rng).unwrap();
    let mut log = WireLog::new();
    let mut link = Link::new(&mut log);
    let err = handshake(&evil, &p.b, &mut link, &mut ShakeStream::new(b"i"), &mut ShakeStream::new(b"r"), NOW).unwrap_err();
    assert_eq!(err.code(), "SignatureInvalid");
}

#[test]
fn stale_handshake_times_out() {
    let p = pair(b"tunnel-timeout");
    let mut rng_i = ShakeStream::new(b"i");
    let mut rng_r = ShakeStream::new(b"r");
    let (hello, m1) = initiate(&p.a, &mut rng_i, NOW);
    let (_r, m2) = respond(&p.b, &m1, &mut rng_r, NOW).unwrap();
    let late = NOW + p.a.handshake_timeout + 1;
    assert_eq!(hello.on_response(&m2, &mut rng_i, late).err().unwrap().code(), "Timeout");
}

#[test]
fn record_codec_rejects_bad_lengths() {
    let rec = TunnelRecord {
        seq: 9,
        ciphertext: vec![1, 2, 3],
        tag: [7; 16],
    };
    let bytes = rec.encode();
    assert_eq!(TunnelRecord::decode(&bytes).unwrap(), rec);
    assert!(TunnelRecord::decode(&bytes[..bytes.len() - 1]).is_err());
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(TunnelRecord::decode(&longer).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn opaque_payloads_round_trip(msgs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..512), 1..8)) {
        let p = pair(b"tunnel-prop");
        let (mut a, mut b) = connect(&p, &mut WireLog::new()).unwrap();
        for m in &msgs {
            let rec = a.seal(m).unwrap();
            prop_assert_eq!(rec.ciphertext.len(), m.len());
            prop_assert_eq!(&b.open(&rec).unwrap(), m);
        }
    }
}
