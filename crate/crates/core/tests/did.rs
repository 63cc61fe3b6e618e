mod common;

use common::{Fixture, NOW};
use pqchain_core::did::*;
use pqchain_crypto::ecdsa::EcdsaKeyPair;
use pqchain_crypto::Digest256;
use proptest::prelude::*;

#[test]
fn parse_accepts_canonical_form_only() {
    let good = "did:lac:00112233445566778899aabbccddeeff00112233";
    let did = Did::parse(good).unwrap();
    assert_eq!(did.as_str(), good);
    assert_eq!(did.method(), "lac");
    assert_eq!(Did::from_address(&did.address()).as_str().len(), good.len());
    for bad in [
        "",
        "did:lac",
        "did::00112233445566778899aabbccddeeff00112233",
        "did:lac:00112233445566778899AABBCCDDEEFF00112233",
        "did:lac:0011",
        "did:lac:00112233445566778899aabbccddeeff00112233:x",
        "uri:lac:00112233445566778899aabbccddeeff00112233",
    ] {
        assert_eq!(Did::parse(bad).unwrap_err().code(), "MalformedDid", "{bad}");
    }
}

#[test]
fn controls_outcomes() {
    let mut fx = Fixture::new(b"did-controls");
    let alice = fx.enroll("alice");
    assert_eq!(fx.registry.controls(alice.ecdsa.public(), &alice.did), Control::Granted);

    let bob = EcdsaKeyPair::generate(&mut fx.rng);
    assert_eq!(fx.registry.controls(bob.public(), &alice.did), Control::AddressMismatch);

    let stranger = fx.unregistered();
    assert_eq!(fx.registry.controls(stranger.ecdsa.public(), &stranger.did), Control::NotFound);
    assert_eq!(fx.registry.resolve(&stranger.did).unwrap_err().code(), "NotFound");

    // Same address, different registered key: forge a replica that holds a
    // record under alice's DID with some other key.
    let mut record = fx.registry.resolve(&alice.did).unwrap().clone();
    record.eth_public_key = *bob.public();
    let mut forged = Registry::new(fx.ca.did().clone());
    forged.register(fx.ca.did(), record).unwrap();
    assert_eq!(forged.controls(alice.ecdsa.public(), &alice.did), Control::KeyMismatch);
}

#[test]
fn only_ca_writes_and_records_are_append_only() {
    let mut fx = Fixture::new(b"did-append");
    let alice = fx.enroll("alice");
    let record = fx.registry.resolve(&alice.did).unwrap().clone();
    let before = fx.registry.state_hash();

    assert_eq!(fx.registry.register(&alice.did, record.clone()).unwrap_err().code(), "Unauthorized");

    let mut changed = record.clone();
    changed.falcon_public_key = fx.unregistered().falcon.public;
    assert_eq!(fx.registry.register(fx.ca.did(), changed).unwrap_err().code(), "DuplicateDid");

    let mut later = record.clone();
    later.registered_at = NOW + 99;
    assert!(!fx.registry.register(fx.ca.did(), later).unwrap().created);
    assert_eq!(fx.registry.state_hash(), before);
}

#[test]
fn snapshot_replays_to_same_state() {
    let mut fx = Fixture::new(b"did-snapshot");
    let mut hashes = vec![fx.registry.state_hash()];
    for cn in ["a", "b", "c"] {
        fx.enroll(cn);
        hashes.push(fx.registry.state_hash());
    }
    hashes.dedup();
    assert_eq!(hashes.len(), 4);
    let text = fx.registry.snapshot();
    let replica = Registry::from_snapshot(fx.ca.did().clone(), &text).unwrap();
    assert_eq!(replica, fx.registry);
    assert_eq!(replica.state_hash(), fx.registry.state_hash());

    let dup = format!("{text}{}", text.lines().next().unwrap());
    assert!(Registry::from_snapshot(fx.ca.did().clone(), &dup).is_err());
}

#[test]
fn record_codec_round_trip() {
    let mut fx = Fixture::new(b"did-codec");
    let alice = fx.enroll("alice");
    let record = fx.registry.resolve(&alice.did).unwrap();
    assert_eq!(DidRecord::decode(&record.encode()).unwrap(), *record);
    assert_ne!(record.subject_proof, Digest256([0; 32]));
}

proptest! {
    #[test]
    fn address_dids_always_parse(addr in any::<[u8; 20]>()) {
        let did = Did::from_address(&pqchain_crypto::ecdsa::Address(addr));
        prop_assert_eq!(Did::parse(did.as_str()).unwrap().address().0, addr);
    }

    #[test]
    fn arbitrary_strings_never_panic(s in ".{0,80}") {
        let _ = Did::parse(&s);
    }
}
