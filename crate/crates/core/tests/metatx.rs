mod common;

use common::{Fixture, CHAIN_ID, NOW};
use pqchain_core::metatx::*;
use pqchain_core::sim::InnerField;
use pqchain_core::tx::{split_v, SignedTransaction};
use pqchain_core::verify::{Backend, Charging, RejectReason, Verifier};
use pqchain_crypto::ShakeStream;
use serde_json::Value;

fn verifier(fx: &Fixture) -> Verifier {
    Verifier::new(fx.hub, Backend::NativeFast(Charging::OpcodeFlat))
}

#[test]
fn honest_metatx_is_admitted() {
    let mut fx = Fixture::new(b"mtx-admit");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    assert_eq!(meta.relay_hub, fx.hub);
    assert_eq!(meta.writer_did, w.did);
    let d = verifier(&fx).verify(&meta.wrapper, &fx.registry);
    assert!(d.is_admit(), "{d:?}");
    assert_eq!(MetaTransaction::decode_raw(&meta.raw()).unwrap(), meta);
}

#[test]
fn every_inner_field_mutation_rejected() {
    let mut fx = Fixture::new(b"mtx-sweep");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 3);
    let v = verifier(&fx);
    for field in InnerField::ALL {
        let mut inner = meta.inner.clone();
        field.mutate(&mut inner);
        assert_ne!(inner.tx.signing_stream(), meta.inner.tx.signing_stream(), "{field:?}");
        // Re-wrapped by the legitimate writer, so only the Falcon check can catch it.
        let forged = wrap(inner, &w.did, meta.falcon_signature.clone(), &w.ecdsa, fx.hub, &Fixture::params(3));
        assert_ne!(forged.raw(), meta.raw());
        let d = v.verify(&forged.wrapper, &fx.registry);
        assert_eq!(d.reason, Some(RejectReason::PqSignatureInvalid), "{field:?}");
    }
}

#[test]
fn wrapper_tampering_rejected() {
    let mut fx = Fixture::new(b"mtx-wrapper");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let v = verifier(&fx);

    let mut w1 = meta.wrapper.clone();
    w1.tx.to = Some(pqchain_crypto::ecdsa::Address([9; 20]));
    assert_eq!(v.verify(&w1, &fx.registry).reason, Some(RejectReason::NotRelayHub));

    let mut w2 = meta.wrapper.clone();
    w2.tx.nonce += 1;
    assert_eq!(v.verify(&w2, &fx.registry).reason, Some(RejectReason::SenderControlFailed));

    let mut w3 = meta.wrapper.clone();
    w3.tx.data.truncate(10);
    assert_eq!(v.verify(&w3, &fx.registry).reason, Some(RejectReason::Malformed));
}

#[test]
fn unregistered_or_mismatched_writer() {
    let mut fx = Fixture::new(b"mtx-unreg");
    let stranger = fx.unregistered();
    let inner = fx.inner(&stranger, 0);
    let err = sign_outer(
        inner.clone(),
        &stranger.did,
        &stranger.falcon,
        &stranger.ecdsa,
        fx.hub,
        &Fixture::params(0),
        &fx.registry,
        &mut fx.rng,
    )
    .unwrap_err();
    assert_eq!(err.code(), "UnregisteredWriter");

    let forged = sign_outer_unchecked(inner, &stranger.did, &stranger.falcon, &stranger.ecdsa, fx.hub, &Fixture::params(0), &mut fx.rng);
    assert_eq!(verifier(&fx).verify(&forged.wrapper, &fx.registry).reason, Some(RejectReason::DidUnresolvable));

    let w = fx.enroll("writer");
    let inner = fx.inner(&w, 0);
    let err = sign_outer(inner, &w.did, &stranger.falcon, &w.ecdsa, fx.hub, &Fixture::params(0), &fx.registry, &mut fx.rng)
        .unwrap_err();
    assert_eq!(err.code(), "KeyMismatch");
}

#[test]
fn v_values_follow_eip155() {
    let mut fx = Fixture::new(b"mtx-v");
    let w = fx.enroll("writer");
    for n in 0..8 {
        let meta = fx.metatx(&w, n);
        for t in [&meta.inner, &meta.wrapper] {
            let (chain, rec) = split_v(t.v).unwrap();
            assert_eq!(chain, CHAIN_ID);
            assert!(rec <= 1);
            assert!(t.v == CHAIN_ID * 2 + 35 || t.v == CHAIN_ID * 2 + 36);
            assert!(t.signature().is_some());
        }
        assert_eq!(
            pqchain_crypto::ecdsa::derive_address(&meta.inner.recover_signer().unwrap()),
            pqchain_crypto::ecdsa::derive_address(w.account.public())
        );
    }
}

#[test]
fn payload_encoding_is_canonical() {
    let mut fx = Fixture::new(b"mtx-payload");
    let w = fx.enroll("writer");
    let meta = fx.metatx(&w, 0);
    let bytes = meta.payload().encode();
    assert_eq!(bytes, meta.wrapper.tx.data);
    let p = MetaPayload::decode(&bytes).unwrap();
    assert_eq!(p.encode(), bytes);
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(MetaPayload::decode(&longer).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 1;
    assert!(MetaPayload::decode(&bad_magic).is_err());
    assert!(MetaPayload::decode(&bytes[..bytes.len() - 1]).is_err());
    assert_eq!(SignedTransaction::decode_raw(&meta.inner.raw()).unwrap(), meta.inner);
}

fn relay(fx: &mut Fixture) -> (RelaySigner, common::Identity) {
    let w = fx.enroll("writer");
    let signer = RelaySigner::new(
        RelaySignerConfig {
            writer_did: w.did.clone(),
            writer_eth: w.ecdsa.clone(),
            falcon: w.falcon.clone(),
            account: w.account.clone(),
            relay_hub: fx.hub,
            chain_id: CHAIN_ID,
            registry: fx.registry.clone(),
        },
        Box::new(ShakeStream::new(b"relay")),
    );
    (signer, w)
}

#[test]
fn relay_signer_rpc() {
    let mut fx = Fixture::new(b"mtx-relay");
    let (signer, _w) = relay(&mut fx);
    let resp: Value = serde_json::from_str(&signer.handle_line(
        r#"{"jsonrpc":"2.0","id":1,"method":"relay_send","params":[{"to":"0x4242424242424242424242424242424242424242","value":"0x10","data":"0xdead"}]}"#,
    ))
    .unwrap();
    let id = resp["result"]["id"].as_str().unwrap().to_string();
    let out = signer.take_outbox();
    assert_eq!(out.len(), 1);
    assert!(verifier(&fx).verify(&out[0].wrapper, &fx.registry).is_admit());
    assert_eq!(out[0].inner.tx.data, vec![0xde, 0xad]);

    let status: Value = serde_json::from_str(&signer.handle_line(&format!(
        r#"{{"jsonrpc":"2.0","id":2,"method":"relay_status","params":["{id}"]}}"#
    )))
    .unwrap();
    assert_eq!(status["result"]["status"], "submitted");

    let errors = [
        ("not json", -32700),
        (r#"{"jsonrpc":"1.0","id":3,"method":"relay_send"}"#, -32600),
        (r#"{"jsonrpc":"2.0","id":3,"method":"eth_call","params":[]}"#, -32601),
        (r#"{"jsonrpc":"2.0","id":3,"method":"relay_send","params":[{"to":"0x12"}]}"#, -32602),
    ];
    for (line, code) in errors {
        let v: Value = serde_json::from_str(&signer.handle_line(line)).unwrap();
        assert_eq!(v["error"]["code"], code, "{line}");
    }
    let _ = NOW;
}

#[cfg(unix)]
#[test]
fn relay_signer_over_unix_socket() {
    use std::io::{BufRead, BufReader, Write};
    use std::os::unix::net::UnixStream;
    use std::sync::Arc;

    let mut fx = Fixture::new(b"mtx-unix");
    let (signer, _w) = relay(&mut fx);
    let signer = Arc::new(signer);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("relay.sock");
    let server = {
        let (signer, path) = (signer.clone(), path.clone());
        std::thread::spawn(move || signer.serve_unix(&path, Some(1)).unwrap())
    };
    let mut stream = loop {
        match UnixStream::connect(&path) {
            Ok(s) => break s,
            Err(_) => std::thread::sleep(std::time::Duration::from_millis(10)),
        }
    };
    writeln!(stream, r#"{{"jsonrpc":"2.0","id":7,"method":"relay_status","params":["0x00"]}}"#).unwrap();
    let mut line = String::new();
    BufReader::new(&stream).read_line(&mut line).unwrap();
    drop(stream);
    server.join().unwrap();
    let v: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["id"], 7);
    assert_eq!(v["result"]["status"], "unknown");
}
