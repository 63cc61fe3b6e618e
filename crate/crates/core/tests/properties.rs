use pqchain_core::codec::{Reader, Writer};
use pqchain_core::metatx::MetaPayload;
use pqchain_core::rlp::{self, Item};
use pqchain_core::tx::{eip155_v, sign_inner, split_v, SignedTransaction, Transaction};
use pqchain_core::wire::Frame;
use pqchain_crypto::ecdsa::{derive_address, Address, EcdsaKeyPair};
use pqchain_crypto::ShakeStream;
use proptest::prelude::*;
use ruint::aliases::U256;

fn item() -> impl Strategy<Value = Item> {
    let leaf = proptest::collection::vec(any::<u8>(), 0..80).prop_map(Item::Bytes);
    leaf.prop_recursive(4, 64, 8, |inner| proptest::collection::vec(inner, 0..8).prop_map(Item::List))
}

fn transaction() -> impl Strategy<Value = Transaction> {
    (
        any::<u64>(),
        any::<[u64; 4]>(),
        any::<u64>(),
        proptest::option::of(any::<[u8; 20]>()),
        any::<[u64; 4]>(),
        proptest::collection::vec(any::<u8>(), 0..200),
        0u64..(1 << 40),
    )
        .prop_map(|(nonce, gp, gas_limit, to, value, data, chain_id)| Transaction {
            nonce,
            gas_price: U256::from_limbs(gp),
            gas_limit,
            to: to.map(Address),
            value: U256::from_limbs(value),
            data,
            chain_id,
        })
}

fn key(seed: u64) -> EcdsaKeyPair {
    EcdsaKeyPair::generate(&mut ShakeStream::new(&seed.to_be_bytes()))
}

proptest! {
    #[test]
    fn rlp_round_trips(it in item()) {
        let bytes = rlp::encode(&it);
        prop_assert_eq!(rlp::decode(&bytes).unwrap(), it);
    }

    #[test]
    fn rlp_decode_is_canonical(bytes in proptest::collection::vec(any::<u8>(), 0..120)) {
        if let Ok(it) = rlp::decode(&bytes) {
            prop_assert_eq!(rlp::encode(&it), bytes);
        }
    }

    #[test]
    fn rlp_rejects_trailing(it in item(), extra in 1u8..=255) {
        let mut bytes = rlp::encode(&it);
        bytes.push(extra);
        prop_assert!(rlp::decode(&bytes).is_err());
    }

    #[test]
    fn rlp_integers_round_trip(limbs in any::<[u64; 4]>(), small in any::<u64>()) {
        let v = U256::from_limbs(limbs);
        prop_assert_eq!(rlp::decode(&rlp::encode(&Item::u256(&v))).unwrap().as_u256().unwrap(), v);
        prop_assert_eq!(rlp::decode(&rlp::encode(&Item::u64(small))).unwrap().as_u64().unwrap(), small);
    }

    #[test]
    fn eip155_v_round_trips(chain in 0u64..(1 << 60), rec in 0u8..2) {
        prop_assert_eq!(split_v(eip155_v(chain, rec)), Some((chain, rec)));
    }

    #[test]
    fn frames_round_trip(kind in any::<u8>(), payload in proptest::collection::vec(any::<u8>(), 0..300)) {
        let f = Frame::new(kind, payload);
        let bytes = f.encode();
        prop_assert_eq!(Frame::decode(&bytes).unwrap(), f.clone());
        let mut stream = bytes.clone();
        stream.extend_from_slice(&[1, 2, 3]);
        prop_assert_eq!(Frame::decode_prefix(&stream).unwrap(), (f, bytes.len()));
        prop_assert!(Frame::decode(&stream).is_err());
        prop_assert!(Frame::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn codec_fields_round_trip(a in any::<u8>(), b in any::<u64>(), s in ".{0,40}", v in proptest::collection::vec(any::<u8>(), 0..64)) {
        let mut w = Writer::with_header(b"TEST", 3);
        w.u8(a).u64(b).str(&s).bytes(&v);
        let bytes = w.finish();
        let (mut r, version) = Reader::with_header(&bytes, b"TEST").unwrap();
        prop_assert_eq!(version, 3);
        prop_assert_eq!(r.u8().unwrap(), a);
        prop_assert_eq!(r.u64().unwrap(), b);
        prop_assert_eq!(r.string().unwrap(), s);
        prop_assert_eq!(r.bytes().unwrap(), &v[..]);
        prop_assert!(r.finish().is_ok());
    }

    #[test]
    fn payload_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let _ = MetaPayload::decode(&bytes);
        let _ = SignedTransaction::decode_raw(&bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn signed_transactions_round_trip_and_recover(tx in transaction(), seed in any::<u64>()) {
        let k = key(seed);
        let signed = sign_inner(tx, &k);
        let decoded = SignedTransaction::decode_raw(&signed.raw()).unwrap();
        prop_assert_eq!(&decoded, &signed);
        prop_assert_eq!(derive_address(&decoded.recover_signer().unwrap()), derive_address(k.public()));
    }

    #[test]
    fn any_field_change_moves_the_signing_hash(tx in transaction(), which in 0usize..7) {
        let mut t = tx.clone();
        match which {
            0 => t.nonce ^= 1,
            1 => t.gas_price ^= U256::from(1u8),
            2 => t.gas_limit ^= 1,
            3 => t.to = match t.to { Some(_) => None, None => Some(Address([0; 20])) },
            4 => t.value ^= U256::from(1u8),
            5 => t.data.push(0),
            _ => t.chain_id ^= 1,
        }
        prop_assert_ne!(t.signing_hash(), tx.signing_hash());
    }
}
