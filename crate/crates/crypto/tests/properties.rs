use pqchain_crypto::ecdsa::{derive_address, ecdsa_recover, EcdsaKeyPair};
use pqchain_crypto::falcon::{self, SignatureEncoding};
use pqchain_crypto::hash::{keccak256, shake256};
use pqchain_crypto::{Digest256, ShakeStream};
use proptest::prelude::*;
use std::collections::HashSet;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shake_prefix(data in proptest::collection::vec(any::<u8>(), 0..400), k in 1usize..200, m in 0usize..200) {
        let long = shake256(&data, k + m).unwrap();
        let short = shake256(&data, k).unwrap();
        prop_assert_eq!(&long[..k], &short[..]);
    }

    #[test]
    fn keccak_single_bit_sensitivity(data in proptest::collection::vec(any::<u8>(), 1..300), bit in any::<usize>()) {
        let mut flipped = data.clone();
        let bit = bit % (data.len() * 8);
        flipped[bit / 8] ^= 1 << (bit % 8);
        prop_assert_ne!(keccak256(&data), keccak256(&flipped));
    }

    #[test]
    fn ecdsa_recovers_signer(seed in any::<[u8; 32]>(), digest in any::<[u8; 32]>()) {
        let key = EcdsaKeyPair::generate(&mut ShakeStream::new(&seed));
        let digest = Digest256(digest);
        let sig = key.sign(&digest);
        prop_assert!(sig.is_well_formed());
        prop_assert_eq!(ecdsa_recover(&digest, &sig).unwrap(), *key.public());
    }

    #[test]
    fn ecdsa_flipped_s_does_not_recover_signer(seed in any::<[u8; 32]>(), digest in any::<[u8; 32]>(), bit in 0usize..256) {
        let key = EcdsaKeyPair::generate(&mut ShakeStream::new(&seed));
        let digest = Digest256(digest);
        let mut sig = key.sign(&digest);
        sig.s[bit / 8] ^= 1 << (bit % 8);
        match ecdsa_recover(&digest, &sig) {
            Ok(pk) => prop_assert_ne!(pk, *key.public()),
            Err(_) => {}
        }
    }
}

#[test]
fn ecdsa_round_trip_1000() {
    let mut rng = ShakeStream::new(b"ecdsa-1000");
    for i in 0u32..1000 {
        let key = EcdsaKeyPair::generate(&mut rng);
        let digest = keccak256(&i.to_be_bytes());
        assert_eq!(ecdsa_recover(&digest, &key.sign(&digest)).unwrap(), *key.public());
    }
}

#[test]
fn addresses_distinct_over_1000_keys() {
    let mut rng = ShakeStream::new(b"addresses");
    let mut seen = HashSet::new();
    for _ in 0..1000 {
        let key = EcdsaKeyPair::generate(&mut rng);
        assert_eq!(derive_address(key.public()).0, keccak256(key.public().as_bytes()).0[12..]);
        assert!(seen.insert(derive_address(key.public())));
    }
}

#[test]
fn falcon_round_trip_1000() {
    let kp = falcon::keygen_from_entropy(b"falcon round trip key entropy 32+").unwrap();
    let mut rng = ShakeStream::new(b"falcon-msgs");
    for i in 0u32..1000 {
        let msg = shake256(&i.to_be_bytes(), 1 + (i as usize % 300)).unwrap();
        let sig = falcon::sign(&msg, &kp.secret, &mut rng, SignatureEncoding::Padded).unwrap();
        assert_eq!(sig.len(), falcon::PADDED_SIGNATURE_BYTES);
        assert_eq!(falcon::verify(&msg, &sig, &kp.public), Ok(()));
    }
}
