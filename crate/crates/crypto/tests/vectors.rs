//! Committed reference vectors for the hash functions, ECDSA and the KEMs.

use pqchain_crypto::ecdsa::{derive_address, ecdsa_recover, EcdsaKeyPair, EcdsaPublicKey};
use pqchain_crypto::hash::{keccak256, shake256};
use pqchain_crypto::kem::{kem_decap, kem_encap, kem_keygen, KemAlgorithm};
use pqchain_crypto::{Digest256, NistKatDrbg, RandomSource};
use sha2::{Digest, Sha256};

fn lines(name: &str) -> Vec<String> {
    let path = format!("{}/tests/vectors/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

fn unhex(s: &str) -> Vec<u8> {
    if s == "-" {
        Vec::new()
    } else {
        hex::decode(s).unwrap()
    }
}

#[test]
fn keccak256_vectors() {
    let vectors = lines("keccak256.txt");
    assert!(vectors.len() >= 20);
    for line in vectors {
        let [input, expected]: [&str; 2] = line.split(' ').collect::<Vec<_>>().try_into().unwrap();
        assert_eq!(keccak256(&unhex(input)).to_hex(), expected, "input {input}");
    }
}

#[test]
fn shake256_vectors() {
    let vectors = lines("shake256.txt");
    assert!(vectors.len() >= 100);
    for line in vectors {
        let [input, len, expected]: [&str; 3] = line.split(' ').collect::<Vec<_>>().try_into().unwrap();
        let out = shake256(&unhex(input), len.parse().unwrap()).unwrap();
        assert_eq!(hex::encode(out), expected, "input {input}");
    }
}

#[test]
fn ecdsa_vectors() {
    for line in lines("ecdsa-secp256k1.txt") {
        let f: Vec<&str> = line.split(' ').collect();
        let secret: [u8; 32] = unhex(f[0]).try_into().unwrap();
        let digest = Digest256::from_slice(&unhex(f[1])).unwrap();
        let key = EcdsaKeyPair::from_secret_bytes(&secret).unwrap();
        assert_eq!(hex::encode(key.public().as_bytes()), f[2]);
        assert_eq!(derive_address(key.public()).to_hex(), f[3]);

        let sig = key.sign(&digest);
        assert_eq!(hex::encode(sig.r), f[4], "r for {}", f[0]);
        assert_eq!(hex::encode(sig.s), f[5], "s for {}", f[0]);
        assert_eq!(sig.recovery_id.to_string(), f[6]);
        assert_eq!(ecdsa_recover(&digest, &sig).unwrap(), *key.public());
    }
}

#[test]
fn public_key_parsing_rejects_off_curve_points() {
    let line = &lines("ecdsa-secp256k1.txt")[0];
    let mut xy = unhex(line.split(' ').nth(2).unwrap());
    assert!(EcdsaPublicKey::from_slice(&xy).is_ok());
    xy[63] ^= 1;
    assert!(EcdsaPublicKey::from_slice(&xy).is_err());
    assert!(EcdsaPublicKey::from_slice(&xy[..63]).is_err());
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Each line pins SHA-256 digests of a NIST KAT entry generated by the
/// reference implementation's own KAT harness.
#[test]
fn kem_kat_vectors() {
    for line in lines("kem-kat.txt") {
        let f: Vec<&str> = line.split(' ').collect();
        let alg: KemAlgorithm = f[0].parse().unwrap();
        let seed: [u8; 48] = unhex(f[2]).try_into().unwrap();
        let mut drbg = NistKatDrbg::new(&seed);
        let kp = kem_keygen(alg, &mut drbg).unwrap();
        assert_eq!(sha(kp.public.as_bytes()), f[3], "{} count {} pk", f[0], f[1]);
        assert_eq!(sha(kp.secret.as_bytes()), f[4], "{} count {} sk", f[0], f[1]);
        let (ct, ss) = kem_encap(&kp.public, &mut drbg).unwrap();
        assert_eq!(sha(ct.as_bytes()), f[5]);
        assert_eq!(hex::encode(ss.as_bytes()), f[6]);
        assert_eq!(kem_decap(&ct, &kp.secret).unwrap(), ss);
    }
}

/// Rebuilds PQClean's single-entry KAT file for each KEM and compares its
/// SHA-256 with the digest published alongside the reference code.
#[test]
fn kem_kat_matches_published_digest() {
    for (alg, digest) in [
        (KemAlgorithm::McEliece348864, "6f0f50626df15ce403c0c1d5f91648245282afebcac90e5db3595ce9b20b1817"),
        (KemAlgorithm::MlKem768, "5352539586b6c3df58be6158a6250aeff402bd73060b0a3de68850ac074c17c3"),
    ] {
        let entropy: [u8; 48] = std::array::from_fn(|i| i as u8);
        let mut outer = NistKatDrbg::new(&entropy);
        let mut seed = [0u8; 48];
        outer.fill_bytes(&mut seed);
        let mut drbg = NistKatDrbg::new(&seed);
        let kp = kem_keygen(alg, &mut drbg).unwrap();
        let (ct, ss) = kem_encap(&kp.public, &mut drbg).unwrap();
        let text = format!(
            "count = 0\nseed = {}\npk = {}\nsk = {}\nct = {}\nss = {}\n",
            hex::encode_upper(seed),
            hex::encode_upper(kp.public.as_bytes()),
            hex::encode_upper(kp.secret.as_bytes()),
            hex::encode_upper(ct.as_bytes()),
            hex::encode_upper(ss.as_bytes()),
        );
        assert_eq!(sha(text.as_bytes()), digest, "{alg}");
    }
}
