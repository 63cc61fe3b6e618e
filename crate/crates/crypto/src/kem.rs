//! Key encapsulation: Classic McEliece 348864 and ML-KEM-768.
//!
//! The algorithm is chosen by name at configuration time. Both are
//! implicit-rejection KEMs: a tampered ciphertext decapsulates to an
//! unrelated secret rather than an error, so protocols must confirm keys.

use std::fmt;
use std::str::FromStr;

use zeroize::Zeroizing;

use crate::error::{CryptoError, Result};
use crate::ffi;
use crate::rng::{with_source, RandomSource};

pub const SHARED_SECRET_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KemAlgorithm {
    McEliece348864,
    MlKem768,
}

impl KemAlgorithm {
    pub const ALL: [KemAlgorithm; 2] = [KemAlgorithm::McEliece348864, KemAlgorithm::MlKem768];

    pub fn name(self) -> &'static str {
        match self {
            KemAlgorithm::McEliece348864 => "mceliece348864",
            KemAlgorithm::MlKem768 => "ml-kem-768",
        }
    }

    pub fn public_key_len(self) -> usize {
        match self {
            KemAlgorithm::McEliece348864 => 261_120,
            KemAlgorithm::MlKem768 => 1184,
        }
    }

    pub fn secret_key_len(self) -> usize {
        match self {
            KemAlgorithm::McEliece348864 => 6492,
            KemAlgorithm::MlKem768 => 2400,
        }
    }

    pub fn ciphertext_len(self) -> usize {
        match self {
            KemAlgorithm::McEliece348864 => 96,
            KemAlgorithm::MlKem768 => 1088,
        }
    }

    /// Single-byte identifier used on the wire.
    pub fn code(self) -> u8 {
        match self {
            KemAlgorithm::McEliece348864 => 1,
            KemAlgorithm::MlKem768 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(KemAlgorithm::McEliece348864),
            2 => Ok(KemAlgorithm::MlKem768),
            other => Err(CryptoError::UnknownAlgorithm(format!("kem code {other}"))),
        }
    }
}

impl fmt::Display for KemAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KemAlgorithm {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mceliece348864" | "classic-mceliece-348864" => Ok(KemAlgorithm::McEliece348864),
            "ml-kem-768" | "mlkem768" | "kyber768" => Ok(KemAlgorithm::MlKem768),
            _ => Err(CryptoError::UnknownAlgorithm(s.to_string())),
        }
    }
}

fn check_len(what: &'static str, expected: usize, bytes: &[u8]) -> Result<()> {
    if bytes.len() == expected {
        Ok(())
    } else {
        Err(CryptoError::InvalidLength {
            what,
            expected,
            actual: bytes.len(),
        })
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct KemPublicKey {
    algorithm: KemAlgorithm,
    bytes: Vec<u8>,
}

impl KemPublicKey {
    pub fn from_bytes(algorithm: KemAlgorithm, bytes: &[u8]) -> Result<Self> {
        check_len("KEM public key", algorithm.public_key_len(), bytes)?;
        Ok(Self {
            algorithm,
            bytes: bytes.to_vec(),
        })
    }

    pub fn algorithm(&self) -> KemAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl fmt::Debug for KemPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KemPublicKey({}, {} bytes)", self.algorithm, self.bytes.len())
    }
}

#[derive(Clone)]
pub struct KemSecretKey {
    algorithm: KemAlgorithm,
    bytes: Zeroizing<Vec<u8>>,
}

impl KemSecretKey {
    pub fn from_bytes(algorithm: KemAlgorithm, bytes: &[u8]) -> Result<Self> {
        check_len("KEM secret key", algorithm.secret_key_len(), bytes)?;
        Ok(Self {
            algorithm,
            bytes: Zeroizing::new(bytes.to_vec()),
        })
    }

    pub fn algorithm(&self) -> KemAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl fmt::Debug for KemSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KemSecretKey({}, ..)", self.algorithm)
    }
}

#[derive(Clone, Debug)]
pub struct KemKeyPair {
    pub public: KemPublicKey,
    pub secret: KemSecretKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemCiphertext {
    algorithm: KemAlgorithm,
    bytes: Vec<u8>,
}

impl KemCiphertext {
    pub fn from_bytes(algorithm: KemAlgorithm, bytes: &[u8]) -> Result<Self> {
        check_len("KEM ciphertext", algorithm.ciphertext_len(), bytes)?;
        Ok(Self {
            algorithm,
            bytes: bytes.to_vec(),
        })
    }

    pub fn algorithm(&self) -> KemAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret(Zeroizing<[u8; SHARED_SECRET_LEN]>);

impl SharedSecret {
    pub fn from_bytes(bytes: [u8; SHARED_SECRET_LEN]) -> Self {
        Self(Zeroizing::new(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; SHARED_SECRET_LEN] {
        &self.0
    }
}

impl fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

pub fn kem_keygen(algorithm: KemAlgorithm, source: &mut dyn RandomSource) -> Result<KemKeyPair> {
    let mut pk = vec![0u8; algorithm.public_key_len()];
    let mut sk = Zeroizing::new(vec![0u8; algorithm.secret_key_len()]);
    let rc = with_source(source, || unsafe {
        match algorithm {
            KemAlgorithm::McEliece348864 => {
                ffi::PQCLEAN_MCELIECE348864_CLEAN_crypto_kem_keypair(pk.as_mut_ptr(), sk.as_mut_ptr())
            }
            KemAlgorithm::MlKem768 => ffi::PQCLEAN_MLKEM768_CLEAN_crypto_kem_keypair(pk.as_mut_ptr(), sk.as_mut_ptr()),
        }
    });
    if rc != 0 {
        return Err(CryptoError::Reference("KEM key generation"));
    }
    Ok(KemKeyPair {
        public: KemPublicKey { algorithm, bytes: pk },
        secret: KemSecretKey { algorithm, bytes: sk },
    })
}

pub fn kem_encap(public: &KemPublicKey, source: &mut dyn RandomSource) -> Result<(KemCiphertext, SharedSecret)> {
    let algorithm = public.algorithm;
    let mut ct = vec![0u8; algorithm.ciphertext_len()];
    let mut ss = Zeroizing::new([0u8; SHARED_SECRET_LEN]);
    let rc = with_source(source, || unsafe {
        match algorithm {
            KemAlgorithm::McEliece348864 => ffi::PQCLEAN_MCELIECE348864_CLEAN_crypto_kem_enc(
                ct.as_mut_ptr(),
                ss.as_mut_ptr(),
                public.bytes.as_ptr(),
            ),
            KemAlgorithm::MlKem768 => {
                ffi::PQCLEAN_MLKEM768_CLEAN_crypto_kem_enc(ct.as_mut_ptr(), ss.as_mut_ptr(), public.bytes.as_ptr())
            }
        }
    });
    if rc != 0 {
        return Err(CryptoError::Reference("KEM encapsulation"));
    }
    Ok((KemCiphertext { algorithm, bytes: ct }, SharedSecret(ss)))
}

pub fn kem_decap(ciphertext: &KemCiphertext, secret: &KemSecretKey) -> Result<SharedSecret> {
    if ciphertext.algorithm != secret.algorithm {
        return Err(CryptoError::AlgorithmMismatch("KEM algorithm"));
    }
    let mut ss = Zeroizing::new([0u8; SHARED_SECRET_LEN]);
    // Decapsulation draws no randomness.
    let rc = unsafe {
        match secret.algorithm {
            KemAlgorithm::McEliece348864 => ffi::PQCLEAN_MCELIECE348864_CLEAN_crypto_kem_dec(
                ss.as_mut_ptr(),
                ciphertext.bytes.as_ptr(),
                secret.bytes.as_ptr(),
            ),
            KemAlgorithm::MlKem768 => ffi::PQCLEAN_MLKEM768_CLEAN_crypto_kem_dec(
                ss.as_mut_ptr(),
                ciphertext.bytes.as_ptr(),
                secret.bytes.as_ptr(),
            ),
        }
    };
    if rc != 0 {
        return Err(CryptoError::Reference("KEM decapsulation"));
    }
    Ok(SharedSecret(ss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ShakeStream;

    #[test]
    fn round_trip_and_implicit_rejection() {
        for alg in KemAlgorithm::ALL {
            let mut rng = ShakeStream::new(alg.name().as_bytes());
            let kp = kem_keygen(alg, &mut rng).unwrap();
            let (ct, ss) = kem_encap(&kp.public, &mut rng).unwrap();
            assert_eq!(kem_decap(&ct, &kp.secret).unwrap(), ss);
            let mut bytes = ct.as_bytes().to_vec();
            bytes[0] ^= 1;
            let tampered = KemCiphertext::from_bytes(alg, &bytes).unwrap();
            assert_ne!(kem_decap(&tampered, &kp.secret).unwrap(), ss);
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("mceliece348864".parse::<KemAlgorithm>().unwrap(), KemAlgorithm::McEliece348864);
        assert_eq!("ML-KEM-768".parse::<KemAlgorithm>().unwrap(), KemAlgorithm::MlKem768);
        assert!("frodo".parse::<KemAlgorithm>().is_err());
        for alg in KemAlgorithm::ALL {
            assert_eq!(KemAlgorithm::from_code(alg.code()).unwrap(), alg);
        }
    }
}
