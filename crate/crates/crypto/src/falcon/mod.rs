//! Falcon-512.
//!
//! Key generation and signing call the vendored reference code with an
//! explicit randomness source. Verification is implemented natively so the
//! cost of each step can be observed through [`CostMeter`].

mod codec;
pub mod meter;
mod ntt;

use std::fmt;

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;
use thiserror::Error;
use zeroize::Zeroizing;

use crate::error::{CryptoError, Result};
use crate::ffi;
use crate::rng::{with_source, RandomSource, ShakeStream};

pub use meter::{CostMeter, NoMeter, OpCounts};

pub const N: usize = 512;
pub const LOGN: u8 = 9;
pub const Q: usize = 12289;
pub const PUBLIC_KEY_BYTES: usize = 897;
pub const SECRET_KEY_BYTES: usize = 1281;
pub const NONCE_BYTES: usize = 40;
/// Fixed length of a padded signature (header, nonce and padded vector).
pub const PADDED_SIGNATURE_BYTES: usize = 666;
/// Largest compressed-form signature accepted by [`FalconSignature`].
pub const MAX_SIGNATURE_BYTES: usize = PADDED_SIGNATURE_BYTES;
/// Maximum squared l2-norm of `(s1, s2)`.
pub const SIGNATURE_NORM_BOUND: u64 = 34_034_726;
/// Object identifier used for Falcon-512 keys in certificates.
pub const FALCON512_OID: &str = "1.3.9999.3.1";

const PUBLIC_KEY_HEADER: u8 = LOGN;
const SIGNATURE_HEADER: u8 = 0x30 + LOGN;
const SHAKE_RATE: u64 = 136;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FalconPublicKey(Box<[u8; PUBLIC_KEY_BYTES]>);

impl FalconPublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; PUBLIC_KEY_BYTES] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "Falcon-512 public key",
            expected: PUBLIC_KEY_BYTES,
            actual: bytes.len(),
        })?;
        Ok(Self(Box::new(arr)))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_BYTES] {
        &self.0
    }
}

impl fmt::Debug for FalconPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FalconPublicKey({}..)", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct FalconSecretKey(Zeroizing<Vec<u8>>);

impl FalconSecretKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != SECRET_KEY_BYTES {
            return Err(CryptoError::InvalidLength {
                what: "Falcon-512 secret key",
                expected: SECRET_KEY_BYTES,
                actual: bytes.len(),
            });
        }
        Ok(Self(Zeroizing::new(bytes.to_vec())))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for FalconSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FalconSecretKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FalconKeyPair {
    pub public: FalconPublicKey,
    pub secret: FalconSecretKey,
}

/// Detached signature: `0x39 || nonce (40) || compressed s2`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FalconSignature(Vec<u8>);

impl FalconSignature {
    /// Enforces only the length envelope; structure is checked by [`verify`].
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        if bytes.len() <= 1 + NONCE_BYTES || bytes.len() > MAX_SIGNATURE_BYTES {
            return Err(CryptoError::InvalidLength {
                what: "Falcon-512 signature",
                expected: MAX_SIGNATURE_BYTES,
                actual: bytes.len(),
            });
        }
        Ok(Self(bytes.to_vec()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nonce(&self) -> &[u8] {
        &self.0[1..1 + NONCE_BYTES]
    }

    pub fn is_padded(&self) -> bool {
        self.0.len() == PADDED_SIGNATURE_BYTES
    }
}

impl fmt::Debug for FalconSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FalconSignature({} bytes)", self.0.len())
    }
}

/// Signature layout produced by [`sign`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignatureEncoding {
    /// Always exactly 666 bytes.
    #[default]
    Padded,
    /// Variable length, as in the original submission's known-answer tests.
    Compressed,
}

/// Why verification rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum FalconVerifyError {
    #[error("malformed {0}")]
    Malformed(MalformedPart),
    #[error("signature does not verify")]
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MalformedPart {
    PublicKey,
    Signature,
}

impl fmt::Display for MalformedPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MalformedPart::PublicKey => "public key",
            MalformedPart::Signature => "signature",
        })
    }
}

/// Generates a key pair, drawing the 48-byte keygen seed from `source`.
pub fn keygen(source: &mut dyn RandomSource) -> Result<FalconKeyPair> {
    let mut pk = [0u8; PUBLIC_KEY_BYTES];
    let mut sk = Zeroizing::new(vec![0u8; SECRET_KEY_BYTES]);
    let rc = with_source(source, || unsafe {
        ffi::PQCLEAN_FALCONPADDED512_CLEAN_crypto_sign_keypair(pk.as_mut_ptr(), sk.as_mut_ptr())
    });
    if rc != 0 {
        return Err(CryptoError::Reference("Falcon-512 key generation"));
    }
    Ok(FalconKeyPair {
        public: FalconPublicKey(Box::new(pk)),
        secret: FalconSecretKey(sk),
    })
}

/// Key generation from an entropy buffer (expanded with SHAKE256).
pub fn keygen_from_entropy(entropy: &[u8]) -> Result<FalconKeyPair> {
    if entropy.len() < 32 {
        return Err(CryptoError::InvalidLength {
            what: "Falcon keygen entropy",
            expected: 32,
            actual: entropy.len(),
        });
    }
    keygen(&mut ShakeStream::new(entropy))
}

/// Signs `msg`; the nonce and sampler seed come from `source`.
pub fn sign(
    msg: &[u8],
    key: &FalconSecretKey,
    source: &mut dyn RandomSource,
    encoding: SignatureEncoding,
) -> Result<FalconSignature> {
    let mut sig = vec![0u8; 752];
    let mut len = 0usize;
    let rc = with_source(source, || unsafe {
        match encoding {
            SignatureEncoding::Padded => ffi::PQCLEAN_FALCONPADDED512_CLEAN_crypto_sign_signature(
                sig.as_mut_ptr(),
                &mut len,
                msg.as_ptr(),
                msg.len(),
                key.as_bytes().as_ptr(),
            ),
            SignatureEncoding::Compressed => ffi::PQCLEAN_FALCON512_CLEAN_crypto_sign_signature(
                sig.as_mut_ptr(),
                &mut len,
                msg.as_ptr(),
                msg.len(),
                key.as_bytes().as_ptr(),
            ),
        }
    });
    if rc != 0 {
        return Err(CryptoError::Reference("Falcon-512 signing"));
    }
    sig.truncate(len);
    FalconSignature::from_slice(&sig)
}

pub fn verify(msg: &[u8], sig: &FalconSignature, public: &FalconPublicKey) -> Result<(), FalconVerifyError> {
    verify_metered(msg, sig, public, &mut NoMeter)
}

/// Verification through the reference C code. Kept as an independent check
/// on the native verifier.
pub fn reference_verify(msg: &[u8], sig: &[u8], public: &FalconPublicKey) -> bool {
    let rc = unsafe {
        if sig.len() == PADDED_SIGNATURE_BYTES {
            ffi::PQCLEAN_FALCONPADDED512_CLEAN_crypto_sign_verify(
                sig.as_ptr(),
                sig.len(),
                msg.as_ptr(),
                msg.len(),
                public.as_bytes().as_ptr(),
            )
        } else {
            ffi::PQCLEAN_FALCON512_CLEAN_crypto_sign_verify(
                sig.as_ptr(),
                sig.len(),
                msg.as_ptr(),
                msg.len(),
                public.as_bytes().as_ptr(),
            )
        }
    };
    rc == 0
}

/// Decodes the public key into its 512 coefficients mod q.
pub fn decode_public_key(public: &FalconPublicKey) -> Result<[u16; N], FalconVerifyError> {
    let bytes = public.as_bytes();
    if bytes[0] != PUBLIC_KEY_HEADER {
        return Err(FalconVerifyError::Malformed(MalformedPart::PublicKey));
    }
    codec::modq_decode(&bytes[1..]).ok_or(FalconVerifyError::Malformed(MalformedPart::PublicKey))
}

/// Decodes the signature vector `s2`. Padded signatures may carry zero bytes
/// after the compressed data; compressed ones must be consumed exactly.
pub fn decode_signature(sig: &FalconSignature) -> Result<[i16; N], FalconVerifyError> {
    let bytes = sig.as_bytes();
    let malformed = FalconVerifyError::Malformed(MalformedPart::Signature);
    if bytes[0] != SIGNATURE_HEADER {
        return Err(malformed);
    }
    let body = &bytes[1 + NONCE_BYTES..];
    let (s2, used) = codec::comp_decode(body).ok_or(malformed)?;
    if used != body.len() && !(sig.is_padded() && body[used..].iter().all(|&b| b == 0)) {
        return Err(malformed);
    }
    Ok(s2)
}

/// SHAKE256(nonce || msg) mapped to 512 coefficients by rejection sampling
/// 16-bit big-endian words below 5q.
pub fn hash_to_point<M: CostMeter>(nonce: &[u8], msg: &[u8], meter: &mut M) -> [u16; N] {
    let mut hasher = Shake256::default();
    hasher.update(nonce);
    hasher.update(msg);
    let absorbed = (nonce.len() + msg.len()) as u64;
    let mut reader = hasher.finalize_xof();
    let mut out = [0u16; N];
    let mut filled = 0;
    let mut squeezed = 0u64;
    let mut buf = [0u8; 2];
    while filled < N {
        reader.read(&mut buf);
        squeezed += 2;
        let w = u16::from_be_bytes(buf) as u32;
        if w < 5 * Q as u32 {
            out[filled] = (w % Q as u32) as u16;
            filled += 1;
        }
    }
    meter.hash_absorb(absorbed);
    meter.hash_squeeze(squeezed);
    // absorbing full blocks, then one permutation per squeezed block (the
    // first one also finishes the padded final absorb block)
    meter.keccak_permutations(absorbed / SHAKE_RATE + squeezed.div_ceil(SHAKE_RATE));
    meter.memory_words(N as u64);
    out
}

/// Native verification with every primitive step reported to `meter`.
pub fn verify_metered<M: CostMeter>(
    msg: &[u8],
    sig: &FalconSignature,
    public: &FalconPublicKey,
    meter: &mut M,
) -> Result<(), FalconVerifyError> {
    let h = decode_public_key(public)?;
    meter.memory_words(N as u64);
    let s2 = decode_signature(sig)?;
    meter.memory_words(N as u64);

    let c = hash_to_point(sig.nonce(), msg, meter);

    // s1 = c - s2 * h  mod (q, x^512 + 1)
    let mut t: [u32; N] = std::array::from_fn(|i| (s2[i] as i32).rem_euclid(Q as i32) as u32);
    let mut h_ntt: [u32; N] = h.map(u32::from);
    meter.memory_words(2 * N as u64);
    ntt::forward(&mut t, meter);
    ntt::forward(&mut h_ntt, meter);
    ntt::pointwise(&mut t, &h_ntt, meter);
    ntt::inverse(&mut t, meter);

    let half = (Q / 2) as i64;
    let mut norm: u64 = 0;
    for i in 0..N {
        let mut s1 = (c[i] as i64 - t[i] as i64).rem_euclid(Q as i64);
        if s1 > half {
            s1 -= Q as i64;
        }
        let s2i = s2[i] as i64;
        norm += (s1 * s1 + s2i * s2i) as u64;
    }
    meter.field_muls(2 * N as u64);
    meter.memory_words(3 * N as u64);

    if norm <= SIGNATURE_NORM_BOUND {
        Ok(())
    } else {
        Err(FalconVerifyError::Invalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(tag: &[u8]) -> FalconKeyPair {
        keygen_from_entropy(&[tag, &[0u8; 32][..]].concat()).unwrap()
    }

    #[test]
    fn sizes() {
        let kp = pair(b"sizes");
        assert_eq!(kp.public.as_bytes().len(), PUBLIC_KEY_BYTES);
        assert_eq!(kp.secret.as_bytes().len(), SECRET_KEY_BYTES);
        let mut rng = ShakeStream::new(b"sign");
        let padded = sign(b"m", &kp.secret, &mut rng, SignatureEncoding::Padded).unwrap();
        assert_eq!(padded.len(), PADDED_SIGNATURE_BYTES);
        let compressed = sign(b"m", &kp.secret, &mut rng, SignatureEncoding::Compressed).unwrap();
        assert!(compressed.len() <= PADDED_SIGNATURE_BYTES);
        assert_eq!(verify(b"m", &padded, &kp.public), Ok(()));
        assert_eq!(verify(b"m", &compressed, &kp.public), Ok(()));
    }

    #[test]
    fn keygen_is_deterministic_in_entropy() {
        assert_eq!(pair(b"a"), pair(b"a"));
        assert_ne!(pair(b"a").public, pair(b"b").public);
        assert!(keygen_from_entropy(&[0u8; 31]).is_err());
    }

    #[test]
    fn wrong_message_is_invalid_not_malformed() {
        let kp = pair(b"wrong");
        let sig = sign(b"one", &kp.secret, &mut ShakeStream::new(b"r"), SignatureEncoding::Padded).unwrap();
        assert_eq!(verify(b"two", &sig, &kp.public), Err(FalconVerifyError::Invalid));
    }

    #[test]
    fn bad_header_is_malformed() {
        let kp = pair(b"hdr");
        let sig = sign(b"x", &kp.secret, &mut ShakeStream::new(b"r"), SignatureEncoding::Padded).unwrap();
        let mut bytes = sig.as_bytes().to_vec();
        bytes[0] ^= 0x01;
        let bad = FalconSignature::from_slice(&bytes).unwrap();
        assert_eq!(
            verify(b"x", &bad, &kp.public),
            Err(FalconVerifyError::Malformed(MalformedPart::Signature))
        );
        let mut pk = kp.public.as_bytes().to_vec();
        pk[0] = 0x0a;
        let bad_pk = FalconPublicKey::from_slice(&pk).unwrap();
        assert_eq!(
            verify(b"x", &sig, &bad_pk),
            Err(FalconVerifyError::Malformed(MalformedPart::PublicKey))
        );
    }

    #[test]
    fn length_envelope() {
        assert!(FalconSignature::from_slice(&[0x39; 41]).is_err());
        assert!(FalconSignature::from_slice(&[0x39; 667]).is_err());
        assert!(FalconPublicKey::from_slice(&[0; 896]).is_err());
        assert!(FalconSecretKey::from_slice(&[0; 1280]).is_err());
    }
}
