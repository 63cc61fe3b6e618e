//! Keccak-256 (original padding, as used by Ethereum) and SHAKE256.

use std::fmt;

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Digest, Keccak256, Shake256};

use crate::error::{CryptoError, Result};

/// A 32-byte hash output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0; 32]);

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "digest",
            expected: 32,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl AsRef<[u8]> for Digest256 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

pub fn keccak256(data: &[u8]) -> Digest256 {
    Digest256(Keccak256::digest(data).into())
}

/// Keccak-256 over the concatenation of `parts`.
pub fn keccak256_concat<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Digest256 {
    let mut hasher = Keccak256::new();
    for part in parts {
        Digest::update(&mut hasher, part);
    }
    Digest256(hasher.finalize().into())
}

pub fn shake256(data: &[u8], out_len: usize) -> Result<Vec<u8>> {
    shake256_concat([data], out_len)
}

pub fn shake256_concat<'a>(parts: impl IntoIterator<Item = &'a [u8]>, out_len: usize) -> Result<Vec<u8>> {
    if out_len == 0 {
        return Err(CryptoError::ZeroLength);
    }
    let mut hasher = Shake256::default();
    for part in parts {
        hasher.update(part);
    }
    let mut out = vec![0u8; out_len];
    hasher.finalize_xof().read(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs() {
        assert_eq!(
            keccak256(b"").to_hex(),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
        assert_eq!(
            hex::encode(shake256(b"", 32).unwrap()),
            "46b9dd2b0ba88d13233b3feb743eeb243fcd52ea62b81b82b50c27646ed5762f"
        );
    }

    #[test]
    fn shake_rejects_zero_length() {
        assert_eq!(shake256(b"abc", 0), Err(CryptoError::ZeroLength));
    }

    #[test]
    fn shake_prefix_property() {
        let long = shake256(b"prefix", 32).unwrap();
        let short = shake256(b"prefix", 16).unwrap();
        assert_eq!(&long[..16], &short[..]);
    }

    #[test]
    fn concat_matches_single_buffer() {
        assert_eq!(keccak256_concat([&b"ab"[..], b"cd"]), keccak256(b"abcd"));
        assert_eq!(
            shake256_concat([&b"ab"[..], b"cd"], 40).unwrap(),
            shake256(b"abcd", 40).unwrap()
        );
    }
}
