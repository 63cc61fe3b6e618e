//! XChaCha20-Poly1305 with a structured nonce.
//!
//! The 24-byte nonce is `direction (8, BE) || counter (8, BE) || 0 (8)`, so a
//! key never sees the same nonce twice as long as each direction's counter is
//! monotone.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use zeroize::Zeroize;

use crate::error::{CryptoError, Result};

pub const AEAD_ALGORITHM: &str = "xchacha20-poly1305";
pub const KEY_LEN: usize = 32;
pub const TAG_LEN: usize = 16;

#[derive(Clone, PartialEq, Eq)]
pub struct AeadKey([u8; KEY_LEN]);

impl AeadKey {
    pub fn new(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "AEAD key",
            expected: KEY_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl Drop for AeadKey {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

impl std::fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AeadKey(..)")
    }
}

fn nonce(direction: u64, counter: u64) -> XNonce {
    let mut n = [0u8; 24];
    n[..8].copy_from_slice(&direction.to_be_bytes());
    n[8..16].copy_from_slice(&counter.to_be_bytes());
    n.into()
}

/// Returns `ciphertext || tag`.
pub fn seal(key: &AeadKey, direction: u64, counter: u64, aad: &[u8], plaintext: &[u8]) -> Vec<u8> {
    XChaCha20Poly1305::new(&key.0.into())
        .encrypt(&nonce(direction, counter), Payload { msg: plaintext, aad })
        .expect("XChaCha20-Poly1305 encryption is infallible for in-memory buffers")
}

pub fn open(key: &AeadKey, direction: u64, counter: u64, aad: &[u8], sealed: &[u8]) -> Result<Vec<u8>> {
    if sealed.len() < TAG_LEN {
        return Err(CryptoError::AeadTag);
    }
    XChaCha20Poly1305::new(&key.0.into())
        .decrypt(&nonce(direction, counter), Payload { msg: sealed, aad })
        .map_err(|_| CryptoError::AeadTag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper() {
        let key = AeadKey::new([7; 32]);
        let sealed = seal(&key, 1, 9, b"hdr", b"payload");
        assert_eq!(sealed.len(), 7 + TAG_LEN);
        assert_eq!(open(&key, 1, 9, b"hdr", &sealed).unwrap(), b"payload");
        assert!(open(&key, 1, 10, b"hdr", &sealed).is_err());
        assert!(open(&key, 2, 9, b"hdr", &sealed).is_err());
        assert!(open(&key, 1, 9, b"hdx", &sealed).is_err());
        let mut bad = sealed.clone();
        bad[0] ^= 1;
        assert_eq!(open(&key, 1, 9, b"hdr", &bad), Err(CryptoError::AeadTag));
    }
}
