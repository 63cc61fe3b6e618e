//! secp256k1 ECDSA with public-key recovery and Ethereum addresses.

use std::fmt;
use std::str::FromStr;

use k256::ecdsa::{RecoveryId, Signature, SigningKey, VerifyingKey};

use crate::error::{CryptoError, Result};
use crate::hash::{keccak256, Digest256};
use crate::rng::RandomSource;

pub const PUBLIC_KEY_LEN: usize = 64;
pub const ADDRESS_LEN: usize = 20;

/// Uncompressed secp256k1 point `x || y`, without the SEC1 `0x04` prefix.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EcdsaPublicKey([u8; PUBLIC_KEY_LEN]);

impl EcdsaPublicKey {
    /// Rejects wrong lengths and points that are not on the curve.
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "ECDSA public key",
            expected: PUBLIC_KEY_LEN,
            actual: bytes.len(),
        })?;
        let key = Self(arr);
        key.verifying_key()?;
        Ok(key)
    }

    fn from_verifying_key(vk: &VerifyingKey) -> Self {
        let point = vk.to_encoded_point(false);
        let mut arr = [0u8; PUBLIC_KEY_LEN];
        arr.copy_from_slice(&point.as_bytes()[1..]);
        Self(arr)
    }

    fn verifying_key(&self) -> Result<VerifyingKey> {
        let mut sec1 = [0u8; PUBLIC_KEY_LEN + 1];
        sec1[0] = 0x04;
        sec1[1..].copy_from_slice(&self.0);
        VerifyingKey::from_sec1_bytes(&sec1).map_err(|_| CryptoError::InvalidEncoding("secp256k1 point"))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn address(&self) -> Address {
        derive_address(self)
    }
}

impl fmt::Debug for EcdsaPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EcdsaPublicKey({}..)", hex::encode(&self.0[..8]))
    }
}

pub struct EcdsaKeyPair {
    secret: SigningKey,
    public: EcdsaPublicKey,
}

impl EcdsaKeyPair {
    /// Fails unless the scalar lies in `[1, n-1]`.
    pub fn from_secret_bytes(secret: &[u8; 32]) -> Result<Self> {
        let secret =
            SigningKey::from_bytes(secret.into()).map_err(|_| CryptoError::InvalidEncoding("secp256k1 scalar"))?;
        let public = EcdsaPublicKey::from_verifying_key(secret.verifying_key());
        Ok(Self { secret, public })
    }

    /// Draws candidate scalars from `source` until one is in range.
    pub fn generate(source: &mut dyn RandomSource) -> Self {
        loop {
            let mut candidate = [0u8; 32];
            source.fill_bytes(&mut candidate);
            if let Ok(pair) = Self::from_secret_bytes(&candidate) {
                return pair;
            }
        }
    }

    pub fn public(&self) -> &EcdsaPublicKey {
        &self.public
    }

    pub fn address(&self) -> Address {
        self.public.address()
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    /// RFC 6979 deterministic signature over a prehashed digest, low-s.
    pub fn sign(&self, digest: &Digest256) -> EcdsaSignature {
        let (sig, recid) = self
            .secret
            .sign_prehash_recoverable(digest.as_bytes())
            .expect("signing a 32-byte prehash cannot fail");
        let (sig, recid) = match sig.normalize_s() {
            Some(low) => (low, RecoveryId::new(!recid.is_y_odd(), recid.is_x_reduced())),
            None => (sig, recid),
        };
        let bytes = sig.to_bytes();
        EcdsaSignature {
            r: bytes[..32].try_into().unwrap(),
            s: bytes[32..].try_into().unwrap(),
            recovery_id: recid.to_byte(),
        }
    }
}

impl Clone for EcdsaKeyPair {
    fn clone(&self) -> Self {
        Self {
            secret: self.secret.clone(),
            public: self.public,
        }
    }
}

impl fmt::Debug for EcdsaKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EcdsaKeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EcdsaSignature {
    pub r: [u8; 32],
    pub s: [u8; 32],
    pub recovery_id: u8,
}

impl EcdsaSignature {
    /// `r || s || recovery_id`.
    pub fn to_bytes(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.recovery_id;
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 65 {
            return Err(CryptoError::InvalidLength {
                what: "ECDSA signature",
                expected: 65,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            r: bytes[..32].try_into().unwrap(),
            s: bytes[32..64].try_into().unwrap(),
            recovery_id: bytes[64],
        })
    }

    /// True when `r, s` are in `[1, n-1]`, `s` is in the low half and the
    /// recovery id is 0 or 1.
    pub fn is_well_formed(&self) -> bool {
        self.recovery_id <= 1
            && Signature::from_scalars(self.r, self.s).is_ok_and(|sig| sig.normalize_s().is_none())
    }
}

/// Recovers the signer's public key; fails for malformed or high-s signatures.
pub fn ecdsa_recover(digest: &Digest256, sig: &EcdsaSignature) -> Result<EcdsaPublicKey> {
    if sig.recovery_id > 1 {
        return Err(CryptoError::RecoveryFailed);
    }
    let signature = Signature::from_scalars(sig.r, sig.s).map_err(|_| CryptoError::RecoveryFailed)?;
    if signature.normalize_s().is_some() {
        return Err(CryptoError::RecoveryFailed);
    }
    let recid = RecoveryId::from_byte(sig.recovery_id).ok_or(CryptoError::RecoveryFailed)?;
    let vk = VerifyingKey::recover_from_prehash(digest.as_bytes(), &signature, recid)
        .map_err(|_| CryptoError::RecoveryFailed)?;
    Ok(EcdsaPublicKey::from_verifying_key(&vk))
}

pub fn ecdsa_sign(digest: &Digest256, key: &EcdsaKeyPair) -> EcdsaSignature {
    key.sign(digest)
}

/// A 20-byte Ethereum address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; ADDRESS_LEN]);

impl Address {
    pub const ZERO: Address = Address([0; ADDRESS_LEN]);

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; ADDRESS_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "address",
            expected: ADDRESS_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }

    /// Lowercase hex without `0x`.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address(0x{})", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl FromStr for Address {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(digits).map_err(|_| CryptoError::InvalidEncoding("address hex"))?;
        Self::from_slice(&bytes)
    }
}

/// Last 20 bytes of `keccak256(x || y)`.
pub fn derive_address(public: &EcdsaPublicKey) -> Address {
    let digest = keccak256(public.as_bytes());
    Address(digest.0[12..].try_into().unwrap())
}

/// [`derive_address`] over raw bytes; the key must be exactly 64 bytes.
pub fn derive_address_from_slice(public: &[u8]) -> Result<Address> {
    if public.len() != PUBLIC_KEY_LEN {
        return Err(CryptoError::InvalidLength {
            what: "ECDSA public key",
            expected: PUBLIC_KEY_LEN,
            actual: public.len(),
        });
    }
    let digest = keccak256(public);
    Ok(Address(digest.0[12..].try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ShakeStream;

    #[test]
    fn zero_and_order_scalars_rejected() {
        assert!(EcdsaKeyPair::from_secret_bytes(&[0; 32]).is_err());
        let n = hex::decode("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141").unwrap();
        assert!(EcdsaKeyPair::from_secret_bytes(&n.try_into().unwrap()).is_err());
    }

    #[test]
    fn recover_round_trip() {
        let mut rng = ShakeStream::new(b"ecdsa-unit");
        for i in 0u8..20 {
            let key = EcdsaKeyPair::generate(&mut rng);
            let digest = keccak256(&[i]);
            let sig = key.sign(&digest);
            assert!(sig.is_well_formed());
            assert_eq!(ecdsa_recover(&digest, &sig).unwrap(), *key.public());
        }
    }

    #[test]
    fn bad_recovery_id_fails() {
        let key = EcdsaKeyPair::from_secret_bytes(&[1; 32]).unwrap();
        let digest = keccak256(b"x");
        let mut sig = key.sign(&digest);
        sig.recovery_id = 2;
        assert_eq!(ecdsa_recover(&digest, &sig), Err(CryptoError::RecoveryFailed));
    }

    #[test]
    fn address_length_checked() {
        assert!(derive_address_from_slice(&[0u8; 65]).is_err());
        assert!(derive_address_from_slice(&[0u8; 63]).is_err());
    }
}
