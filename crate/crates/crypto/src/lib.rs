//! Byte-exact primitives shared by every layer of the post-quantum chain
//! stack: Keccak-256 and SHAKE256, secp256k1 ECDSA with recovery, Falcon-512,
//! KEMs, a keyed SHAKE MAC and an AEAD.

pub mod aead;
pub mod ecdsa;
pub mod error;
pub mod falcon;
mod ffi;
pub mod hash;
pub mod kat;
pub mod kem;
pub mod mac;
pub mod rng;

pub use ecdsa::{
    derive_address, derive_address_from_slice, ecdsa_recover, ecdsa_sign, Address, EcdsaKeyPair, EcdsaPublicKey,
    EcdsaSignature,
};
pub use error::{CryptoError, Result};
pub use falcon::{FalconKeyPair, FalconPublicKey, FalconSecretKey, FalconSignature, FalconVerifyError};
pub use hash::{keccak256, shake256, Digest256};
pub use kem::{KemAlgorithm, KemCiphertext, KemKeyPair, KemPublicKey, KemSecretKey, SharedSecret};
pub use rng::{NistKatDrbg, RandomSource, ShakeStream};
