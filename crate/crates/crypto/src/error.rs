use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("{what}: expected {expected} bytes, got {actual}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("output length must be at least one byte")]
    ZeroLength,
    #[error("invalid {0}")]
    InvalidEncoding(&'static str),
    #[error("ECDSA public key recovery failed")]
    RecoveryFailed,
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("{0} mismatch between key and ciphertext")]
    AlgorithmMismatch(&'static str),
    #[error("{0} failed in the reference implementation")]
    Reference(&'static str),
    #[error("authenticated decryption failed")]
    AeadTag,
}

pub type Result<T, E = CryptoError> = std::result::Result<T, E>;
