//! File plumbing: path resolution, atomic writes, key files, error mapping.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use pqchain_core::cert::{CertificateAuthority, TrustedRoot};
use pqchain_core::did::{Did, Registry};
use pqchain_core::entropy::EntropySource;
use pqchain_crypto::ecdsa::EcdsaKeyPair;
use pqchain_crypto::falcon::{FalconKeyPair, FalconPublicKey, FalconSecretKey};
use pqchain_crypto::ShakeStream;
use serde::{Deserialize, Serialize};

/// Relative paths are resolved against this directory when it is set.
pub const ROOT_ENV: &str = "PQCHAIN_ROOT";

#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub message: String,
    pub usage: bool,
}

impl Failure {
    pub fn domain(code: &str, message: impl Display) -> Self {
        Failure {
            code: code.to_string(),
            message: message.to_string(),
            usage: false,
        }
    }

    pub fn usage(message: impl Display) -> Self {
        Failure {
            code: "UsageError".into(),
            message: message.to_string(),
            usage: true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.usage {
            2
        } else {
            1
        }
    }
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::domain(e.code(), e)
            }
        }
    )*};
}

coded!(
    pqchain_core::cert::CertError,
    pqchain_core::did::DidError,
    pqchain_core::entropy::EntropyError,
    pqchain_core::tunnel::TunnelError,
    pqchain_core::metatx::MetaTxError,
    pqchain_core::sim::SimError
);

impl From<pqchain_core::codec::DecodeError> for Failure {
    fn from(e: pqchain_core::codec::DecodeError) -> Self {
        Failure::domain("Malformed", e)
    }
}

impl From<pqchain_crypto::CryptoError> for Failure {
    fn from(e: pqchain_crypto::CryptoError) -> Self {
        Failure::domain("Malformed", e)
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    let p = resolve(path);
    std::fs::read_to_string(&p).map_err(|e| Failure::usage(format!("cannot read {}: {e}", p.display())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let p = resolve(path);
    let dir = match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Failure::domain("IoError", format!("{}: {e}", p.display()));
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&p).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn parse_hex(what: &str, s: &str) -> Result<Vec<u8>> {
    hex::decode(s.trim().strip_prefix("0x").unwrap_or(s.trim())).map_err(|_| Failure::usage(format!("{what}: invalid hex")))
}

/// Seeded runs are reproducible; otherwise the stream is keyed from the OS.
pub fn rng(seed: Option<u64>, label: &str) -> Result<ShakeStream> {
    Ok(match seed {
        Some(s) => ShakeStream::new(&[label.as_bytes(), &s.to_be_bytes()].concat()),
        None => ShakeStream::new(&EntropySource::live("cli", false).generate(48)?.bytes),
    })
}

fn ecdsa_key(what: &str, s: &str) -> Result<EcdsaKeyPair> {
    let b: [u8; 32] = parse_hex(what, s)?
        .try_into()
        .map_err(|_| Failure::usage(format!("{what}: expected 32 bytes")))?;
    Ok(EcdsaKeyPair::from_secret_bytes(&b)?)
}

fn falcon(public: &str, secret: &str) -> Result<FalconKeyPair> {
    Ok(FalconKeyPair {
        public: FalconPublicKey::from_slice(&parse_hex("falcon_public", public)?)?,
        secret: FalconSecretKey::from_slice(&parse_hex("falcon_secret", secret)?)?,
    })
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A node's long-term keys: the DID key, its Falcon key and an end-user
/// account key for inner transactions.
#[derive(Serialize, Deserialize)]
pub struct IdentityFile {
    pub did: String,
    pub ecdsa_secret: String,
    pub falcon_public: String,
    pub falcon_secret: String,
    pub account_secret: String,
}

pub struct Identity {
    pub did: Did,
    pub ecdsa: EcdsaKeyPair,
    pub falcon: FalconKeyPair,
    pub account: EcdsaKeyPair,
}

impl Identity {
    pub fn to_file(&self) -> IdentityFile {
        IdentityFile {
            did: self.did.to_string(),
            ecdsa_secret: hex::encode(self.ecdsa.secret_bytes()),
            falcon_public: hex::encode(self.falcon.public.as_bytes()),
            falcon_secret: hex::encode(self.falcon.secret.as_bytes()),
            account_secret: hex::encode(self.account.secret_bytes()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: IdentityFile = load_json(path)?;
        let ecdsa = ecdsa_key("ecdsa_secret", &f.ecdsa_secret)?;
        let did = Did::parse(&f.did)?;
        if did != Did::for_key(ecdsa.public()) {
            return Err(Failure::domain("KeyMismatch", "identity DID does not match its ECDSA key"));
        }
        Ok(Identity {
            did,
            ecdsa,
            falcon: falcon(&f.falcon_public, &f.falcon_secret)?,
            account: ecdsa_key("account_secret", &f.account_secret)?,
        })
    }
}

/// CA keys plus the stub legacy root used to vouch for applicants.
#[derive(Serialize, Deserialize)]
pub struct CaFile {
    pub did: String,
    pub eth_secret: String,
    pub falcon_public: String,
    pub falcon_secret: String,
    pub root_name: String,
    pub root_secret: String,
}

pub struct Ca {
    pub authority: CertificateAuthority,
    pub root_name: String,
    pub root: EcdsaKeyPair,
}

impl Ca {
    pub fn load(path: &Path) -> Result<Self> {
        let f: CaFile = load_json(path)?;
        let eth = ecdsa_key("eth_secret", &f.eth_secret)?;
        let root = ecdsa_key("root_secret", &f.root_secret)?;
        let roots = vec![TrustedRoot {
            name: f.root_name.clone(),
            public_key: *root.public(),
        }];
        let authority = CertificateAuthority::new(eth.public(), falcon(&f.falcon_public, &f.falcon_secret)?, roots);
        if authority.did().as_str() != f.did {
            return Err(Failure::domain("KeyMismatch", "CA DID does not match its ECDSA key"));
        }
        Ok(Ca {
            authority,
            root_name: f.root_name,
            root,
        })
    }

    pub fn load_registry(&self, path: &Path) -> Result<Registry> {
        Ok(Registry::from_snapshot(self.authority.did().clone(), &read_text(path)?)?)
    }
}

/// Prints one JSON document: a single line unless `pretty`.
pub fn emit(value: &serde_json::Value, pretty: bool) {
    if pretty {
        println!("{}", serde_json::to_string_pretty(value).expect("json"));
    } else {
        println!("{value}");
    }
}
