//! Certificate signing requests, the legacy-certificate stub and dual-key
//! post-quantum certificates issued by a Falcon-signing CA.

use pqchain_crypto::ecdsa::{derive_address, ecdsa_recover, EcdsaKeyPair, EcdsaPublicKey, EcdsaSignature};
use pqchain_crypto::falcon::{self, FalconKeyPair, FalconPublicKey, FalconSignature, FalconVerifyError, SignatureEncoding};
use pqchain_crypto::{keccak256, Digest256, RandomSource};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, DecodeError, Reader, Writer};
use crate::did::{Did, DidError, DidRecord, Registry};

pub use pqchain_crypto::falcon::FALCON512_OID;
/// secp256k1 curve identifier.
pub const ECDSA_SECP256K1_OID: &str = "1.3.132.0.10";
pub const SALT_LEN: usize = 32;
pub const SERIAL_LEN: usize = 16;
/// Default certificate lifetime in logical seconds (one year).
pub const DEFAULT_VALIDITY: u64 = 365 * 24 * 3600;

const CSR_MAGIC: &[u8; 4] = b"PQR1";
const CERT_MAGIC: &[u8; 4] = b"PQX1";
const LEGACY_MAGIC: &[u8; 4] = b"LGC1";
const VERSION: u8 = 1;

pub const CERT_ARMOR: &str = "PQ CERTIFICATE";
pub const CSR_ARMOR: &str = "PQ CERTIFICATE REQUEST";
pub const LEGACY_ARMOR: &str = "LEGACY CERTIFICATE";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("AlgorithmMismatch: key material does not match {0}")]
    AlgorithmMismatch(String),
    #[error("InvalidSubject: {0}")]
    InvalidSubject(&'static str),
    #[error("LegacyInvalid: {0}")]
    LegacyInvalid(&'static str),
    #[error("SubjectMismatch: {0}")]
    SubjectMismatch(&'static str),
    #[error("CsrInvalid: {0}")]
    CsrInvalid(&'static str),
    #[error("{0}")]
    Registry(#[from] DidError),
    #[error("Malformed: {0}")]
    Decode(#[from] DecodeError),
    #[error("CertificateRejected: {0}")]
    Rejected(CertRejection),
    #[error("Aborted: issuance interrupted before registration")]
    Aborted,
}

impl CertError {
    pub fn code(&self) -> &'static str {
        match self {
            CertError::AlgorithmMismatch(_) => "AlgorithmMismatch",
            CertError::InvalidSubject(_) => "InvalidSubject",
            CertError::LegacyInvalid(_) => "LegacyInvalid",
            CertError::SubjectMismatch(_) => "SubjectMismatch",
            CertError::CsrInvalid(_) => "CsrInvalid",
            CertError::Registry(e) => e.code(),
            CertError::Decode(_) => "Malformed",
            CertError::Rejected(_) => "CertificateRejected",
            CertError::Aborted => "Aborted",
        }
    }
}

/// Why a signature check on a CSR failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SignatureFailure {
    #[error("malformed")]
    Malformed,
    #[error("invalid")]
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CertRejection {
    #[error("wrong algorithm OID")]
    WrongOid,
    #[error("not yet valid")]
    NotYetValid,
    #[error("expired")]
    Expired,
    #[error("malformed CA signature")]
    MalformedSignature,
    #[error("CA signature does not verify")]
    BadSignature,
    #[error("issuer is not the trusted CA")]
    UnknownIssuer,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubjectInfo {
    pub common_name: String,
    pub organization: String,
    pub country: String,
    pub did: Did,
}

impl SubjectInfo {
    pub fn new(common_name: &str, organization: &str, country: &str, did: Did) -> Result<Self, CertError> {
        let s = SubjectInfo {
            common_name: common_name.to_string(),
            organization: organization.to_string(),
            country: country.to_string(),
            did,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CertError> {
        if self.common_name.is_empty() {
            return Err(CertError::InvalidSubject("empty common name"));
        }
        Ok(())
    }

    fn write(&self, w: &mut Writer) {
        w.str(&self.common_name).str(&self.organization).str(&self.country).str(self.did.as_str());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let s = SubjectInfo {
            common_name: r.string()?,
            organization: r.string()?,
            country: r.string()?,
            did: Did::parse(&r.string()?).map_err(|_| DecodeError::Invalid("subject did"))?,
        };
        s.validate().map_err(|_| DecodeError::Invalid("subject"))?;
        Ok(s)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    /// Distinguished-name part, i.e. everything a legacy certificate carries.
    fn same_name(&self, other: &SubjectInfo) -> bool {
        self.common_name == other.common_name && self.organization == other.organization && self.country == other.country
    }
}

/// keccak256(canonical subject ‖ salt): proves the subject without revealing it.
pub fn subject_proof(subject: &SubjectInfo, salt: &[u8; SALT_LEN]) -> Digest256 {
    keccak256(&[subject.canonical_bytes().as_slice(), salt].concat())
}

pub enum KeyMaterial<'a> {
    Ecdsa(&'a EcdsaKeyPair),
    Falcon(&'a FalconKeyPair),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertSigningRequest {
    pub subject: SubjectInfo,
    pub algorithm_oid: String,
    pub public_key: Vec<u8>,
    pub self_signature: Vec<u8>,
}

fn ecdsa_check(digest: &Digest256, public: &[u8], sig: &[u8]) -> Result<(), SignatureFailure> {
    let public = EcdsaPublicKey::from_slice(public).map_err(|_| SignatureFailure::Malformed)?;
    let sig = EcdsaSignature::from_bytes(sig).map_err(|_| SignatureFailure::Malformed)?;
    if !sig.is_well_formed() {
        return Err(SignatureFailure::Malformed);
    }
    match ecdsa_recover(digest, &sig) {
        Ok(k) if k == public => Ok(()),
        _ => Err(SignatureFailure::Invalid),
    }
}

fn falcon_check(msg: &[u8], public: &[u8], sig: &[u8]) -> Result<(), SignatureFailure> {
    let public = FalconPublicKey::from_slice(public).map_err(|_| SignatureFailure::Malformed)?;
    let sig = FalconSignature::from_slice(sig).map_err(|_| SignatureFailure::Malformed)?;
    match falcon::verify(msg, &sig, &public) {
        Ok(()) => Ok(()),
        Err(FalconVerifyError::Malformed(_)) => Err(SignatureFailure::Malformed),
        Err(FalconVerifyError::Invalid) => Err(SignatureFailure::Invalid),
    }
}

impl CertSigningRequest {
    fn tbs(subject: &SubjectInfo, oid: &str, public_key: &[u8]) -> Vec<u8> {
        let mut w = Writer::with_header(CSR_MAGIC, VERSION);
        subject.write(&mut w);
        w.str(oid).bytes(public_key);
        w.finish()
    }

    pub fn to_be_signed(&self) -> Vec<u8> {
        Self::tbs(&self.subject, &self.algorithm_oid, &self.public_key)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.to_be_signed()).bytes(&self.self_signature);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (mut r, version) = Reader::with_header(bytes, CSR_MAGIC)?;
        if version != VERSION {
            return Err(DecodeError::UnknownVersion(version));
        }
        let csr = CertSigningRequest {
            subject: SubjectInfo::read(&mut r)?,
            algorithm_oid: r.string()?,
            public_key: r.bytes()?.to_vec(),
            self_signature: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(csr)
    }

    pub fn to_armor(&self) -> String {
        codec::armor(CSR_ARMOR, &self.encode())
    }

    pub fn from_armor(text: &str) -> Result<Self, DecodeError> {
        Self::decode(&codec::dearmor(CSR_ARMOR, text)?)
    }
}

pub fn build_csr(
    subject: SubjectInfo,
    key: KeyMaterial<'_>,
    algorithm_oid: &str,
    rng: &mut dyn RandomSource,
) -> Result<CertSigningRequest, CertError> {
    subject.validate()?;
    let (public_key, self_signature) = match (key, algorithm_oid) {
        (KeyMaterial::Ecdsa(k), ECDSA_SECP256K1_OID) => {
            let pk = k.public().as_bytes().to_vec();
            let sig = k.sign(&keccak256(&CertSigningRequest::tbs(&subject, algorithm_oid, &pk)));
            (pk, sig.to_bytes().to_vec())
        }
        (KeyMaterial::Falcon(k), FALCON512_OID) => {
            let pk = k.public.as_bytes().to_vec();
            let tbs = CertSigningRequest::tbs(&subject, algorithm_oid, &pk);
            let sig = falcon::sign(&tbs, &k.secret, rng, SignatureEncoding::Padded)
                .map_err(|_| CertError::AlgorithmMismatch(algorithm_oid.to_string()))?;
            (pk, sig.as_bytes().to_vec())
        }
        _ => return Err(CertError::AlgorithmMismatch(algorithm_oid.to_string())),
    };
    Ok(CertSigningRequest {
        subject,
        algorithm_oid: algorithm_oid.to_string(),
        public_key,
        self_signature,
    })
}

/// Accepts iff the self-signature verifies under the embedded key.
pub fn verify_csr(csr: &CertSigningRequest) -> Result<(), SignatureFailure> {
    let tbs = csr.to_be_signed();
    match csr.algorithm_oid.as_str() {
        ECDSA_SECP256K1_OID => ecdsa_check(&keccak256(&tbs), &csr.public_key, &csr.self_signature),
        FALCON512_OID => falcon_check(&tbs, &csr.public_key, &csr.self_signature),
        _ => Err(SignatureFailure::Malformed),
    }
}

/// A root the legacy-certificate stub accepts as issuer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrustedRoot {
    pub name: String,
    pub public_key: EcdsaPublicKey,
}

/// Stand-in for a traditional X.509 certificate: one level, ECDSA-signed by
/// a configured root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LegacyCertificate {
    pub subject: SubjectInfo,
    pub issuer: String,
    pub not_before: u64,
    pub not_after: u64,
    pub public_key: EcdsaPublicKey,
    pub issuer_signature: [u8; 65],
}

impl LegacyCertificate {
    fn tbs(subject: &SubjectInfo, issuer: &str, not_before: u64, not_after: u64, public_key: &EcdsaPublicKey) -> Vec<u8> {
        let mut w = Writer::with_header(LEGACY_MAGIC, VERSION);
        subject.write(&mut w);
        w.str(issuer).u64(not_before).u64(not_after).bytes(public_key.as_bytes());
        w.finish()
    }

    pub fn issue(
        subject: SubjectInfo,
        issuer: &str,
        root_key: &EcdsaKeyPair,
        not_before: u64,
        not_after: u64,
        public_key: EcdsaPublicKey,
    ) -> Self {
        let tbs = Self::tbs(&subject, issuer, not_before, not_after, &public_key);
        LegacyCertificate {
            issuer_signature: root_key.sign(&keccak256(&tbs)).to_bytes(),
            subject,
            issuer: issuer.to_string(),
            not_before,
            not_after,
            public_key,
        }
    }

    pub fn to_be_signed(&self) -> Vec<u8> {
        Self::tbs(&self.subject, &self.issuer, self.not_before, self.not_after, &self.public_key)
    }

    /// Stub chain validation: a known root signed it and `now` is in range.
    pub fn check(&self, roots: &[TrustedRoot], now: u64) -> Result<(), CertError> {
        let root = roots
            .iter()
            .find(|r| r.name == self.issuer)
            .ok_or(CertError::LegacyInvalid("issuer is not a trusted root"))?;
        ecdsa_check(&keccak256(&self.to_be_signed()), root.public_key.as_bytes(), &self.issuer_signature)
            .map_err(|_| CertError::LegacyInvalid("issuer signature"))?;
        if now < self.not_before {
            return Err(CertError::LegacyInvalid("not yet valid"));
        }
        if now >= self.not_after {
            return Err(CertError::LegacyInvalid("expired"));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.to_be_signed()).bytes(&self.issuer_signature);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (mut r, version) = Reader::with_header(bytes, LEGACY_MAGIC)?;
        if version != VERSION {
            return Err(DecodeError::UnknownVersion(version));
        }
        let subject = SubjectInfo::read(&mut r)?;
        let issuer = r.string()?;
        let not_before = r.u64()?;
        let not_after = r.u64()?;
        let public_key = EcdsaPublicKey::from_slice(r.fixed(64, "public key")?).map_err(|_| DecodeError::Invalid("public key"))?;
        let issuer_signature = r.fixed(65, "issuer signature")?.try_into().unwrap();
        r.finish()?;
        Ok(LegacyCertificate {
            subject,
            issuer,
            not_before,
            not_after,
            public_key,
            issuer_signature,
        })
    }

    pub fn to_armor(&self) -> String {
        codec::armor(LEGACY_ARMOR, &self.encode())
    }

    pub fn from_armor(text: &str) -> Result<Self, DecodeError> {
        Self::decode(&codec::dearmor(LEGACY_ARMOR, text)?)
    }
}

/// Binds one subject DID to an ECDSA key and a Falcon-512 key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PqCertificate {
    pub serial: [u8; SERIAL_LEN],
    pub subject: SubjectInfo,
    pub eth_public_key: EcdsaPublicKey,
    pub falcon_public_key: FalconPublicKey,
    pub falcon_algorithm_oid: String,
    pub not_before: u64,
    pub not_after: u64,
    pub issuer_did: Did,
    pub ca_falcon_signature: FalconSignature,
}

impl PqCertificate {
    pub fn to_be_signed(&self) -> Vec<u8> {
        let mut w = Writer::with_header(CERT_MAGIC, VERSION);
        w.raw(&self.serial);
        self.subject.write(&mut w);
        w.bytes(self.eth_public_key.as_bytes())
            .bytes(self.falcon_public_key.as_bytes())
            .str(&self.falcon_algorithm_oid)
            .u64(self.not_before)
            .u64(self.not_after)
            .str(self.issuer_did.as_str());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.to_be_signed()).bytes(self.ca_falcon_signature.as_bytes());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (mut r, version) = Reader::with_header(bytes, CERT_MAGIC)?;
        if version != VERSION {
            return Err(DecodeError::UnknownVersion(version));
        }
        let serial = r.array()?;
        let subject = SubjectInfo::read(&mut r)?;
        let eth_public_key =
            EcdsaPublicKey::from_slice(r.fixed(64, "eth public key")?).map_err(|_| DecodeError::Invalid("eth public key"))?;
        let falcon_public_key = FalconPublicKey::from_slice(r.fixed(falcon::PUBLIC_KEY_BYTES, "falcon public key")?)
            .map_err(|_| DecodeError::Invalid("falcon public key"))?;
        let falcon_algorithm_oid = r.string()?;
        let not_before = r.u64()?;
        let not_after = r.u64()?;
        let issuer_did = Did::parse(&r.string()?).map_err(|_| DecodeError::Invalid("issuer did"))?;
        let ca_falcon_signature =
            FalconSignature::from_slice(r.bytes()?).map_err(|_| DecodeError::BadLength("CA signature"))?;
        r.finish()?;
        Ok(PqCertificate {
            serial,
            subject,
            eth_public_key,
            falcon_public_key,
            falcon_algorithm_oid,
            not_before,
            not_after,
            issuer_did,
            ca_falcon_signature,
        })
    }

    pub fn to_armor(&self) -> String {
        codec::armor(CERT_ARMOR, &self.encode())
    }

    pub fn from_armor(text: &str) -> Result<Self, DecodeError> {
        Self::decode(&codec::dearmor(CERT_ARMOR, text)?)
    }

    pub fn did(&self) -> &Did {
        &self.subject.did
    }
}

pub fn encode_certificate(cert: &PqCertificate) -> Vec<u8> {
    cert.encode()
}

pub fn decode_certificate(bytes: &[u8]) -> Result<PqCertificate, DecodeError> {
    PqCertificate::decode(bytes)
}

/// Accepts iff the OID is right, `now` is inside the validity window and the
/// CA's Falcon signature verifies.
pub fn verify_certificate(cert: &PqCertificate, ca_falcon_public: &FalconPublicKey, now: u64) -> Result<(), CertRejection> {
    if cert.falcon_algorithm_oid != FALCON512_OID {
        return Err(CertRejection::WrongOid);
    }
    if now < cert.not_before {
        return Err(CertRejection::NotYetValid);
    }
    if now >= cert.not_after {
        return Err(CertRejection::Expired);
    }
    match falcon::verify(&cert.to_be_signed(), &cert.ca_falcon_signature, ca_falcon_public) {
        Ok(()) => Ok(()),
        Err(FalconVerifyError::Malformed(_)) => Err(CertRejection::MalformedSignature),
        Err(FalconVerifyError::Invalid) => Err(CertRejection::BadSignature),
    }
}

/// Where to abort an issuance, for atomicity tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssuanceFault {
    AfterChecks,
    AfterSigning,
}

#[derive(Clone, Debug)]
pub struct Issued {
    pub certificate: PqCertificate,
    pub record: DidRecord,
    /// Returned to the applicant so it can open `record.subject_proof`.
    pub salt: [u8; SALT_LEN],
}

/// Certificate authority state. Issuance is serialized through `&mut self`.
pub struct CertificateAuthority {
    did: Did,
    falcon: FalconKeyPair,
    trusted_roots: Vec<TrustedRoot>,
    validity: u64,
    issued: u64,
}

impl CertificateAuthority {
    /// The CA's DID is derived from its own ECDSA key, like any other subject.
    pub fn new(eth_public: &EcdsaPublicKey, falcon: FalconKeyPair, trusted_roots: Vec<TrustedRoot>) -> Self {
        CertificateAuthority {
            did: Did::for_key(eth_public),
            falcon,
            trusted_roots,
            validity: DEFAULT_VALIDITY,
            issued: 0,
        }
    }

    pub fn with_validity(mut self, validity: u64) -> Self {
        self.validity = validity;
        self
    }

    pub fn did(&self) -> &Did {
        &self.did
    }

    pub fn falcon_public(&self) -> &FalconPublicKey {
        &self.falcon.public
    }

    pub fn falcon_keys(&self) -> &FalconKeyPair {
        &self.falcon
    }

    pub fn trusted_roots(&self) -> &[TrustedRoot] {
        &self.trusted_roots
    }

    pub fn issued_count(&self) -> u64 {
        self.issued
    }

    /// Runs the three CA checks, signs, and registers the DID record. Either
    /// both the certificate and the registry entry are produced or nothing is.
    pub fn issue_certificate(
        &mut self,
        registry: &mut Registry,
        legacy: &LegacyCertificate,
        csr_eth: &CertSigningRequest,
        csr_falcon: &CertSigningRequest,
        now: u64,
        rng: &mut dyn RandomSource,
    ) -> Result<Issued, CertError> {
        self.issue_with_fault(registry, legacy, csr_eth, csr_falcon, now, rng, None)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn issue_with_fault(
        &mut self,
        registry: &mut Registry,
        legacy: &LegacyCertificate,
        csr_eth: &CertSigningRequest,
        csr_falcon: &CertSigningRequest,
        now: u64,
        rng: &mut dyn RandomSource,
        fault: Option<IssuanceFault>,
    ) -> Result<Issued, CertError> {
        // (i) the traditional certificate is valid
        legacy.check(&self.trusted_roots, now)?;

        // (ii) subjects agree
        if !legacy.subject.same_name(&csr_eth.subject) || !legacy.subject.same_name(&csr_falcon.subject) {
            return Err(CertError::SubjectMismatch("legacy certificate subject differs from CSR subject"));
        }
        if csr_eth.subject != csr_falcon.subject {
            return Err(CertError::SubjectMismatch("CSR subjects differ"));
        }

        // (iii) both CSRs are valid for the key they carry
        if csr_eth.algorithm_oid != ECDSA_SECP256K1_OID {
            return Err(CertError::CsrInvalid("ethereum CSR must carry a secp256k1 key"));
        }
        if csr_falcon.algorithm_oid != FALCON512_OID {
            return Err(CertError::CsrInvalid("post-quantum CSR must carry a Falcon-512 key"));
        }
        verify_csr(csr_eth).map_err(|_| CertError::CsrInvalid("ethereum CSR signature"))?;
        verify_csr(csr_falcon).map_err(|_| CertError::CsrInvalid("Falcon CSR signature"))?;

        let eth_public_key = EcdsaPublicKey::from_slice(&csr_eth.public_key).map_err(|_| CertError::CsrInvalid("eth key"))?;
        let falcon_public_key =
            FalconPublicKey::from_slice(&csr_falcon.public_key).map_err(|_| CertError::CsrInvalid("falcon key"))?;
        let subject = csr_eth.subject.clone();
        let controller = Did::with_method(subject.did.method(), &derive_address(&eth_public_key));
        if subject.did != controller {
            return Err(CertError::SubjectMismatch("subject DID is not derived from the ethereum key"));
        }
        if fault == Some(IssuanceFault::AfterChecks) {
            return Err(CertError::Aborted);
        }

        let mut serial = [0u8; SERIAL_LEN];
        rng.fill_bytes(&mut serial);
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let mut certificate = PqCertificate {
            serial,
            subject: subject.clone(),
            eth_public_key,
            falcon_public_key: falcon_public_key.clone(),
            falcon_algorithm_oid: FALCON512_OID.to_string(),
            not_before: now,
            not_after: now.saturating_add(self.validity),
            issuer_did: self.did.clone(),
            ca_falcon_signature: FalconSignature::from_slice(&[0u8; 42]).expect("placeholder"),
        };
        certificate.ca_falcon_signature =
            falcon::sign(&certificate.to_be_signed(), &self.falcon.secret, rng, SignatureEncoding::Padded)
                .expect("CA key is well formed");
        if fault == Some(IssuanceFault::AfterSigning) {
            return Err(CertError::Aborted);
        }

        let record = DidRecord {
            did: subject.did.clone(),
            eth_public_key,
            falcon_public_key,
            subject_proof: subject_proof(&subject, &salt),
            controller,
            registered_at: now,
        };
        registry.register(&self.did, record.clone())?;
        self.issued += 1;
        Ok(Issued {
            certificate,
            record,
            salt,
        })
    }
}
