#![allow(dead_code)]

use pqchain_core::cert::{
    build_csr, CertificateAuthority, KeyMaterial, LegacyCertificate, PqCertificate, SubjectInfo, TrustedRoot,
    ECDSA_SECP256K1_OID, FALCON512_OID,
};
use pqchain_core::did::{Did, Registry};
use pqchain_core::metatx::{sign_outer, MetaTransaction, WrapperParams, WRAPPER_GAS_LIMIT};
use pqchain_core::tx::{sign_inner, SignedTransaction, Transaction};
use pqchain_crypto::ecdsa::{Address, EcdsaKeyPair};
use pqchain_crypto::falcon::{self, FalconKeyPair};
use pqchain_crypto::{RandomSource, ShakeStream};
use ruint::aliases::U256;

pub const NOW: u64 = 1_700_000_000;
pub const CHAIN_ID: u64 = 648_529;

pub fn vector_lines(path: &str) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{path}: {e}"))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

pub fn core_vectors(name: &str) -> String {
    format!("{}/tests/vectors/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn crypto_vectors(name: &str) -> String {
    format!("{}/../crypto/tests/vectors/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub struct Identity {
    pub did: Did,
    pub ecdsa: EcdsaKeyPair,
    pub falcon: FalconKeyPair,
    pub account: EcdsaKeyPair,
    /// Absent for identities the CA never saw.
    pub certificate: Option<PqCertificate>,
}

pub struct Fixture {
    pub ca: CertificateAuthority,
    pub ca_eth: EcdsaKeyPair,
    pub registry: Registry,
    pub root: EcdsaKeyPair,
    pub rng: ShakeStream,
    pub hub: Address,
}

impl Fixture {
    pub fn new(seed: &[u8]) -> Self {
        let mut rng = ShakeStream::new(seed);
        let ca_eth = EcdsaKeyPair::generate(&mut rng);
        let ca_falcon = falcon::keygen(&mut rng).unwrap();
        let root = EcdsaKeyPair::generate(&mut rng);
        let roots = vec![TrustedRoot {
            name: "Test Root".into(),
            public_key: *root.public(),
        }];
        let ca = CertificateAuthority::new(ca_eth.public(), ca_falcon, roots);
        let registry = Registry::new(ca.did().clone());
        Fixture {
            ca,
            ca_eth,
            registry,
            root,
            rng,
            hub: pqchain_core::sim::relay_hub_address(),
        }
    }

    pub fn legacy_for(&self, subject: &SubjectInfo, key: &EcdsaKeyPair) -> LegacyCertificate {
        LegacyCertificate::issue(subject.clone(), "Test Root", &self.root, NOW - 3600, NOW + 86_400, *key.public())
    }

    /// Fresh keys that are not registered anywhere.
    pub fn unregistered(&mut self) -> Identity {
        let ecdsa = EcdsaKeyPair::generate(&mut self.rng);
        let falcon = falcon::keygen(&mut self.rng).unwrap();
        let account = EcdsaKeyPair::generate(&mut self.rng);
        let did = Did::for_key(ecdsa.public());
        Identity {
            did,
            ecdsa,
            falcon,
            account,
            certificate: None,
        }
    }

    pub fn enroll(&mut self, cn: &str) -> Identity {
        let ecdsa = EcdsaKeyPair::generate(&mut self.rng);
        let falcon = falcon::keygen(&mut self.rng).unwrap();
        let account = EcdsaKeyPair::generate(&mut self.rng);
        let did = Did::for_key(ecdsa.public());
        let subject = SubjectInfo::new(cn, "Test Org", "UY", did.clone()).unwrap();
        let legacy = self.legacy_for(&subject, &ecdsa);
        let csr_eth = build_csr(subject.clone(), KeyMaterial::Ecdsa(&ecdsa), ECDSA_SECP256K1_OID, &mut self.rng).unwrap();
        let csr_falcon = build_csr(subject, KeyMaterial::Falcon(&falcon), FALCON512_OID, &mut self.rng).unwrap();
        let issued = self
            .ca
            .issue_certificate(&mut self.registry, &legacy, &csr_eth, &csr_falcon, NOW, &mut self.rng)
            .unwrap();
        Identity {
            did,
            ecdsa,
            falcon,
            account,
            certificate: Some(issued.certificate),
        }
    }

    pub fn inner(&mut self, who: &Identity, nonce: u64) -> SignedTransaction {
        let mut data = vec![0u8; 24];
        self.rng.fill_bytes(&mut data);
        let tx = Transaction {
            nonce,
            gas_price: U256::from(1_000_000_000u64),
            gas_limit: 90_000,
            to: Some(Address([0x42; 20])),
            value: U256::from(12_345u64),
            data,
            chain_id: CHAIN_ID,
        };
        sign_inner(tx, &who.account)
    }

    pub fn params(nonce: u64) -> WrapperParams {
        WrapperParams {
            nonce,
            gas_price: U256::ZERO,
            gas_limit: WRAPPER_GAS_LIMIT,
            chain_id: CHAIN_ID,
        }
    }

    pub fn metatx(&mut self, who: &Identity, nonce: u64) -> MetaTransaction {
        let inner = self.inner(who, nonce);
        sign_outer(
            inner,
            &who.did,
            &who.falcon,
            &who.ecdsa,
            self.hub,
            &Self::params(nonce),
            &self.registry,
            &mut self.rng,
        )
        .unwrap()
    }
}
