mod common;

use common::{Fixture, NOW};
use pqchain_core::cert::*;
use pqchain_core::did::Did;
use pqchain_crypto::ecdsa::EcdsaKeyPair;
use pqchain_crypto::falcon;

struct Applicant {
    ecdsa: EcdsaKeyPair,
    falcon: falcon::FalconKeyPair,
    subject: SubjectInfo,
}

fn applicant(fx: &mut Fixture, cn: &str) -> Applicant {
    let ecdsa = EcdsaKeyPair::generate(&mut fx.rng);
    let falcon = falcon::keygen(&mut fx.rng).unwrap();
    let subject = SubjectInfo::new(cn, "Org", "UY", Did::for_key(ecdsa.public())).unwrap();
    Applicant { ecdsa, falcon, subject }
}

fn csrs(fx: &mut Fixture, a: &Applicant) -> (CertSigningRequest, CertSigningRequest) {
    (
        build_csr(a.subject.clone(), KeyMaterial::Ecdsa(&a.ecdsa), ECDSA_SECP256K1_OID, &mut fx.rng).unwrap(),
        build_csr(a.subject.clone(), KeyMaterial::Falcon(&a.falcon), FALCON512_OID, &mut fx.rng).unwrap(),
    )
}

fn issue(fx: &mut Fixture, legacy: &LegacyCertificate, e: &CertSigningRequest, f: &CertSigningRequest) -> Result<Issued, CertError> {
    fx.ca.issue_certificate(&mut fx.registry, legacy, e, f, NOW, &mut fx.rng)
}

#[test]
fn issued_certificate_verifies_and_round_trips() {
    let mut fx = Fixture::new(b"cert-rt");
    let a = applicant(&mut fx, "alice");
    let (e, f) = csrs(&mut fx, &a);
    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);
    let issued = issue(&mut fx, &legacy, &e, &f).unwrap();
    let cert = &issued.certificate;
    verify_certificate(cert, fx.ca.falcon_public(), NOW).unwrap();
    assert_eq!(PqCertificate::decode(&cert.encode()).unwrap(), *cert);
    assert_eq!(PqCertificate::from_armor(&cert.to_armor()).unwrap(), *cert);
    assert_eq!(cert.falcon_public_key.as_bytes().len(), falcon::PUBLIC_KEY_BYTES);

    let mut longer = cert.encode();
    longer.push(0);
    assert!(PqCertificate::decode(&longer).is_err());
    assert!(PqCertificate::decode(&cert.encode()[..100]).is_err());

    let record = fx.registry.resolve(cert.did()).unwrap();
    assert_eq!(record.eth_public_key, cert.eth_public_key);
    assert_eq!(record.falcon_public_key, cert.falcon_public_key);
    assert_eq!(record.subject_proof, subject_proof(&a.subject, &issued.salt));
    assert_eq!(fx.ca.issued_count(), 1);
}

#[test]
fn validity_window_and_signature() {
    let mut fx = Fixture::new(b"cert-window");
    let id = fx.enroll("bob");
    let cert = id.certificate.unwrap();
    let ca = fx.ca.falcon_public().clone();
    assert_eq!(verify_certificate(&cert, &ca, NOW - 1), Err(CertRejection::NotYetValid));
    assert_eq!(verify_certificate(&cert, &ca, cert.not_after), Err(CertRejection::Expired));

    let mut renamed = cert.clone();
    renamed.subject.common_name = "mallory".into();
    assert_eq!(verify_certificate(&renamed, &ca, NOW), Err(CertRejection::BadSignature));

    let mut oid = cert.clone();
    oid.falcon_algorithm_oid = ECDSA_SECP256K1_OID.into();
    assert_eq!(verify_certificate(&oid, &ca, NOW), Err(CertRejection::WrongOid));

    let other = falcon::keygen(&mut fx.rng).unwrap();
    assert_eq!(verify_certificate(&cert, &other.public, NOW), Err(CertRejection::BadSignature));
}

#[test]
fn mismatched_subjects_rejected() {
    let mut fx = Fixture::new(b"cert-subject");
    let a = applicant(&mut fx, "alice");
    let (e, f) = csrs(&mut fx, &a);
    let other = SubjectInfo::new("eve", "Org", "UY", a.subject.did.clone()).unwrap();
    let legacy = fx.legacy_for(&other, &a.ecdsa);
    assert_eq!(issue(&mut fx, &legacy, &e, &f).unwrap_err().code(), "SubjectMismatch");

    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);
    let f2 = build_csr(other, KeyMaterial::Falcon(&a.falcon), FALCON512_OID, &mut fx.rng).unwrap();
    assert_eq!(issue(&mut fx, &legacy, &e, &f2).unwrap_err().code(), "SubjectMismatch");
    assert!(fx.registry.is_empty());
}

#[test]
fn did_must_derive_from_eth_key() {
    let mut fx = Fixture::new(b"cert-did");
    let mut a = applicant(&mut fx, "alice");
    let stranger = EcdsaKeyPair::generate(&mut fx.rng);
    a.subject.did = Did::for_key(stranger.public());
    let (e, f) = csrs(&mut fx, &a);
    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);
    assert_eq!(issue(&mut fx, &legacy, &e, &f).unwrap_err().code(), "SubjectMismatch");
}

#[test]
fn bad_csrs_rejected() {
    let mut fx = Fixture::new(b"cert-csr");
    let a = applicant(&mut fx, "alice");
    let (e, f) = csrs(&mut fx, &a);
    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);

    assert_eq!(issue(&mut fx, &legacy, &f, &e).unwrap_err().code(), "CsrInvalid");

    let mut forged = f.clone();
    forged.public_key = falcon::keygen(&mut fx.rng).unwrap().public.as_bytes().to_vec();
    assert_eq!(verify_csr(&forged), Err(SignatureFailure::Invalid));
    assert_eq!(issue(&mut fx, &legacy, &e, &forged).unwrap_err().code(), "CsrInvalid");

    assert!(build_csr(a.subject.clone(), KeyMaterial::Ecdsa(&a.ecdsa), FALCON512_OID, &mut fx.rng).is_err());
    assert_eq!(CertSigningRequest::from_armor(&e.to_armor()).unwrap(), e);
}

#[test]
fn legacy_certificate_checks() {
    let mut fx = Fixture::new(b"cert-legacy");
    let a = applicant(&mut fx, "alice");
    let (e, f) = csrs(&mut fx, &a);
    let rogue_root = EcdsaKeyPair::generate(&mut fx.rng);
    let forged = LegacyCertificate::issue(a.subject.clone(), "Test Root", &rogue_root, NOW - 10, NOW + 10, *a.ecdsa.public());
    assert_eq!(issue(&mut fx, &forged, &e, &f).unwrap_err().code(), "LegacyInvalid");
    let expired = LegacyCertificate::issue(a.subject.clone(), "Test Root", &fx.root, NOW - 10, NOW, *a.ecdsa.public());
    assert_eq!(issue(&mut fx, &expired, &e, &f).unwrap_err().code(), "LegacyInvalid");
    let unknown = LegacyCertificate::issue(a.subject.clone(), "Other Root", &fx.root, NOW - 10, NOW + 10, *a.ecdsa.public());
    assert_eq!(issue(&mut fx, &unknown, &e, &f).unwrap_err().code(), "LegacyInvalid");
    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);
    assert_eq!(LegacyCertificate::from_armor(&legacy.to_armor()).unwrap(), legacy);
}

#[test]
fn issuance_is_atomic() {
    let mut fx = Fixture::new(b"cert-atomic");
    let a = applicant(&mut fx, "alice");
    let (e, f) = csrs(&mut fx, &a);
    let legacy = fx.legacy_for(&a.subject, &a.ecdsa);
    for fault in [IssuanceFault::AfterChecks, IssuanceFault::AfterSigning] {
        let before = fx.registry.state_hash();
        let err = fx
            .ca
            .issue_with_fault(&mut fx.registry, &legacy, &e, &f, NOW, &mut fx.rng, Some(fault))
            .unwrap_err();
        assert_eq!(err.code(), "Aborted");
        assert_eq!(fx.registry.state_hash(), before);
        assert_eq!(fx.ca.issued_count(), 0);
    }
    issue(&mut fx, &legacy, &e, &f).unwrap();
    // A second issuance draws a new salt, so the registry refuses to rewrite the record.
    assert_eq!(issue(&mut fx, &legacy, &e, &f).unwrap_err().code(), "DuplicateDid");
    assert_eq!(fx.registry.len(), 1);
}

#[test]
fn empty_common_name_rejected() {
    let did = Did::parse("did:lac:00112233445566778899aabbccddeeff00112233").unwrap();
    assert_eq!(SubjectInfo::new("", "o", "c", did).unwrap_err().code(), "InvalidSubject");
}
