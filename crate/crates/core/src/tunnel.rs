//! Post-quantum point-to-point tunnel: a signed-KEM handshake authenticated
//! with PQ certificates, followed by an AEAD record layer that carries inner
//! node traffic unmodified.
//!
//! ```text
//! 1  I -> R  HELLO        version, aead, kem, cert_I, nonce_I
//! 2  R -> I  RESPONSE     cert_R, nonce_R, kem_pk, Falcon_R(transcript)
//! 3  I -> R  KEY_EXCHANGE kem_ct, Falcon_I(transcript)
//! 4  R -> I  FINISHED     MAC(finished_key, "responder" ‖ th)
//!    I -> R  FINISHED     MAC(finished_key, "initiator" ‖ th)
//! ```

use std::collections::BTreeSet;

use pqchain_crypto::aead::{self, AeadKey, AEAD_ALGORITHM, TAG_LEN};
use pqchain_crypto::falcon::{self, FalconKeyPair, FalconPublicKey, FalconSignature, SignatureEncoding};
use pqchain_crypto::hash::shake256_concat;
use pqchain_crypto::kem::{kem_decap, kem_encap, kem_keygen, KemAlgorithm, KemCiphertext, KemKeyPair, KemPublicKey};
use pqchain_crypto::mac::{mac, verify_mac, MAC_LEN};
use pqchain_crypto::{Digest256, RandomSource};
use thiserror::Error;
use zeroize::Zeroizing;

use crate::cert::{verify_certificate, CertRejection, PqCertificate};
use crate::codec::{DecodeError, Reader, Writer};
use crate::did::Did;
use crate::wire::{kind, Frame, Link};

pub const PROTOCOL_VERSION: u8 = 1;
pub const DEFAULT_KEM: KemAlgorithm = KemAlgorithm::MlKem768;
/// Logical seconds allowed for the whole handshake.
pub const DEFAULT_HANDSHAKE_TIMEOUT: u64 = 10;
/// Sessions older than this are renegotiated.
pub const DEFAULT_MAX_AGE: u64 = 3600;
const NONCE_LEN: usize = 32;
const DIR_INITIATOR: u64 = 1;
const DIR_RESPONDER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TunnelError {
    #[error("CertificateRejected: {0}")]
    CertificateRejected(String),
    #[error("SignatureInvalid: transcript signature did not verify")]
    SignatureInvalid,
    #[error("ConfirmFailed: key confirmation mismatch")]
    ConfirmFailed,
    #[error("Timeout: handshake deadline passed")]
    Timeout,
    #[error("ReplayOrReorder: expected record {expected}, got {got}")]
    ReplayOrReorder { expected: u64, got: u64 },
    #[error("TagInvalid: record authentication failed; session closed")]
    TagInvalid,
    #[error("SessionClosed")]
    SessionClosed,
    #[error("Malformed: {0}")]
    Malformed(&'static str),
    #[error("Unsupported: {0}")]
    Unsupported(&'static str),
}

impl TunnelError {
    pub fn code(&self) -> &'static str {
        match self {
            TunnelError::CertificateRejected(_) => "CertificateRejected",
            TunnelError::SignatureInvalid => "SignatureInvalid",
            TunnelError::ConfirmFailed => "ConfirmFailed",
            TunnelError::Timeout => "Timeout",
            TunnelError::ReplayOrReorder { .. } => "ReplayOrReorder",
            TunnelError::TagInvalid => "TagInvalid",
            TunnelError::SessionClosed => "SessionClosed",
            TunnelError::Malformed(_) => "Malformed",
            TunnelError::Unsupported(_) => "Unsupported",
        }
    }
}

impl From<DecodeError> for TunnelError {
    fn from(_: DecodeError) -> Self {
        TunnelError::Malformed("handshake message")
    }
}

/// Who a node is, and what it trusts.
#[derive(Clone)]
pub struct TunnelConfig {
    pub certificate: PqCertificate,
    pub falcon: FalconKeyPair,
    pub ca_did: Did,
    pub ca_public: FalconPublicKey,
    pub allow_list: BTreeSet<Did>,
    pub kem: KemAlgorithm,
    pub handshake_timeout: u64,
    pub max_age: u64,
}

impl TunnelConfig {
    pub fn new(
        certificate: PqCertificate,
        falcon: FalconKeyPair,
        ca_did: Did,
        ca_public: FalconPublicKey,
        allow_list: impl IntoIterator<Item = Did>,
    ) -> Self {
        TunnelConfig {
            certificate,
            falcon,
            ca_did,
            ca_public,
            allow_list: allow_list.into_iter().collect(),
            kem: DEFAULT_KEM,
            handshake_timeout: DEFAULT_HANDSHAKE_TIMEOUT,
            max_age: DEFAULT_MAX_AGE,
        }
    }

    pub fn did(&self) -> &Did {
        self.certificate.did()
    }

    fn check_peer(&self, cert: &PqCertificate, now: u64) -> Result<(), TunnelError> {
        if cert.issuer_did != self.ca_did {
            return Err(TunnelError::CertificateRejected("issuer is not the trusted CA".into()));
        }
        verify_certificate(cert, &self.ca_public, now).map_err(|e: CertRejection| TunnelError::CertificateRejected(e.to_string()))?;
        if !self.allow_list.contains(cert.did()) {
            return Err(TunnelError::CertificateRejected(format!("{} is not on the allow-list", cert.did())));
        }
        Ok(())
    }

    fn sign(&self, label: &[u8], th: &Digest256, rng: &mut dyn RandomSource) -> FalconSignature {
        falcon::sign(&[label, th.as_bytes()].concat(), &self.falcon.secret, rng, SignatureEncoding::Padded)
            .expect("own Falcon key is well formed")
    }
}

fn check_signature(label: &[u8], th: &Digest256, sig: &[u8], public: &FalconPublicKey) -> Result<(), TunnelError> {
    let sig = FalconSignature::from_slice(sig).map_err(|_| TunnelError::SignatureInvalid)?;
    falcon::verify(&[label, th.as_bytes()].concat(), &sig, public).map_err(|_| TunnelError::SignatureInvalid)
}

fn transcript(parts: &[&[u8]]) -> Digest256 {
    pqchain_crypto::hash::keccak256_concat(parts.iter().copied())
}

const RESPONDER_SIG: &[u8] = b"pqchain/tunnel/responder-signature";
const INITIATOR_SIG: &[u8] = b"pqchain/tunnel/initiator-signature";
const RESPONDER_FINISHED: &[u8] = b"pqchain/tunnel/responder-finished";
const INITIATOR_FINISHED: &[u8] = b"pqchain/tunnel/initiator-finished";

struct KeySchedule {
    initiator_to_responder: AeadKey,
    responder_to_initiator: AeadKey,
    finished: Zeroizing<Vec<u8>>,
}

/// Traffic keys = SHAKE256(ss ‖ th, 64) split per direction; the finished
/// key is derived separately so confirmation tags reveal nothing about
/// traffic keys.
fn key_schedule(ss: &[u8], th: &Digest256) -> KeySchedule {
    let okm = Zeroizing::new(shake256_concat([ss, th.as_bytes()], 64).expect("nonzero"));
    let finished = Zeroizing::new(shake256_concat([b"pqchain/tunnel/finished".as_slice(), ss, th.as_bytes()], 32).expect("nonzero"));
    KeySchedule {
        initiator_to_responder: AeadKey::from_slice(&okm[..32]).unwrap(),
        responder_to_initiator: AeadKey::from_slice(&okm[32..]).unwrap(),
        finished,
    }
}

fn expect(frame: &Frame, k: u8) -> Result<(), TunnelError> {
    if frame.kind == kind::TUNNEL_ALERT {
        return Err(TunnelError::Malformed("peer aborted"));
    }
    if frame.kind != k {
        return Err(TunnelError::Malformed("unexpected message type"));
    }
    Ok(())
}

fn check_deadline(now: u64, deadline: u64) -> Result<(), TunnelError> {
    if now > deadline {
        Err(TunnelError::Timeout)
    } else {
        Ok(())
    }
}

/// Frame sent to the peer when a handshake aborts.
pub fn alert(err: &TunnelError) -> Frame {
    Frame::new(kind::TUNNEL_ALERT, err.code().as_bytes().to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

pub struct InitiatorHello {
    config: TunnelConfig,
    hello: Vec<u8>,
    deadline: u64,
}

pub struct ResponderWaitKeyExchange {
    config: TunnelConfig,
    peer: PqCertificate,
    transcript: Vec<u8>,
    kem: KemKeyPair,
    deadline: u64,
}

pub struct InitiatorWaitFinished {
    config: TunnelConfig,
    peer: PqCertificate,
    keys: KeySchedule,
    th: Digest256,
    deadline: u64,
}

pub struct ResponderWaitFinished {
    config: TunnelConfig,
    peer: PqCertificate,
    keys: KeySchedule,
    th: Digest256,
    deadline: u64,
}

/// Message 1.
pub fn initiate(config: &TunnelConfig, rng: &mut dyn RandomSource, now: u64) -> (InitiatorHello, Frame) {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut w = Writer::new();
    w.u8(PROTOCOL_VERSION)
        .str(AEAD_ALGORITHM)
        .u8(config.kem.code())
        .bytes(&config.certificate.encode())
        .raw(&nonce);
    let frame = Frame::new(kind::TUNNEL_HELLO, w.finish());
    let state = InitiatorHello {
        config: config.clone(),
        hello: frame.encode(),
        deadline: now + config.handshake_timeout,
    };
    (state, frame)
}

/// Message 2: check the initiator, then answer with our certificate, an
/// ephemeral KEM key and a signature over the transcript so far.
pub fn respond(
    config: &TunnelConfig,
    hello: &Frame,
    rng: &mut dyn RandomSource,
    now: u64,
) -> Result<(ResponderWaitKeyExchange, Frame), TunnelError> {
    expect(hello, kind::TUNNEL_HELLO)?;
    let mut r = Reader::new(&hello.payload);
    if r.u8()? != PROTOCOL_VERSION {
        return Err(TunnelError::Unsupported("protocol version"));
    }
    if r.string()? != AEAD_ALGORITHM {
        return Err(TunnelError::Unsupported("AEAD algorithm"));
    }
    let kem = KemAlgorithm::from_code(r.u8()?).map_err(|_| TunnelError::Unsupported("KEM"))?;
    let peer = PqCertificate::decode(r.bytes()?).map_err(|_| TunnelError::CertificateRejected("undecodable certificate".into()))?;
    let _nonce: [u8; NONCE_LEN] = r.array()?;
    r.finish()?;
    config.check_peer(&peer, now)?;

    let kem_keys = kem_keygen(kem, rng).map_err(|_| TunnelError::Unsupported("KEM"))?;
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut body = Writer::new();
    body.bytes(&config.certificate.encode()).raw(&nonce).bytes(kem_keys.public.as_bytes());
    let body = body.finish();
    let hello_bytes = hello.encode();
    let th = transcript(&[&hello_bytes, &body]);
    let sig = config.sign(RESPONDER_SIG, &th, rng);
    let mut w = Writer::new();
    w.raw(&body).bytes(sig.as_bytes());
    let frame = Frame::new(kind::TUNNEL_RESPONSE, w.finish());
    let state = ResponderWaitKeyExchange {
        config: config.clone(),
        peer,
        transcript: [hello_bytes, frame.encode()].concat(),
        kem: kem_keys,
        deadline: now + config.handshake_timeout,
    };
    Ok((state, frame))
}

impl InitiatorHello {
    /// Message 3: verify the responder, encapsulate, sign.
    pub fn on_response(
        self,
        response: &Frame,
        rng: &mut dyn RandomSource,
        now: u64,
    ) -> Result<(InitiatorWaitFinished, Frame), TunnelError> {
        check_deadline(now, self.deadline)?;
        expect(response, kind::TUNNEL_RESPONSE)?;
        let mut r = Reader::new(&response.payload);
        let peer = PqCertificate::decode(r.bytes()?).map_err(|_| TunnelError::CertificateRejected("undecodable certificate".into()))?;
        let _nonce: [u8; NONCE_LEN] = r.array()?;
        let kem_pk_bytes = r.bytes()?;
        let body_len = response.payload.len() - r.remaining();
        let sig = r.bytes()?;
        r.finish()?;
        self.config.check_peer(&peer, now)?;
        let th = transcript(&[&self.hello, &response.payload[..body_len]]);
        check_signature(RESPONDER_SIG, &th, sig, &peer.falcon_public_key)?;

        let kem_pk = KemPublicKey::from_bytes(self.config.kem, kem_pk_bytes).map_err(|_| TunnelError::Malformed("KEM public key"))?;
        let (ct, ss) = kem_encap(&kem_pk, rng).map_err(|_| TunnelError::Malformed("KEM public key"))?;
        let mut body = Writer::new();
        body.bytes(ct.as_bytes());
        let body = body.finish();
        let response_bytes = response.encode();
        let th3 = transcript(&[&self.hello, &response_bytes, &body]);
        let sig = self.config.sign(INITIATOR_SIG, &th3, rng);
        let mut w = Writer::new();
        w.raw(&body).bytes(sig.as_bytes());
        let frame = Frame::new(kind::TUNNEL_KEY_EXCHANGE, w.finish());
        let th = transcript(&[&self.hello, &response_bytes, &frame.encode()]);
        let state = InitiatorWaitFinished {
            keys: key_schedule(ss.as_bytes(), &th),
            config: self.config,
            peer,
            th,
            deadline: self.deadline,
        };
        Ok((state, frame))
    }
}

impl ResponderWaitKeyExchange {
    /// Checks the initiator's signature, decapsulates and sends the
    /// responder's finished message.
    pub fn on_key_exchange(self, frame: &Frame, now: u64) -> Result<(ResponderWaitFinished, Frame), TunnelError> {
        check_deadline(now, self.deadline)?;
        expect(frame, kind::TUNNEL_KEY_EXCHANGE)?;
        let mut r = Reader::new(&frame.payload);
        let ct_bytes = r.bytes()?;
        let body_len = frame.payload.len() - r.remaining();
        let sig = r.bytes()?;
        r.finish()?;
        let th3 = transcript(&[&self.transcript, &frame.payload[..body_len]]);
        check_signature(INITIATOR_SIG, &th3, sig, &self.peer.falcon_public_key)?;

        let ct = KemCiphertext::from_bytes(self.kem.public.algorithm(), ct_bytes).map_err(|_| TunnelError::Malformed("KEM ciphertext"))?;
        let ss = kem_decap(&ct, &self.kem.secret).map_err(|_| TunnelError::ConfirmFailed)?;
        let th = transcript(&[&self.transcript, &frame.encode()]);
        let keys = key_schedule(ss.as_bytes(), &th);
        let tag = mac(&keys.finished, &[RESPONDER_FINISHED, th.as_bytes()].concat());
        let state = ResponderWaitFinished {
            config: self.config,
            peer: self.peer,
            keys,
            th,
            deadline: self.deadline,
        };
        Ok((state, Frame::new(kind::TUNNEL_FINISHED, tag.to_vec())))
    }
}

fn check_finished(frame: &Frame, key: &[u8], label: &[u8], th: &Digest256) -> Result<(), TunnelError> {
    expect(frame, kind::TUNNEL_FINISHED)?;
    let tag: [u8; MAC_LEN] = frame.payload.as_slice().try_into().map_err(|_| TunnelError::ConfirmFailed)?;
    if !verify_mac(key, &[label, th.as_bytes()].concat(), &tag) {
        return Err(TunnelError::ConfirmFailed);
    }
    Ok(())
}

impl InitiatorWaitFinished {
    pub fn on_finished(self, frame: &Frame, now: u64) -> Result<(TunnelSession, Frame), TunnelError> {
        check_deadline(now, self.deadline)?;
        check_finished(frame, &self.keys.finished, RESPONDER_FINISHED, &self.th)?;
        let tag = mac(&self.keys.finished, &[INITIATOR_FINISHED, self.th.as_bytes()].concat());
        let session = TunnelSession::new(Role::Initiator, &self.config, self.peer, self.keys, self.th, now);
        Ok((session, Frame::new(kind::TUNNEL_FINISHED, tag.to_vec())))
    }
}

impl ResponderWaitFinished {
    pub fn on_finished(self, frame: &Frame, now: u64) -> Result<TunnelSession, TunnelError> {
        check_deadline(now, self.deadline)?;
        check_finished(frame, &self.keys.finished, INITIATOR_FINISHED, &self.th)?;
        Ok(TunnelSession::new(Role::Responder, &self.config, self.peer, self.keys, self.th, now))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Open,
    Closed,
}

/// One side of an established tunnel.
#[derive(Clone)]
pub struct TunnelSession {
    pub role: Role,
    pub local_did: Did,
    pub peer_certificate: PqCertificate,
    pub transcript_hash: Digest256,
    pub established_at: u64,
    max_age: u64,
    send_key: AeadKey,
    recv_key: AeadKey,
    send_dir: u64,
    recv_dir: u64,
    send_seq: u64,
    recv_seq: u64,
    state: SessionState,
}

impl std::fmt::Debug for TunnelSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TunnelSession")
            .field("role", &self.role)
            .field("local", &self.local_did)
            .field("peer", self.peer_certificate.did())
            .field("send_seq", &self.send_seq)
            .field("recv_seq", &self.recv_seq)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl TunnelSession {
    fn new(role: Role, config: &TunnelConfig, peer: PqCertificate, keys: KeySchedule, th: Digest256, now: u64) -> Self {
        let (send_key, recv_key, send_dir, recv_dir) = match role {
            Role::Initiator => (keys.initiator_to_responder, keys.responder_to_initiator, DIR_INITIATOR, DIR_RESPONDER),
            Role::Responder => (keys.responder_to_initiator, keys.initiator_to_responder, DIR_RESPONDER, DIR_INITIATOR),
        };
        TunnelSession {
            role,
            local_did: config.did().clone(),
            peer_certificate: peer,
            transcript_hash: th,
            established_at: now,
            max_age: config.max_age,
            send_key,
            recv_key,
            send_dir,
            recv_dir,
            send_seq: 0,
            recv_seq: 0,
            state: SessionState::Open,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }

    pub fn peer_did(&self) -> &Did {
        self.peer_certificate.did()
    }

    pub fn send_seq(&self) -> u64 {
        self.send_seq
    }

    pub fn recv_seq(&self) -> u64 {
        self.recv_seq
    }

    pub fn needs_renegotiation(&self, now: u64) -> bool {
        now.saturating_sub(self.established_at) >= self.max_age
    }

    /// True if `other` is the far end of this tunnel (keys cross over).
    pub fn pairs_with(&self, other: &TunnelSession) -> bool {
        self.send_key == other.recv_key && self.recv_key == other.send_key && self.send_key != self.recv_key
    }

    pub fn close(&mut self) {
        self.state = SessionState::Closed;
        self.send_key = AeadKey::new([0; 32]);
        self.recv_key = AeadKey::new([0; 32]);
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Result<TunnelRecord, TunnelError> {
        if !self.is_open() {
            return Err(TunnelError::SessionClosed);
        }
        let seq = self.send_seq;
        self.send_seq = seq.checked_add(1).ok_or(TunnelError::SessionClosed)?;
        let mut sealed = aead::seal(&self.send_key, self.send_dir, seq, &seq.to_be_bytes(), plaintext);
        let tag: [u8; TAG_LEN] = sealed.split_off(sealed.len() - TAG_LEN).try_into().unwrap();
        Ok(TunnelRecord {
            seq,
            ciphertext: sealed,
            tag,
        })
    }

    /// Records must arrive strictly in order; a bad tag closes the session.
    pub fn open(&mut self, record: &TunnelRecord) -> Result<Vec<u8>, TunnelError> {
        if !self.is_open() {
            return Err(TunnelError::SessionClosed);
        }
        if record.seq != self.recv_seq {
            return Err(TunnelError::ReplayOrReorder {
                expected: self.recv_seq,
                got: record.seq,
            });
        }
        let sealed = [record.ciphertext.as_slice(), &record.tag].concat();
        match aead::open(&self.recv_key, self.recv_dir, record.seq, &record.seq.to_be_bytes(), &sealed) {
            Ok(pt) => {
                self.recv_seq += 1;
                Ok(pt)
            }
            Err(_) => {
                self.close();
                Err(TunnelError::TagInvalid)
            }
        }
    }

    /// Decodes wire bytes and opens them. Undecodable records count as
    /// forgeries.
    pub fn open_bytes(&mut self, bytes: &[u8]) -> Result<Vec<u8>, TunnelError> {
        match TunnelRecord::decode(bytes) {
            Ok(r) => self.open(&r),
            Err(_) => {
                if self.is_open() {
                    self.close();
                }
                Err(TunnelError::TagInvalid)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TunnelRecord {
    pub seq: u64,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl TunnelRecord {
    /// `u32 length ‖ u64 seq ‖ ciphertext ‖ tag`; the length covers
    /// everything after itself.
    pub fn encode(&self) -> Vec<u8> {
        let len = (8 + self.ciphertext.len() + TAG_LEN) as u32;
        let mut out = Vec::with_capacity(4 + len as usize);
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let len = r.u32()? as usize;
        if len < 8 + TAG_LEN || len != r.remaining() {
            return Err(DecodeError::BadLength("tunnel record"));
        }
        let seq = r.u64()?;
        let ciphertext = r.raw(len - 8 - TAG_LEN)?.to_vec();
        let tag = r.array()?;
        r.finish()?;
        Ok(TunnelRecord { seq, ciphertext, tag })
    }
}

/// Runs a complete handshake over `link`, returning (initiator, responder).
/// On failure both sides discard their state.
pub fn handshake(
    initiator: &TunnelConfig,
    responder: &TunnelConfig,
    link: &mut Link<'_>,
    rng_i: &mut dyn RandomSource,
    rng_r: &mut dyn RandomSource,
    now: u64,
) -> Result<(TunnelSession, TunnelSession), TunnelError> {
    let send = |link: &mut Link<'_>, ch: &str, f: &Frame| link.transmit(ch, f).map_err(TunnelError::from);
    let (i_state, m1) = initiate(initiator, rng_i, now);
    let m1 = send(link, "i->r", &m1)?;
    let (r_state, m2) = respond(responder, &m1, rng_r, now)?;
    let m2 = send(link, "r->i", &m2)?;
    let (i_state, m3) = i_state.on_response(&m2, rng_i, now)?;
    let m3 = send(link, "i->r", &m3)?;
    let (r_state, m4) = r_state.on_key_exchange(&m3, now)?;
    let m4 = send(link, "r->i", &m4)?;
    let (i_session, m5) = i_state.on_finished(&m4, now)?;
    let m5 = send(link, "i->r", &m5)?;
    let r_session = r_state.on_finished(&m5, now)?;
    Ok((i_session, r_session))
}
