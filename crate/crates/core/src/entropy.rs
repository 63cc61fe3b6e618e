//! Simulated certified-entropy service and the split-key bootstrap.
//!
//! The service hands a node a one-time key split over N channels. The node
//! recomposes it before the deadline, authenticates with a MAC over a fresh
//! challenge, and both sides renegotiate a KEM secret with mutual key
//! confirmation. The bootstrap key is then zeroed and entropy flows under an
//! AEAD with per-direction counters.

use std::collections::{HashMap, HashSet};

use pqchain_crypto::aead::{self, AeadKey};
use pqchain_crypto::kem::{kem_decap, kem_encap, kem_keygen, KemAlgorithm, KemCiphertext, KemKeyPair, KemPublicKey, SharedSecret};
use pqchain_crypto::mac::{mac, verify_mac, MAC_LEN};
use pqchain_crypto::{keccak256, RandomSource, ShakeStream};
use thiserror::Error;
use zeroize::{Zeroize, Zeroizing};

use crate::codec::{Reader, Writer};
use crate::wire::{kind, Frame, Link};

pub const DEFAULT_SHARES: usize = 3;
/// Logical seconds a node has to collect and recompose its shares.
pub const DEFAULT_TIMEOUT: u64 = 30;
pub const MIN_BOOTSTRAP_KEY_LEN: usize = 32;
pub const DEFAULT_KEM: KemAlgorithm = KemAlgorithm::McEliece348864;
pub const SESSION_ID_LEN: usize = 16;
const CHALLENGE_LEN: usize = 32;
const DIR_NODE_TO_SERVICE: u64 = 1;
const DIR_SERVICE_TO_NODE: u64 = 2;
/// Largest single entropy request.
pub const MAX_REQUEST: usize = 1 << 20;

pub type SessionId = [u8; SESSION_ID_LEN];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("ZeroLength: requested zero bytes")]
    ZeroLength,
    #[error("TooFewShares: at least two shares are required")]
    TooFewShares,
    #[error("KeyTooShort: bootstrap keys must be at least {MIN_BOOTSTRAP_KEY_LEN} bytes")]
    KeyTooShort,
    #[error("MissingShare: {present} of {total} shares present")]
    MissingShare { present: usize, total: usize },
    #[error("Expired: a share expired before recomposition")]
    Expired,
    #[error("MixedSession: shares belong to different sessions")]
    MixedSession,
    #[error("ReusedKey: bootstrap key for this session was already used")]
    ReusedKey,
    #[error("AuthFailure: bootstrap MAC did not verify")]
    AuthFailure,
    #[error("Timeout: bootstrap deadline passed")]
    Timeout,
    #[error("ConfirmationMismatch: KEM secrets disagree")]
    ConfirmationMismatch,
    #[error("ReplayDetected: message or challenge seen before")]
    ReplayDetected,
    #[error("SessionNotEstablished")]
    SessionNotEstablished,
    #[error("Malformed: {0}")]
    Malformed(&'static str),
    #[error("RequestTooLarge: at most {MAX_REQUEST} bytes per request")]
    RequestTooLarge,
    #[error("EntropyUnavailable: {0}")]
    Unavailable(String),
}

impl EntropyError {
    pub fn code(&self) -> &'static str {
        match self {
            EntropyError::ZeroLength => "ZeroLength",
            EntropyError::TooFewShares => "TooFewShares",
            EntropyError::KeyTooShort => "KeyTooShort",
            EntropyError::MissingShare { .. } => "MissingShare",
            EntropyError::Expired => "Expired",
            EntropyError::MixedSession => "MixedSession",
            EntropyError::ReusedKey => "ReusedKey",
            EntropyError::AuthFailure => "AuthFailure",
            EntropyError::Timeout => "Timeout",
            EntropyError::ConfirmationMismatch => "ConfirmationMismatch",
            EntropyError::ReplayDetected => "ReplayDetected",
            EntropyError::SessionNotEstablished => "SessionNotEstablished",
            EntropyError::Malformed(_) => "Malformed",
            EntropyError::RequestTooLarge => "RequestTooLarge",
            EntropyError::Unavailable(_) => "EntropyUnavailable",
        }
    }
}

// ---------------------------------------------------------------------------
// Entropy source

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntropyBlock {
    pub bytes: Vec<u8>,
    pub source_id: String,
    pub certified: bool,
    pub sequence: u64,
}

#[derive(Clone)]
enum Generator {
    Seeded(ShakeStream),
    Os,
}

/// Mock of the remote quantum source. Test mode is a seeded SHAKE stream;
/// live mode reads the operating system generator.
#[derive(Clone)]
pub struct EntropySource {
    source_id: String,
    certified: bool,
    generator: Generator,
    next_sequence: u64,
}

impl EntropySource {
    pub fn seeded(source_id: impl Into<String>, seed: &[u8]) -> Self {
        EntropySource {
            source_id: source_id.into(),
            certified: false,
            generator: Generator::Seeded(ShakeStream::new(seed)),
            next_sequence: 0,
        }
    }

    pub fn live(source_id: impl Into<String>, certified: bool) -> Self {
        EntropySource {
            source_id: source_id.into(),
            certified,
            generator: Generator::Os,
            next_sequence: 0,
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn generate(&mut self, n: usize) -> Result<EntropyBlock, EntropyError> {
        if n == 0 {
            return Err(EntropyError::ZeroLength);
        }
        let mut bytes = vec![0u8; n];
        match &mut self.generator {
            Generator::Seeded(s) => s.fill_bytes(&mut bytes),
            Generator::Os => getrandom::getrandom(&mut bytes).map_err(|e| EntropyError::Unavailable(e.to_string()))?,
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        Ok(EntropyBlock {
            bytes,
            source_id: self.source_id.clone(),
            certified: self.certified,
            sequence,
        })
    }
}

impl RandomSource for EntropySource {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        if dest.is_empty() {
            return;
        }
        let block = self.generate(dest.len()).expect("entropy source failed");
        dest.copy_from_slice(&block.bytes);
    }
}

// ---------------------------------------------------------------------------
// Split-key bootstrap

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapShare {
    pub session_id: SessionId,
    /// 1-based.
    pub index: u8,
    pub total: u8,
    pub share: Vec<u8>,
    pub expires_at: u64,
}

impl BootstrapShare {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.session_id).u8(self.index).u8(self.total).u64(self.expires_at).bytes(&self.share);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EntropyError> {
        let malformed = |_| EntropyError::Malformed("share");
        let mut r = Reader::new(bytes);
        let share = BootstrapShare {
            session_id: r.array().map_err(malformed)?,
            index: r.u8().map_err(malformed)?,
            total: r.u8().map_err(malformed)?,
            expires_at: r.u64().map_err(malformed)?,
            share: r.bytes().map_err(malformed)?.to_vec(),
        };
        r.finish().map_err(malformed)?;
        if share.index == 0 || share.index > share.total || share.total < 2 {
            return Err(EntropyError::Malformed("share index"));
        }
        Ok(share)
    }
}

/// All-or-nothing XOR split: the first `n - 1` shares are fresh randomness
/// and the last is the key masked by all of them.
pub fn xor_split(key: &[u8], n_shares: usize, rng: &mut dyn RandomSource) -> Result<Vec<Vec<u8>>, EntropyError> {
    if n_shares < 2 || n_shares > u8::MAX as usize {
        return Err(EntropyError::TooFewShares);
    }
    if key.is_empty() {
        return Err(EntropyError::ZeroLength);
    }
    let mut last = key.to_vec();
    let mut shares = Vec::with_capacity(n_shares);
    for _ in 1..n_shares {
        let mut s = vec![0u8; key.len()];
        rng.fill_bytes(&mut s);
        last.iter_mut().zip(&s).for_each(|(l, x)| *l ^= x);
        shares.push(s);
    }
    shares.push(last);
    Ok(shares)
}

pub fn xor_combine<'a>(shares: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::new();
    for s in shares {
        if out.is_empty() {
            out = s.to_vec();
        } else {
            out.iter_mut().zip(s).for_each(|(o, x)| *o ^= x);
        }
    }
    out
}

pub fn split_bootstrap_key(
    key: &[u8],
    n_shares: usize,
    session_id: SessionId,
    expires_at: u64,
    rng: &mut dyn RandomSource,
) -> Result<Vec<BootstrapShare>, EntropyError> {
    if n_shares < 2 {
        return Err(EntropyError::TooFewShares);
    }
    if key.len() < MIN_BOOTSTRAP_KEY_LEN {
        return Err(EntropyError::KeyTooShort);
    }
    let total = n_shares as u8;
    Ok(xor_split(key, n_shares, rng)?
        .into_iter()
        .enumerate()
        .map(|(i, share)| BootstrapShare {
            session_id,
            index: i as u8 + 1,
            total,
            share,
            expires_at,
        })
        .collect())
}

/// A recomposed one-time key. Zeroed on drop.
pub struct BootstrapKey {
    pub session_id: SessionId,
    pub expires_at: u64,
    key: Zeroizing<Vec<u8>>,
}

impl BootstrapKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.key
    }
}

/// Node-side memory of which sessions have already produced a key.
#[derive(Clone, Debug, Default)]
pub struct Recomposer {
    used: HashSet<SessionId>,
}

impl Recomposer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn recompose(&mut self, shares: &[BootstrapShare], now: u64) -> Result<BootstrapKey, EntropyError> {
        let first = shares.first().ok_or(EntropyError::MissingShare { present: 0, total: 0 })?;
        let total = first.total as usize;
        if shares.iter().any(|s| s.session_id != first.session_id || s.total != first.total) {
            return Err(EntropyError::MixedSession);
        }
        if shares.iter().any(|s| s.share.len() != first.share.len()) {
            return Err(EntropyError::Malformed("share lengths differ"));
        }
        if self.used.contains(&first.session_id) {
            return Err(EntropyError::ReusedKey);
        }
        let indices: HashSet<u8> = shares.iter().map(|s| s.index).collect();
        if indices.len() != shares.len() || indices.len() < total || shares.len() > total {
            return Err(EntropyError::MissingShare {
                present: indices.len().min(total),
                total,
            });
        }
        if shares.iter().any(|s| now >= s.expires_at) {
            return Err(EntropyError::Expired);
        }
        self.used.insert(first.session_id);
        Ok(BootstrapKey {
            session_id: first.session_id,
            expires_at: shares.iter().map(|s| s.expires_at).min().unwrap(),
            key: Zeroizing::new(xor_combine(shares.iter().map(|s| s.share.as_slice()))),
        })
    }
}

pub fn recompose_bootstrap_key(
    recomposer: &mut Recomposer,
    shares: &[BootstrapShare],
    now: u64,
) -> Result<BootstrapKey, EntropyError> {
    recomposer.recompose(shares, now)
}

// ---------------------------------------------------------------------------
// Session protocol

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Bootstrapping,
    Renegotiating,
    Established,
    Closed,
}

struct TrafficKeys {
    node_to_service: AeadKey,
    service_to_node: AeadKey,
}

fn traffic_keys(ss: &SharedSecret, session_id: &SessionId) -> TrafficKeys {
    let okm = Zeroizing::new(
        pqchain_crypto::hash::shake256_concat([&ss.as_bytes()[..], b"pqchain/entropy/traffic", session_id], 64)
            .expect("nonzero length"),
    );
    TrafficKeys {
        node_to_service: AeadKey::from_slice(&okm[..32]).unwrap(),
        service_to_node: AeadKey::from_slice(&okm[32..]).unwrap(),
    }
}

fn auth_transcript(session_id: &SessionId, challenge: &[u8], node_id: &str) -> Vec<u8> {
    [b"pqchain/entropy/auth".as_slice(), session_id, challenge, node_id.as_bytes()].concat()
}

fn kem_pub_transcript(session_id: &SessionId, challenge: &[u8], alg: KemAlgorithm, pk: &[u8]) -> Vec<u8> {
    [b"pqchain/entropy/kem-pub".as_slice(), session_id, challenge, &[alg.code()], pk].concat()
}

fn confirm_transcript(label: &[u8], session_id: &SessionId, challenge: &[u8], pk: &[u8], ct: &[u8]) -> Vec<u8> {
    [label, session_id, challenge, keccak256(pk).as_bytes(), ct].concat()
}

const SERVICE_CONFIRM: &[u8] = b"pqchain/entropy/service-confirm";
const NODE_CONFIRM: &[u8] = b"pqchain/entropy/node-confirm";

/// Node-side handle to an entropy session.
pub struct EntropySession {
    pub session_id: SessionId,
    pub node_id: String,
    pub kem_keys: KemKeyPair,
    state: SessionState,
    challenge: [u8; CHALLENGE_LEN],
    bootstrap_key: Option<BootstrapKey>,
    shared_secret: Option<SharedSecret>,
    keys: Option<TrafficKeys>,
    send_counter: u64,
    recv_counter: u64,
    max_counter: u64,
}

impl EntropySession {
    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn shared_secret(&self) -> Option<&SharedSecret> {
        self.shared_secret.as_ref()
    }

    pub fn send_counter(&self) -> u64 {
        self.send_counter
    }

    pub fn recv_counter(&self) -> u64 {
        self.recv_counter
    }

    /// True once the bootstrap key has been destroyed.
    pub fn bootstrap_key_discarded(&self) -> bool {
        self.bootstrap_key.is_none()
    }

    /// Closes the session after this many messages per direction.
    pub fn set_max_counter(&mut self, max: u64) {
        self.max_counter = max;
    }

    pub fn close(&mut self) {
        self.state = SessionState::Closed;
        self.keys = None;
        self.shared_secret = None;
        self.bootstrap_key = None;
    }

    /// Step 1: authenticate with the recomposed key over a fresh challenge.
    pub fn begin(
        node_id: &str,
        bootstrap_key: BootstrapKey,
        kem_algorithm: KemAlgorithm,
        rng: &mut dyn RandomSource,
    ) -> Result<(Self, Frame), EntropyError> {
        let mut challenge = [0u8; CHALLENGE_LEN];
        rng.fill_bytes(&mut challenge);
        let kem_keys = kem_keygen(kem_algorithm, rng).map_err(|_| EntropyError::Malformed("kem keygen"))?;
        let session_id = bootstrap_key.session_id;
        let tag = mac(bootstrap_key.as_bytes(), &auth_transcript(&session_id, &challenge, node_id));
        let mut w = Writer::new();
        w.raw(&session_id).raw(&challenge).str(node_id).raw(&tag);
        let session = EntropySession {
            session_id,
            node_id: node_id.to_string(),
            kem_keys,
            state: SessionState::Bootstrapping,
            challenge,
            bootstrap_key: Some(bootstrap_key),
            shared_secret: None,
            keys: None,
            send_counter: 0,
            recv_counter: 0,
            max_counter: u64::MAX,
        };
        Ok((session, Frame::new(kind::AUTH, w.finish())))
    }

    /// Step 2: the KEM public key, MAC-protected under the bootstrap key.
    pub fn kem_public_frame(&mut self) -> Result<Frame, EntropyError> {
        let key = self.bootstrap_key.as_ref().ok_or(EntropyError::ReusedKey)?;
        let pk = &self.kem_keys.public;
        let tag = mac(
            key.as_bytes(),
            &kem_pub_transcript(&self.session_id, &self.challenge, pk.algorithm(), pk.as_bytes()),
        );
        let mut w = Writer::new();
        w.raw(&self.session_id).u8(pk.algorithm().code()).bytes(pk.as_bytes()).raw(&tag);
        self.state = SessionState::Renegotiating;
        Ok(Frame::new(kind::KEM_PUB, w.finish()))
    }

    /// Step 4, node half: decapsulate, check the service's confirmation and
    /// answer with ours. The bootstrap key is destroyed either way.
    pub fn handle_kem_ciphertext(&mut self, frame: &Frame) -> Result<Frame, EntropyError> {
        let result = self.handle_kem_ciphertext_inner(frame);
        self.bootstrap_key = None;
        if result.is_err() {
            self.close();
        }
        result
    }

    fn handle_kem_ciphertext_inner(&mut self, frame: &Frame) -> Result<Frame, EntropyError> {
        expect_kind(frame, kind::KEM_CT)?;
        let malformed = |_| EntropyError::Malformed("kem ciphertext frame");
        let mut r = Reader::new(&frame.payload);
        let sid: SessionId = r.array().map_err(malformed)?;
        let ct_bytes = r.bytes().map_err(malformed)?;
        let confirm: [u8; MAC_LEN] = r.array().map_err(malformed)?;
        r.finish().map_err(malformed)?;
        if sid != self.session_id {
            return Err(EntropyError::MixedSession);
        }
        let ct = KemCiphertext::from_bytes(self.kem_keys.public.algorithm(), ct_bytes)
            .map_err(|_| EntropyError::Malformed("kem ciphertext"))?;
        let ss = kem_decap(&ct, &self.kem_keys.secret).map_err(|_| EntropyError::ConfirmationMismatch)?;
        let pk = self.kem_keys.public.as_bytes();
        let expected = confirm_transcript(SERVICE_CONFIRM, &sid, &self.challenge, pk, ct_bytes);
        if !verify_mac(ss.as_bytes(), &expected, &confirm) {
            return Err(EntropyError::ConfirmationMismatch);
        }
        let ours = mac(
            ss.as_bytes(),
            &confirm_transcript(NODE_CONFIRM, &sid, &self.challenge, pk, ct_bytes),
        );
        let mut w = Writer::new();
        w.raw(&sid).raw(&ours);
        self.keys = Some(traffic_keys(&ss, &sid));
        self.shared_secret = Some(ss);
        self.state = SessionState::Established;
        Ok(Frame::new(kind::CONFIRM, w.finish()))
    }

    /// Entropy on demand: an encrypted request for `n` bytes.
    pub fn request_frame(&mut self, n: usize) -> Result<Frame, EntropyError> {
        if n == 0 {
            return Err(EntropyError::ZeroLength);
        }
        if n > MAX_REQUEST {
            return Err(EntropyError::RequestTooLarge);
        }
        if self.state != SessionState::Established {
            return Err(EntropyError::SessionNotEstablished);
        }
        if self.send_counter >= self.max_counter {
            self.close();
            return Err(EntropyError::SessionNotEstablished);
        }
        let counter = self.send_counter;
        let keys = self.keys.as_ref().expect("established sessions hold keys");
        let aad = record_aad(&self.session_id, counter);
        let ct = aead::seal(&keys.node_to_service, DIR_NODE_TO_SERVICE, counter, &aad, &(n as u32).to_be_bytes());
        self.send_counter += 1;
        let mut w = Writer::new();
        w.raw(&self.session_id).u64(counter).bytes(&ct);
        Ok(Frame::new(kind::ENTROPY_REQ, w.finish()))
    }

    pub fn handle_response(&mut self, frame: &Frame) -> Result<Vec<u8>, EntropyError> {
        if self.state != SessionState::Established {
            return Err(EntropyError::SessionNotEstablished);
        }
        expect_kind(frame, kind::ENTROPY_RESP)?;
        let (sid, counter, ct) = parse_record(frame)?;
        if sid != self.session_id {
            return Err(EntropyError::MixedSession);
        }
        if counter != self.recv_counter {
            return Err(EntropyError::ReplayDetected);
        }
        let keys = self.keys.as_ref().expect("established sessions hold keys");
        let bytes = aead::open(&keys.service_to_node, DIR_SERVICE_TO_NODE, counter, &record_aad(&sid, counter), &ct)
            .map_err(|_| EntropyError::ReplayDetected)?;
        self.recv_counter += 1;
        if self.recv_counter >= self.max_counter {
            self.close();
        }
        Ok(bytes)
    }
}

fn record_aad(session_id: &SessionId, counter: u64) -> Vec<u8> {
    [session_id.as_slice(), &counter.to_be_bytes()].concat()
}

fn parse_record(frame: &Frame) -> Result<(SessionId, u64, Vec<u8>), EntropyError> {
    let malformed = |_| EntropyError::Malformed("entropy record");
    let mut r = Reader::new(&frame.payload);
    let sid = r.array().map_err(malformed)?;
    let counter = r.u64().map_err(malformed)?;
    let ct = r.bytes().map_err(malformed)?.to_vec();
    r.finish().map_err(malformed)?;
    Ok((sid, counter, ct))
}

fn expect_kind(frame: &Frame, k: u8) -> Result<(), EntropyError> {
    if frame.kind != k {
        return Err(EntropyError::Malformed("unexpected frame type"));
    }
    Ok(())
}

struct PendingBootstrap {
    node_id: String,
    key: Zeroizing<Vec<u8>>,
    expires_at: u64,
    challenge: Option<[u8; CHALLENGE_LEN]>,
    kem_public: Option<KemPublicKey>,
    ciphertext: Option<Vec<u8>>,
    shared_secret: Option<SharedSecret>,
}

struct ServiceSession {
    node_id: String,
    shared_secret: SharedSecret,
    keys: TrafficKeys,
    recv_counter: u64,
    send_counter: u64,
    state: SessionState,
}

/// Service endpoint: many sessions with isolated state.
pub struct EntropyService {
    source: EntropySource,
    n_shares: usize,
    timeout: u64,
    pending: HashMap<SessionId, PendingBootstrap>,
    sessions: HashMap<SessionId, ServiceSession>,
    seen_challenges: HashSet<[u8; CHALLENGE_LEN]>,
    delivered_blocks: u64,
    delivered_bytes: u64,
}

impl EntropyService {
    pub fn new(source: EntropySource) -> Self {
        EntropyService {
            source,
            n_shares: DEFAULT_SHARES,
            timeout: DEFAULT_TIMEOUT,
            pending: HashMap::new(),
            sessions: HashMap::new(),
            seen_challenges: HashSet::new(),
            delivered_blocks: 0,
            delivered_bytes: 0,
        }
    }

    pub fn with_shares(mut self, n: usize) -> Self {
        self.n_shares = n;
        self
    }

    pub fn with_timeout(mut self, timeout: u64) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn source_mut(&mut self) -> &mut EntropySource {
        &mut self.source
    }

    pub fn delivered_blocks(&self) -> u64 {
        self.delivered_blocks
    }

    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    pub fn session_state(&self, id: &SessionId) -> Option<SessionState> {
        self.sessions.get(id).map(|s| s.state)
    }

    pub fn session_secret(&self, id: &SessionId) -> Option<&SharedSecret> {
        self.sessions.get(id).map(|s| &s.shared_secret)
    }

    /// True while the service still holds the bootstrap key for `id`.
    pub fn holds_bootstrap_key(&self, id: &SessionId) -> bool {
        self.pending.contains_key(id)
    }

    /// Creates a one-time key for `node_id` and splits it into shares.
    pub fn issue_bootstrap(&mut self, node_id: &str, now: u64) -> Result<Vec<BootstrapShare>, EntropyError> {
        let mut session_id = [0u8; SESSION_ID_LEN];
        self.source.fill_bytes(&mut session_id);
        let key = Zeroizing::new(self.source.generate(MIN_BOOTSTRAP_KEY_LEN)?.bytes);
        let expires_at = now + self.timeout;
        let shares = split_bootstrap_key(&key, self.n_shares, session_id, expires_at, &mut self.source)?;
        self.pending.insert(
            session_id,
            PendingBootstrap {
                node_id: node_id.to_string(),
                key,
                expires_at,
                challenge: None,
                kem_public: None,
                ciphertext: None,
                shared_secret: None,
            },
        );
        Ok(shares)
    }

    fn expire(&mut self, id: &SessionId, now: u64) -> Result<(), EntropyError> {
        if let Some(p) = self.pending.get(id) {
            if now >= p.expires_at {
                self.pending.remove(id);
                return Err(EntropyError::Timeout);
            }
        }
        Ok(())
    }

    /// Step 1, service half.
    pub fn handle_auth(&mut self, frame: &Frame, now: u64) -> Result<(), EntropyError> {
        expect_kind(frame, kind::AUTH)?;
        let malformed = |_| EntropyError::Malformed("auth frame");
        let mut r = Reader::new(&frame.payload);
        let sid: SessionId = r.array().map_err(malformed)?;
        let challenge: [u8; CHALLENGE_LEN] = r.array().map_err(malformed)?;
        let node_id = r.string().map_err(malformed)?;
        let tag: [u8; MAC_LEN] = r.array().map_err(malformed)?;
        r.finish().map_err(malformed)?;

        if self.seen_challenges.contains(&challenge) || self.sessions.contains_key(&sid) {
            return Err(EntropyError::ReplayDetected);
        }
        self.expire(&sid, now)?;
        let pending = self.pending.get_mut(&sid).ok_or(EntropyError::AuthFailure)?;
        if pending.challenge.is_some() {
            return Err(EntropyError::ReplayDetected);
        }
        if pending.node_id != node_id || !verify_mac(&pending.key, &auth_transcript(&sid, &challenge, &node_id), &tag) {
            return Err(EntropyError::AuthFailure);
        }
        self.seen_challenges.insert(challenge);
        pending.challenge = Some(challenge);
        Ok(())
    }

    /// Steps 2 and 3: check the MAC on the node's KEM key, encapsulate and
    /// return the ciphertext with the service's key confirmation.
    pub fn handle_kem_public(&mut self, frame: &Frame, now: u64) -> Result<Frame, EntropyError> {
        expect_kind(frame, kind::KEM_PUB)?;
        let malformed = |_| EntropyError::Malformed("kem public frame");
        let mut r = Reader::new(&frame.payload);
        let sid: SessionId = r.array().map_err(malformed)?;
        let alg = KemAlgorithm::from_code(r.u8().map_err(malformed)?).map_err(|_| EntropyError::Malformed("kem algorithm"))?;
        let pk_bytes = r.bytes().map_err(malformed)?;
        let tag: [u8; MAC_LEN] = r.array().map_err(malformed)?;
        r.finish().map_err(malformed)?;

        self.expire(&sid, now)?;
        let pending = self.pending.get_mut(&sid).ok_or(EntropyError::AuthFailure)?;
        let challenge = pending.challenge.ok_or(EntropyError::AuthFailure)?;
        if pending.kem_public.is_some() {
            return Err(EntropyError::ReplayDetected);
        }
        if !verify_mac(&pending.key, &kem_pub_transcript(&sid, &challenge, alg, pk_bytes), &tag) {
            return Err(EntropyError::AuthFailure);
        }
        let pk = KemPublicKey::from_bytes(alg, pk_bytes).map_err(|_| EntropyError::Malformed("kem public key"))?;
        let (ct, ss) = kem_encap(&pk, &mut self.source).map_err(|_| EntropyError::Malformed("kem encapsulation"))?;
        let confirm = mac(
            ss.as_bytes(),
            &confirm_transcript(SERVICE_CONFIRM, &sid, &challenge, pk_bytes, ct.as_bytes()),
        );
        let mut w = Writer::new();
        w.raw(&sid).bytes(ct.as_bytes()).raw(&confirm);
        pending.kem_public = Some(pk);
        pending.ciphertext = Some(ct.as_bytes().to_vec());
        pending.shared_secret = Some(ss);
        Ok(Frame::new(kind::KEM_CT, w.finish()))
    }

    /// Step 4, service half. On success the bootstrap key is destroyed and
    /// the session becomes Established; on failure everything is dropped.
    pub fn handle_confirm(&mut self, frame: &Frame, now: u64) -> Result<(), EntropyError> {
        expect_kind(frame, kind::CONFIRM)?;
        let malformed = |_| EntropyError::Malformed("confirm frame");
        let mut r = Reader::new(&frame.payload);
        let sid: SessionId = r.array().map_err(malformed)?;
        let tag: [u8; MAC_LEN] = r.array().map_err(malformed)?;
        r.finish().map_err(malformed)?;

        self.expire(&sid, now)?;
        let mut pending = self.pending.remove(&sid).ok_or(EntropyError::AuthFailure)?;
        let (Some(challenge), Some(pk), Some(ct), Some(ss)) = (
            pending.challenge,
            pending.kem_public.take(),
            pending.ciphertext.take(),
            pending.shared_secret.take(),
        ) else {
            return Err(EntropyError::AuthFailure);
        };
        pending.key.zeroize();
        let expected = confirm_transcript(NODE_CONFIRM, &sid, &challenge, pk.as_bytes(), &ct);
        if !verify_mac(ss.as_bytes(), &expected, &tag) {
            return Err(EntropyError::ConfirmationMismatch);
        }
        self.sessions.insert(
            sid,
            ServiceSession {
                node_id: pending.node_id.clone(),
                keys: traffic_keys(&ss, &sid),
                shared_secret: ss,
                recv_counter: 0,
                send_counter: 0,
                state: SessionState::Established,
            },
        );
        Ok(())
    }

    /// Serves one entropy request with a freshly generated block.
    pub fn handle_request(&mut self, frame: &Frame) -> Result<Frame, EntropyError> {
        expect_kind(frame, kind::ENTROPY_REQ)?;
        let (sid, counter, ct) = parse_record(frame)?;
        let session = self.sessions.get_mut(&sid).ok_or(EntropyError::SessionNotEstablished)?;
        if session.state != SessionState::Established {
            return Err(EntropyError::SessionNotEstablished);
        }
        if counter != session.recv_counter {
            return Err(EntropyError::ReplayDetected);
        }
        let body = aead::open(&session.keys.node_to_service, DIR_NODE_TO_SERVICE, counter, &record_aad(&sid, counter), &ct)
            .map_err(|_| EntropyError::ReplayDetected)?;
        let n = u32::from_be_bytes(body.try_into().map_err(|_| EntropyError::Malformed("request length"))?) as usize;
        if n == 0 {
            return Err(EntropyError::ZeroLength);
        }
        if n > MAX_REQUEST {
            return Err(EntropyError::RequestTooLarge);
        }
        session.recv_counter += 1;
        let block = self.source.generate(n)?;
        let counter = session.send_counter;
        session.send_counter += 1;
        let sealed = aead::seal(
            &session.keys.service_to_node,
            DIR_SERVICE_TO_NODE,
            counter,
            &record_aad(&sid, counter),
            &block.bytes,
        );
        self.delivered_blocks += 1;
        self.delivered_bytes += n as u64;
        let mut w = Writer::new();
        w.raw(&sid).u64(counter).bytes(&sealed);
        Ok(Frame::new(kind::ENTROPY_RESP, w.finish()))
    }

    pub fn close_session(&mut self, id: &SessionId) {
        if let Some(s) = self.sessions.get_mut(id) {
            s.state = SessionState::Closed;
        }
    }

    pub fn session_node(&self, id: &SessionId) -> Option<&str> {
        self.sessions.get(id).map(|s| s.node_id.as_str())
    }
}

/// Sends each share over its own channel.
pub fn deliver_shares(link: &mut Link<'_>, shares: &[BootstrapShare]) -> Result<Vec<BootstrapShare>, EntropyError> {
    shares
        .iter()
        .map(|s| {
            let f = transmit(link, &format!("share-{}", s.index), &Frame::new(kind::SHARE, s.encode()))?;
            expect_kind(&f, kind::SHARE)?;
            BootstrapShare::decode(&f.payload)
        })
        .collect()
}

fn transmit(link: &mut Link<'_>, channel: &str, frame: &Frame) -> Result<Frame, EntropyError> {
    link.transmit(channel, frame).map_err(|_| EntropyError::Malformed("frame"))
}

/// Runs the node side of the bootstrap against `service` once the shares
/// have arrived: recompose, authenticate, renegotiate a KEM secret, confirm.
#[allow(clippy::too_many_arguments)]
pub fn establish_entropy_session(
    node_id: &str,
    shares: &[BootstrapShare],
    recomposer: &mut Recomposer,
    service: &mut EntropyService,
    link: &mut Link<'_>,
    kem_algorithm: KemAlgorithm,
    node_rng: &mut dyn RandomSource,
    now: u64,
) -> Result<EntropySession, EntropyError> {
    let key = recomposer.recompose(shares, now)?;
    let (mut session, auth) = EntropySession::begin(node_id, key, kem_algorithm, node_rng)?;
    let auth = transmit(link, "node->service", &auth)?;
    service.handle_auth(&auth, now)?;
    let kem_pub = transmit(link, "node->service", &session.kem_public_frame()?)?;
    let ct = service.handle_kem_public(&kem_pub, now)?;
    let ct = transmit(link, "service->node", &ct)?;
    let confirm = session.handle_kem_ciphertext(&ct)?;
    let confirm = transmit(link, "node->service", &confirm)?;
    service.handle_confirm(&confirm, now)?;
    Ok(session)
}

/// One full request/response round trip.
pub fn request_entropy(
    session: &mut EntropySession,
    service: &mut EntropyService,
    link: &mut Link<'_>,
    n: usize,
) -> Result<Vec<u8>, EntropyError> {
    let req = transmit(link, "node->service", &session.request_frame(n)?)?;
    let resp = service.handle_request(&req)?;
    let resp = transmit(link, "service->node", &resp)?;
    session.handle_response(&resp)
}
