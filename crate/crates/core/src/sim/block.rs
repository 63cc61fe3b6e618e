//! Blocks, the proof-of-authority threshold, and block validation.

use std::collections::{BTreeSet, HashSet};

use pqchain_crypto::ecdsa::{ecdsa_recover, EcdsaKeyPair, EcdsaSignature};
use pqchain_crypto::falcon::{self, FalconKeyPair, FalconSignature, SignatureEncoding};
use pqchain_crypto::{keccak256, Digest256, RandomSource};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::did::{Did, Registry};
use crate::metatx::MetaTransaction;
use crate::rlp::{self, Item};
use crate::verify::Verifier;

const BLOCK_MAGIC: &[u8; 4] = b"BLK1";
const CHAIN_MAGIC: &[u8; 4] = b"CHN1";
const VERSION: u8 = 1;

/// Signatures needed to finalize a block among `v` validators.
pub fn threshold(v: usize) -> usize {
    2 * v / 3 + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("InsufficientSignatures: {have} of {need}")]
    InsufficientSignatures { have: usize, need: usize },
    #[error("InvalidTransactionInBlock: transaction {index}: {reason}")]
    InvalidTransactionInBlock { index: usize, reason: String },
    #[error("BadParent: block does not extend the local chain")]
    BadParent,
    #[error("BadHash: header or transaction root does not match")]
    BadHash,
    #[error("BadSignature: {0}")]
    BadSignature(String),
    #[error("EmptyBlock")]
    Empty,
    #[error("NoValidators")]
    NoValidators,
}

impl BlockError {
    pub fn code(&self) -> &'static str {
        match self {
            BlockError::InsufficientSignatures { .. } => "InsufficientSignatures",
            BlockError::InvalidTransactionInBlock { .. } => "InvalidTransactionInBlock",
            BlockError::BadParent => "BadParent",
            BlockError::BadHash => "BadHash",
            BlockError::BadSignature(_) => "BadSignature",
            BlockError::Empty => "EmptyBlock",
            BlockError::NoValidators => "NoValidators",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsensusParams {
    pub validator_set: Vec<Did>,
    /// Also require a Falcon signature from each validator over the block hash.
    pub pq_block_signatures: bool,
}

impl ConsensusParams {
    pub fn new(validator_set: Vec<Did>, pq_block_signatures: bool) -> Result<Self, BlockError> {
        if validator_set.is_empty() {
            return Err(BlockError::NoValidators);
        }
        Ok(ConsensusParams {
            validator_set,
            pq_block_signatures,
        })
    }

    pub fn threshold(&self) -> usize {
        threshold(self.validator_set.len())
    }

    /// Round-robin by block number.
    pub fn proposer(&self, number: u64) -> &Did {
        &self.validator_set[(number % self.validator_set.len() as u64) as usize]
    }

    pub fn is_validator(&self, did: &Did) -> bool {
        self.validator_set.contains(did)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatorSignature {
    pub validator: Did,
    pub ecdsa: EcdsaSignature,
    pub falcon: Option<FalconSignature>,
}

impl ValidatorSignature {
    pub fn write(&self, w: &mut Writer) {
        w.str(self.validator.as_str())
            .raw(&self.ecdsa.to_bytes())
            .bytes(self.falcon.as_ref().map(|s| s.as_bytes()).unwrap_or_default());
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let validator = Did::parse(&r.string()?).map_err(|_| DecodeError::Invalid("validator DID"))?;
        let ecdsa = EcdsaSignature::from_bytes(&r.array::<65>()?).map_err(|_| DecodeError::Invalid("ECDSA signature"))?;
        let falcon = match r.bytes()? {
            [] => None,
            b => Some(FalconSignature::from_slice(b).map_err(|_| DecodeError::Invalid("Falcon signature"))?),
        };
        Ok(ValidatorSignature { validator, ecdsa, falcon })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub number: u64,
    pub nonce: u64,
    pub prev_hash: Digest256,
    pub tx_root: Digest256,
    pub block_hash: Digest256,
    pub transactions: Vec<MetaTransaction>,
    pub validator_signatures: Vec<ValidatorSignature>,
}

pub fn tx_root(transactions: &[MetaTransaction]) -> Digest256 {
    let hashes = transactions.iter().map(|t| Item::bytes(t.hash().0.to_vec())).collect();
    keccak256(&rlp::encode(&Item::List(hashes)))
}

/// keccak256 of the RLP header `[number, nonce, prev_hash, tx_root]`.
pub fn header_hash(number: u64, nonce: u64, prev_hash: &Digest256, tx_root: &Digest256) -> Digest256 {
    let header = Item::List(vec![
        Item::u64(number),
        Item::u64(nonce),
        Item::bytes(prev_hash.0.to_vec()),
        Item::bytes(tx_root.0.to_vec()),
    ]);
    keccak256(&rlp::encode(&header))
}

impl Block {
    pub fn assemble(number: u64, nonce: u64, prev_hash: Digest256, transactions: Vec<MetaTransaction>) -> Block {
        let root = tx_root(&transactions);
        Block {
            number,
            nonce,
            prev_hash,
            tx_root: root,
            block_hash: header_hash(number, nonce, &prev_hash, &root),
            transactions,
            validator_signatures: Vec::new(),
        }
    }

    pub fn expected_hash(&self) -> Digest256 {
        header_hash(self.number, self.nonce, &self.prev_hash, &self.tx_root)
    }

    pub fn sign(
        &self,
        validator: &Did,
        ecdsa: &EcdsaKeyPair,
        falcon: Option<(&FalconKeyPair, &mut dyn RandomSource)>,
    ) -> ValidatorSignature {
        ValidatorSignature {
            validator: validator.clone(),
            ecdsa: ecdsa.sign(&self.block_hash),
            falcon: falcon.map(|(k, rng)| {
                falcon::sign(&self.block_hash.0, &k.secret, rng, SignatureEncoding::Padded).expect("validator Falcon key is well formed")
            }),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_header(BLOCK_MAGIC, VERSION);
        w.u64(self.number)
            .u64(self.nonce)
            .raw(&self.prev_hash.0)
            .raw(&self.tx_root.0)
            .raw(&self.block_hash.0)
            .u32(self.transactions.len() as u32);
        for t in &self.transactions {
            w.bytes(&t.raw());
        }
        w.u32(self.validator_signatures.len() as u32);
        for s in &self.validator_signatures {
            s.write(&mut w);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Block, DecodeError> {
        let (mut r, version) = Reader::with_header(bytes, BLOCK_MAGIC)?;
        if version != VERSION {
            return Err(DecodeError::UnknownVersion(version));
        }
        let block = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(block)
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Block, DecodeError> {
        let number = r.u64()?;
        let nonce = r.u64()?;
        let prev_hash = Digest256(r.array()?);
        let tx_root = Digest256(r.array()?);
        let block_hash = Digest256(r.array()?);
        let n = r.u32()? as usize;
        let mut transactions = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            transactions.push(MetaTransaction::decode_raw(r.bytes()?).map_err(|_| DecodeError::Invalid("transaction"))?);
        }
        let n = r.u32()? as usize;
        let mut validator_signatures = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            validator_signatures.push(ValidatorSignature::read(r)?);
        }
        Ok(Block {
            number,
            nonce,
            prev_hash,
            tx_root,
            block_hash,
            transactions,
            validator_signatures,
        })
    }
}

/// Checks one validator signature over the block hash.
pub fn check_signature(
    block_hash: &Digest256,
    sig: &ValidatorSignature,
    consensus: &ConsensusParams,
    registry: &Registry,
) -> Result<(), BlockError> {
    if !consensus.is_validator(&sig.validator) {
        return Err(BlockError::BadSignature(format!("{} is not a validator", sig.validator)));
    }
    let key = ecdsa_recover(block_hash, &sig.ecdsa).map_err(|_| BlockError::BadSignature("unrecoverable ECDSA signature".into()))?;
    if !registry.controls(&key, &sig.validator).is_granted() {
        return Err(BlockError::BadSignature(format!("ECDSA signer does not control {}", sig.validator)));
    }
    if consensus.pq_block_signatures {
        let record = registry
            .resolve(&sig.validator)
            .map_err(|_| BlockError::BadSignature(format!("{} is not registered", sig.validator)))?;
        let ok = sig
            .falcon
            .as_ref()
            .is_some_and(|f| falcon::verify(&block_hash.0, f, &record.falcon_public_key).is_ok());
        if !ok {
            return Err(BlockError::BadSignature(format!("missing or invalid Falcon signature from {}", sig.validator)));
        }
    }
    Ok(())
}

/// Every signature must verify, and distinct signers must reach the threshold.
pub fn check_signatures(block: &Block, consensus: &ConsensusParams, registry: &Registry) -> Result<(), BlockError> {
    let mut signers = BTreeSet::new();
    for s in &block.validator_signatures {
        check_signature(&block.block_hash, s, consensus, registry)?;
        signers.insert(&s.validator);
    }
    let need = consensus.threshold();
    if signers.len() < need {
        return Err(BlockError::InsufficientSignatures {
            have: signers.len(),
            need,
        });
    }
    Ok(())
}

/// What an honest validator checks before signing: linkage, hashes, and that
/// every transaction comes from a writer and re-verifies through the pipeline.
pub fn check_body(
    block: &Block,
    parent: Option<&Block>,
    verifier: &Verifier,
    registry: &Registry,
    writers: &BTreeSet<Did>,
    finalized: &HashSet<Digest256>,
) -> Result<(), BlockError> {
    let (number, prev) = match parent {
        Some(p) => (p.number + 1, p.block_hash),
        None => (0, Digest256([0; 32])),
    };
    if block.number != number || block.prev_hash != prev {
        return Err(BlockError::BadParent);
    }
    if block.tx_root != tx_root(&block.transactions) || block.block_hash != block.expected_hash() {
        return Err(BlockError::BadHash);
    }
    if block.transactions.is_empty() {
        return Err(BlockError::Empty);
    }
    let mut seen = HashSet::new();
    for (index, t) in block.transactions.iter().enumerate() {
        let bad = |reason: &str| BlockError::InvalidTransactionInBlock {
            index,
            reason: reason.to_string(),
        };
        let h = t.hash();
        if finalized.contains(&h) || !seen.insert(h) {
            return Err(bad("Duplicate"));
        }
        if !writers.contains(&t.writer_did) {
            return Err(bad("RoleNotPermitted"));
        }
        let d = verifier.verify(&t.wrapper, registry);
        if let Some(r) = d.reason {
            return Err(bad(r.as_str()));
        }
    }
    Ok(())
}

/// A validator identity able to sign blocks.
pub struct BlockSigner<'a> {
    pub did: &'a Did,
    pub ecdsa: &'a EcdsaKeyPair,
    pub falcon: &'a FalconKeyPair,
    /// Dishonest signers sign without checking.
    pub honest: bool,
}

/// Synchronous block production: assemble over `pool`, let each signer
/// check and sign, and require the threshold.
#[allow(clippy::too_many_arguments)]
pub fn produce_block(
    consensus: &ConsensusParams,
    signers: &[BlockSigner<'_>],
    parent: Option<&Block>,
    nonce: u64,
    pool: &[MetaTransaction],
    verifier: &Verifier,
    registry: &Registry,
    writers: &BTreeSet<Did>,
    rng: &mut dyn RandomSource,
) -> Result<Block, BlockError> {
    let (number, prev) = parent.map_or((0, Digest256([0; 32])), |p| (p.number + 1, p.block_hash));
    let mut block = Block::assemble(number, nonce, prev, pool.to_vec());
    let finalized = HashSet::new();
    let mut refusal = None;
    for s in signers {
        if s.honest {
            if let Err(e) = check_body(&block, parent, verifier, registry, writers, &finalized) {
                refusal.get_or_insert(e);
                continue;
            }
        }
        let falcon = consensus.pq_block_signatures.then_some((s.falcon, &mut *rng as &mut dyn RandomSource));
        let sig = block.sign(s.did, s.ecdsa, falcon);
        block.validator_signatures.push(sig);
    }
    match check_signatures(&block, consensus, registry) {
        Ok(()) => Ok(block),
        Err(BlockError::InsufficientSignatures { .. }) if refusal.is_some() => Err(refusal.unwrap()),
        Err(e) => Err(e),
    }
}

/// Verifies hashes and parent links of a stored chain, returning the first
/// offending height.
pub fn verify_chain(blocks: &[Block]) -> Result<(), (u64, BlockError)> {
    let mut prev = Digest256([0; 32]);
    for (i, b) in blocks.iter().enumerate() {
        if b.number != i as u64 || b.prev_hash != prev {
            return Err((i as u64, BlockError::BadParent));
        }
        if b.tx_root != tx_root(&b.transactions) || b.block_hash != b.expected_hash() {
            return Err((i as u64, BlockError::BadHash));
        }
        prev = b.block_hash;
    }
    Ok(())
}

/// Deterministic binary export of a chain.
pub fn chain_snapshot(blocks: &[Block]) -> Vec<u8> {
    let mut w = Writer::with_header(CHAIN_MAGIC, VERSION);
    w.u32(blocks.len() as u32);
    for b in blocks {
        w.bytes(&b.encode());
    }
    w.finish()
}

pub fn decode_chain_snapshot(bytes: &[u8]) -> Result<Vec<Block>, DecodeError> {
    let (mut r, version) = Reader::with_header(bytes, CHAIN_MAGIC)?;
    if version != VERSION {
        return Err(DecodeError::UnknownVersion(version));
    }
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        out.push(Block::decode(r.bytes()?)?);
    }
    r.finish()?;
    Ok(out)
}
