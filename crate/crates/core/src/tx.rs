//! Legacy Ethereum transactions signed under EIP-155.

use pqchain_crypto::ecdsa::{ecdsa_recover, Address, EcdsaKeyPair, EcdsaPublicKey, EcdsaSignature};
use pqchain_crypto::{keccak256, Digest256};
use ruint::aliases::U256;
use thiserror::Error;

use crate::rlp::{self, Item, RlpError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("rlp: {0}")]
    Rlp(#[from] RlpError),
    #[error("expected {0} fields")]
    FieldCount(usize),
    #[error("destination must be empty or 20 bytes")]
    BadDestination,
    #[error("v does not encode an EIP-155 chain id")]
    BadV,
    #[error("signature does not recover a public key")]
    BadSignature,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Transaction {
    pub nonce: u64,
    pub gas_price: U256,
    pub gas_limit: u64,
    /// `None` for contract creation.
    pub to: Option<Address>,
    pub value: U256,
    pub data: Vec<u8>,
    pub chain_id: u64,
}

impl Transaction {
    fn body(&self) -> Vec<Item> {
        vec![
            Item::u64(self.nonce),
            Item::u256(&self.gas_price),
            Item::u64(self.gas_limit),
            Item::bytes(self.to.map(|a| a.0.to_vec()).unwrap_or_default()),
            Item::u256(&self.value),
            Item::bytes(self.data.clone()),
        ]
    }

    /// RLP of `[nonce, gasprice, startgas, to, value, data, chainid, 0, 0]`.
    pub fn signing_stream(&self) -> Vec<u8> {
        let mut items = self.body();
        items.extend([Item::u64(self.chain_id), Item::u64(0), Item::u64(0)]);
        rlp::encode_list(&items)
    }

    pub fn signing_hash(&self) -> Digest256 {
        keccak256(&self.signing_stream())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedTransaction {
    pub tx: Transaction,
    pub v: u64,
    pub r: [u8; 32],
    pub s: [u8; 32],
}

pub fn eip155_v(chain_id: u64, recovery_id: u8) -> u64 {
    chain_id * 2 + 35 + recovery_id as u64
}

/// Splits an EIP-155 `v` into (chain id, recovery id).
pub fn split_v(v: u64) -> Option<(u64, u8)> {
    let x = v.checked_sub(35)?;
    Some((x / 2, (x % 2) as u8))
}

pub fn sign_inner(tx: Transaction, key: &EcdsaKeyPair) -> SignedTransaction {
    let sig = key.sign(&tx.signing_hash());
    SignedTransaction {
        v: eip155_v(tx.chain_id, sig.recovery_id),
        r: sig.r,
        s: sig.s,
        tx,
    }
}

impl SignedTransaction {
    pub fn signature(&self) -> Option<EcdsaSignature> {
        let (chain_id, recovery_id) = split_v(self.v)?;
        (chain_id == self.tx.chain_id).then_some(EcdsaSignature {
            r: self.r,
            s: self.s,
            recovery_id,
        })
    }

    pub fn recover_signer(&self) -> Result<EcdsaPublicKey, TxError> {
        let sig = self.signature().ok_or(TxError::BadV)?;
        ecdsa_recover(&self.tx.signing_hash(), &sig).map_err(|_| TxError::BadSignature)
    }

    /// Network encoding `rlp([nonce, gasprice, startgas, to, value, data, v, r, s])`.
    pub fn raw(&self) -> Vec<u8> {
        let mut items = self.tx.body();
        items.extend([Item::u64(self.v), Item::uint_be(&self.r), Item::uint_be(&self.s)]);
        rlp::encode_list(&items)
    }

    pub fn hash(&self) -> Digest256 {
        keccak256(&self.raw())
    }

    pub fn decode_raw(bytes: &[u8]) -> Result<Self, TxError> {
        let item = rlp::decode(bytes)?;
        let f = item.as_list()?;
        if f.len() != 9 {
            return Err(TxError::FieldCount(9));
        }
        let to = match f[3].as_bytes()? {
            [] => None,
            b if b.len() == 20 => Some(Address(b.try_into().unwrap())),
            _ => return Err(TxError::BadDestination),
        };
        let v = f[6].as_u64()?;
        let (chain_id, _) = split_v(v).ok_or(TxError::BadV)?;
        Ok(SignedTransaction {
            tx: Transaction {
                nonce: f[0].as_u64()?,
                gas_price: f[1].as_u256()?,
                gas_limit: f[2].as_u64()?,
                to,
                value: f[4].as_u256()?,
                data: f[5].as_bytes()?.to_vec(),
                chain_id,
            },
            v,
            r: f[7].as_word()?,
            s: f[8].as_word()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_round_trip() {
        for chain in [0u64, 1, 1337, 648_529] {
            for rec in [0u8, 1] {
                assert_eq!(split_v(eip155_v(chain, rec)), Some((chain, rec)));
            }
        }
        assert_eq!(split_v(27), None);
    }
}
