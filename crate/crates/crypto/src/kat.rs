//! Parser for NIST-format signature known-answer files (`.rsp`).

use crate::error::{CryptoError, Result};
use crate::falcon::{FalconSignature, NONCE_BYTES, PADDED_SIGNATURE_BYTES};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignKat {
    pub count: u32,
    pub seed: [u8; 48],
    pub msg: Vec<u8>,
    pub pk: Vec<u8>,
    pub sk: Vec<u8>,
    pub sm: Vec<u8>,
}

impl SignKat {
    /// Splits the signed message into `(message, detached signature)`.
    ///
    /// Compressed files use `len (2) || nonce || msg || 0x29 || vector`;
    /// padded files use `signature (666) || msg`.
    pub fn detached(&self) -> Result<(Vec<u8>, FalconSignature)> {
        let mlen = self.msg.len();
        let bad = || CryptoError::InvalidEncoding("signed message");
        if self.sm.len() == PADDED_SIGNATURE_BYTES + mlen {
            let (sig, msg) = self.sm.split_at(PADDED_SIGNATURE_BYTES);
            return Ok((msg.to_vec(), FalconSignature::from_slice(sig)?));
        }
        if self.sm.len() < 2 + NONCE_BYTES + mlen + 1 {
            return Err(bad());
        }
        let declared = u16::from_be_bytes([self.sm[0], self.sm[1]]) as usize;
        let nonce = &self.sm[2..2 + NONCE_BYTES];
        let msg = &self.sm[2 + NONCE_BYTES..2 + NONCE_BYTES + mlen];
        let rest = &self.sm[2 + NONCE_BYTES + mlen..];
        if rest.len() != declared || rest[0] != 0x29 {
            return Err(bad());
        }
        let mut sig = Vec::with_capacity(1 + NONCE_BYTES + rest.len() - 1);
        sig.push(0x39);
        sig.extend_from_slice(nonce);
        sig.extend_from_slice(&rest[1..]);
        Ok((msg.to_vec(), FalconSignature::from_slice(&sig)?))
    }
}

fn hex_field(value: &str) -> Result<Vec<u8>> {
    hex::decode(value).map_err(|_| CryptoError::InvalidEncoding("KAT hex field"))
}

pub fn parse_sign_kat(text: &str) -> Result<Vec<SignKat>> {
    let mut out = Vec::new();
    let mut cur: Option<SignKat> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(" = ")
            .ok_or(CryptoError::InvalidEncoding("KAT line"))?;
        if key == "count" {
            if let Some(done) = cur.take() {
                out.push(done);
            }
            cur = Some(SignKat {
                count: value.parse().map_err(|_| CryptoError::InvalidEncoding("KAT count"))?,
                seed: [0; 48],
                msg: Vec::new(),
                pk: Vec::new(),
                sk: Vec::new(),
                sm: Vec::new(),
            });
            continue;
        }
        let entry = cur.as_mut().ok_or(CryptoError::InvalidEncoding("KAT field before count"))?;
        match key {
            "seed" => {
                entry.seed = hex_field(value)?
                    .try_into()
                    .map_err(|_| CryptoError::InvalidEncoding("KAT seed"))?
            }
            "msg" => entry.msg = hex_field(value)?,
            "pk" => entry.pk = hex_field(value)?,
            "sk" => entry.sk = hex_field(value)?,
            "sm" => entry.sm = hex_field(value)?,
            "mlen" | "smlen" => {}
            _ => return Err(CryptoError::InvalidEncoding("KAT field name")),
        }
    }
    out.extend(cur);
    Ok(out)
}
