//! Recursive-length-prefix encoding as used by Ethereum.

use ruint::aliases::U256;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Bytes(Vec<u8>),
    List(Vec<Item>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlpError {
    #[error("input ended early")]
    Truncated,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("non-canonical encoding")]
    NonCanonical,
    #[error("expected a byte string")]
    ExpectedBytes,
    #[error("expected a list")]
    ExpectedList,
    #[error("integer has leading zero bytes or is too large")]
    BadInteger,
}

impl Item {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        Item::Bytes(b.into())
    }

    pub fn u64(v: u64) -> Self {
        Item::Bytes(trim_zeros(&v.to_be_bytes()).to_vec())
    }

    pub fn u256(v: &U256) -> Self {
        Item::Bytes(trim_zeros(&v.to_be_bytes::<32>()).to_vec())
    }

    /// An unsigned integer given as 32 big-endian bytes.
    pub fn uint_be(v: &[u8]) -> Self {
        Item::Bytes(trim_zeros(v).to_vec())
    }

    pub fn as_bytes(&self) -> Result<&[u8], RlpError> {
        match self {
            Item::Bytes(b) => Ok(b),
            Item::List(_) => Err(RlpError::ExpectedBytes),
        }
    }

    pub fn as_list(&self) -> Result<&[Item], RlpError> {
        match self {
            Item::List(l) => Ok(l),
            Item::Bytes(_) => Err(RlpError::ExpectedList),
        }
    }

    pub fn as_u64(&self) -> Result<u64, RlpError> {
        let b = self.canonical_uint()?;
        if b.len() > 8 {
            return Err(RlpError::BadInteger);
        }
        Ok(b.iter().fold(0u64, |acc, &x| (acc << 8) | x as u64))
    }

    pub fn as_u256(&self) -> Result<U256, RlpError> {
        let b = self.canonical_uint()?;
        U256::try_from_be_slice(b).ok_or(RlpError::BadInteger)
    }

    /// Left-pads a canonical integer to 32 bytes.
    pub fn as_word(&self) -> Result<[u8; 32], RlpError> {
        let b = self.canonical_uint()?;
        if b.len() > 32 {
            return Err(RlpError::BadInteger);
        }
        let mut out = [0u8; 32];
        out[32 - b.len()..].copy_from_slice(b);
        Ok(out)
    }

    fn canonical_uint(&self) -> Result<&[u8], RlpError> {
        let b = self.as_bytes()?;
        if b.first() == Some(&0) {
            return Err(RlpError::BadInteger);
        }
        Ok(b)
    }
}

fn trim_zeros(b: &[u8]) -> &[u8] {
    let start = b.iter().position(|&x| x != 0).unwrap_or(b.len());
    &b[start..]
}

fn encode_length(len: usize, offset: u8, out: &mut Vec<u8>) {
    if len < 56 {
        out.push(offset + len as u8);
    } else {
        let be = len.to_be_bytes();
        let len_bytes = trim_zeros(&be);
        out.push(offset + 55 + len_bytes.len() as u8);
        out.extend_from_slice(len_bytes);
    }
}

pub fn encode(item: &Item) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(item, &mut out);
    out
}

pub fn encode_into(item: &Item, out: &mut Vec<u8>) {
    match item {
        Item::Bytes(b) if b.len() == 1 && b[0] < 0x80 => out.push(b[0]),
        Item::Bytes(b) => {
            encode_length(b.len(), 0x80, out);
            out.extend_from_slice(b);
        }
        Item::List(items) => {
            let mut body = Vec::new();
            for i in items {
                encode_into(i, &mut body);
            }
            encode_length(body.len(), 0xc0, out);
            out.extend_from_slice(&body);
        }
    }
}

pub fn encode_list(items: &[Item]) -> Vec<u8> {
    encode(&Item::List(items.to_vec()))
}

/// Strict decoder: rejects every non-canonical form and trailing input.
pub fn decode(bytes: &[u8]) -> Result<Item, RlpError> {
    let (item, used) = decode_one(bytes)?;
    if used != bytes.len() {
        return Err(RlpError::Trailing(bytes.len() - used));
    }
    Ok(item)
}

fn read_len(bytes: &[u8], n: usize) -> Result<usize, RlpError> {
    let b = bytes.get(..n).ok_or(RlpError::Truncated)?;
    if b[0] == 0 || n > std::mem::size_of::<usize>() {
        return Err(RlpError::NonCanonical);
    }
    let len = b.iter().fold(0usize, |acc, &x| (acc << 8) | x as usize);
    if len < 56 {
        return Err(RlpError::NonCanonical);
    }
    Ok(len)
}

fn decode_one(bytes: &[u8]) -> Result<(Item, usize), RlpError> {
    let &prefix = bytes.first().ok_or(RlpError::Truncated)?;
    let (is_list, header, len) = match prefix {
        0x00..=0x7f => return Ok((Item::Bytes(vec![prefix]), 1)),
        0x80..=0xb7 => (false, 1, (prefix - 0x80) as usize),
        0xb8..=0xbf => {
            let n = (prefix - 0xb7) as usize;
            (false, 1 + n, read_len(&bytes[1..], n)?)
        }
        0xc0..=0xf7 => (true, 1, (prefix - 0xc0) as usize),
        0xf8..=0xff => {
            let n = (prefix - 0xf7) as usize;
            (true, 1 + n, read_len(&bytes[1..], n)?)
        }
    };
    let end = header.checked_add(len).ok_or(RlpError::Truncated)?;
    let body = bytes.get(header..end).ok_or(RlpError::Truncated)?;
    if !is_list {
        if len == 1 && body[0] < 0x80 {
            return Err(RlpError::NonCanonical);
        }
        return Ok((Item::Bytes(body.to_vec()), end));
    }
    let mut items = Vec::new();
    let mut rest = body;
    while !rest.is_empty() {
        let (item, used) = decode_one(rest)?;
        items.push(item);
        rest = &rest[used..];
    }
    Ok((Item::List(items), end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_vectors() {
        assert_eq!(encode(&Item::bytes(vec![])), [0x80]);
        assert_eq!(encode(&Item::bytes(b"dog".to_vec())), [0x83, 0x64, 0x6f, 0x67]);
        assert_eq!(encode(&Item::List(vec![])), [0xc0]);
        assert_eq!(encode(&Item::u64(0)), [0x80]);
        assert_eq!(encode(&Item::u64(1024)), [0x82, 0x04, 0x00]);
    }

    #[test]
    fn rejects_non_canonical() {
        assert_eq!(decode(&[0x81, 0x05]), Err(RlpError::NonCanonical));
        assert_eq!(decode(&[0xb8, 0x01, 0x80]), Err(RlpError::NonCanonical));
        assert_eq!(decode(&[0x83, 0x64]), Err(RlpError::Truncated));
        assert_eq!(decode(&[0x80, 0x80]), Err(RlpError::Trailing(1)));
        assert_eq!(Item::bytes(vec![0, 1]).as_u64(), Err(RlpError::BadInteger));
    }
}
