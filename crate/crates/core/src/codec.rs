//! Canonical length-prefixed binary encoding shared by certificates, CSRs,
//! meta-transaction payloads, DID records and snapshots.
//!
//! Integers are fixed-width big-endian; variable fields carry a u32 length
//! prefix. Readers reject short input, oversize lengths and trailing bytes,
//! so every value has exactly one encoding.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnknownVersion(u8),
    #[error("truncated input")]
    Truncated,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid length for {0}")]
    BadLength(&'static str),
    #[error("invalid {0}")]
    Invalid(&'static str),
}

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_header(magic: &[u8; 4], version: u8) -> Self {
        let mut w = Self::new();
        w.raw(magic);
        w.u8(version);
        w
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.raw(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.raw(&v.to_be_bytes())
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(u32::try_from(v.len()).expect("field longer than 4 GiB"));
        self.raw(v)
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    /// Checks the magic and returns the version byte.
    pub fn with_header(buf: &'a [u8], magic: &[u8; 4]) -> Result<(Self, u8), DecodeError> {
        let mut r = Reader::new(buf);
        if r.raw(4).map_err(|_| DecodeError::BadMagic)? != magic {
            return Err(DecodeError::BadMagic);
        }
        let version = r.u8()?;
        Ok((r, version))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.raw(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.raw(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        self.raw(len)
    }

    /// A length-prefixed field that must be exactly `len` bytes.
    pub fn fixed(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], DecodeError> {
        let v = self.bytes()?;
        if v.len() != len {
            return Err(DecodeError::BadLength(what));
        }
        Ok(v)
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| DecodeError::Invalid("utf-8 string"))
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

const ARMOR_WIDTH: usize = 64;

/// Hex text armor with BEGIN/END markers.
pub fn armor(label: &str, bytes: &[u8]) -> String {
    let hex = hex::encode(bytes);
    let mut out = format!("-----BEGIN {label}-----\n");
    for chunk in hex.as_bytes().chunks(ARMOR_WIDTH) {
        out.push_str(std::str::from_utf8(chunk).expect("hex is ascii"));
        out.push('\n');
    }
    out.push_str(&format!("-----END {label}-----\n"));
    out
}

pub fn dearmor(label: &str, text: &str) -> Result<Vec<u8>, DecodeError> {
    let begin = format!("-----BEGIN {label}-----");
    let end = format!("-----END {label}-----");
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(begin.as_str()) {
        return Err(DecodeError::Invalid("armor header"));
    }
    let mut hex = String::new();
    for line in lines.by_ref() {
        if line == end {
            if lines.next().is_some() {
                return Err(DecodeError::TrailingBytes(1));
            }
            return hex::decode(&hex).map_err(|_| DecodeError::Invalid("armor body"));
        }
        hex.push_str(line);
    }
    Err(DecodeError::Invalid("armor footer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_rejects_trailing_and_short_input() {
        let mut w = Writer::with_header(b"TEST", 1);
        w.u64(7).bytes(b"abc");
        let mut bytes = w.finish();

        let (mut r, v) = Reader::with_header(&bytes, b"TEST").unwrap();
        assert_eq!(v, 1);
        assert_eq!(r.u64().unwrap(), 7);
        assert_eq!(r.bytes().unwrap(), b"abc");
        r.finish().unwrap();

        bytes.push(0);
        let (mut r, _) = Reader::with_header(&bytes, b"TEST").unwrap();
        r.u64().unwrap();
        r.bytes().unwrap();
        assert_eq!(r.finish(), Err(DecodeError::TrailingBytes(1)));

        let (mut r, _) = Reader::with_header(&bytes[..10], b"TEST").unwrap();
        assert_eq!(r.u64(), Err(DecodeError::Truncated));
        assert!(Reader::with_header(b"NOPE\x01", b"TEST").is_err());
    }

    #[test]
    fn armor_round_trip() {
        let data: Vec<u8> = (0..=255).collect();
        let text = armor("THING", &data);
        assert!(text.starts_with("-----BEGIN THING-----\n"));
        assert_eq!(dearmor("THING", &text).unwrap(), data);
        assert!(dearmor("OTHER", &text).is_err());
        assert!(dearmor("THING", &format!("{text}junk\n")).is_err());
    }
}
