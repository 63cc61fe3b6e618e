//! Length-prefixed frames used by the entropy bootstrap and tunnel
//! handshakes: `u32 length (BE) ‖ u8 type ‖ payload`, where the length
//! counts the type byte and payload.

use crate::codec::DecodeError;

pub mod kind {
    pub const SHARE: u8 = 1;
    pub const AUTH: u8 = 2;
    pub const KEM_PUB: u8 = 3;
    pub const KEM_CT: u8 = 4;
    pub const CONFIRM: u8 = 5;
    pub const ENTROPY_REQ: u8 = 6;
    pub const ENTROPY_RESP: u8 = 7;

    pub const TUNNEL_HELLO: u8 = 16;
    pub const TUNNEL_RESPONSE: u8 = 17;
    pub const TUNNEL_KEY_EXCHANGE: u8 = 18;
    pub const TUNNEL_FINISHED: u8 = 19;
    pub const TUNNEL_ALERT: u8 = 20;

    pub const ERROR: u8 = 255;
}

/// Upper bound on a frame body; large enough for a McEliece public key.
pub const MAX_FRAME_LEN: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: u8, payload: Vec<u8>) -> Self {
        Frame { kind, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let len = u32::try_from(self.payload.len() + 1).expect("frame too large");
        let mut out = Vec::with_capacity(self.payload.len() + 5);
        out.extend_from_slice(&len.to_be_bytes());
        out.push(self.kind);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let (frame, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(DecodeError::TrailingBytes(bytes.len() - used));
        }
        Ok(frame)
    }

    /// Decodes one frame from the front of a stream, returning bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), DecodeError> {
        let header: [u8; 4] = bytes.get(..4).ok_or(DecodeError::Truncated)?.try_into().unwrap();
        let len = u32::from_be_bytes(header) as usize;
        if len == 0 || len > MAX_FRAME_LEN {
            return Err(DecodeError::BadLength("frame"));
        }
        let body = bytes.get(4..4 + len).ok_or(DecodeError::Truncated)?;
        Ok((Frame::new(body[0], body[1..].to_vec()), 4 + len))
    }
}

/// Everything observed on a simulated channel, in order.
#[derive(Clone, Debug, Default)]
pub struct WireLog {
    entries: Vec<(String, Vec<u8>)>,
}

impl WireLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, channel: impl Into<String>, bytes: &[u8]) {
        self.entries.push((channel.into(), bytes.to_vec()));
    }

    pub fn record_frame(&mut self, channel: impl Into<String>, frame: &Frame) {
        self.record(channel, &frame.encode());
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.entries.iter().map(|(c, b)| (c.as_str(), b.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(|(_, b)| b.len()).sum()
    }

    /// True if `needle` occurs inside any single logged message.
    pub fn contains(&self, needle: &[u8]) -> bool {
        !needle.is_empty() && self.entries.iter().any(|(_, b)| b.windows(needle.len()).any(|w| w == needle))
    }
}

/// Hook applied to every encoded frame before delivery.
pub type Tap<'a> = &'a mut dyn FnMut(&str, &mut Vec<u8>);

/// Simulated in-memory channels. Every frame is encoded, passed through an
/// optional tap (the attacker's position), logged and decoded again.
pub struct Link<'a> {
    pub log: &'a mut WireLog,
    pub tap: Option<Tap<'a>>,
}

impl<'a> Link<'a> {
    pub fn new(log: &'a mut WireLog) -> Self {
        Link { log, tap: None }
    }

    pub fn with_tap(log: &'a mut WireLog, tap: Tap<'a>) -> Self {
        Link { log, tap: Some(tap) }
    }

    pub fn transmit(&mut self, channel: &str, frame: &Frame) -> Result<Frame, DecodeError> {
        let mut bytes = frame.encode();
        if let Some(tap) = self.tap.as_mut() {
            tap(channel, &mut bytes);
        }
        self.log.record(channel, &bytes);
        Frame::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let f = Frame::new(kind::AUTH, vec![1, 2, 3]);
        let bytes = f.encode();
        assert_eq!(bytes, [0, 0, 0, 4, 2, 1, 2, 3]);
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
        assert!(Frame::decode(&bytes[..7]).is_err());
        assert!(Frame::decode(&[bytes.clone(), vec![0]].concat()).is_err());
        assert!(Frame::decode(&[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn log_search() {
        let mut log = WireLog::new();
        log.record("a", b"hello world");
        assert!(log.contains(b"lo wo"));
        assert!(!log.contains(b"xyz"));
        assert!(!log.contains(b""));
    }
}
