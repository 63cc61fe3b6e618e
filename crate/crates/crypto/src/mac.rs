//! Keyed SHAKE256 message authentication: `SHAKE256(key || transcript)[..32]`.

use crate::hash::shake256_concat;

pub const MAC_LEN: usize = 32;

pub fn mac(key: &[u8], transcript: &[u8]) -> [u8; MAC_LEN] {
    let out = shake256_concat([key, transcript], MAC_LEN).expect("non-zero output length");
    out.try_into().expect("32-byte output")
}

pub fn verify_mac(key: &[u8], transcript: &[u8], tag: &[u8]) -> bool {
    let expected = mac(key, transcript);
    tag.len() == MAC_LEN && expected.iter().zip(tag).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_depends_on_key_and_transcript() {
        let t = mac(b"key-one", b"hello");
        assert!(verify_mac(b"key-one", b"hello", &t));
        assert!(!verify_mac(b"key-two", b"hello", &t));
        assert!(!verify_mac(b"key-one", b"hellp", &t));
        assert!(!verify_mac(b"key-one", b"hello", &t[..31]));
    }
}
