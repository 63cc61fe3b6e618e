//! Falcon public-key and signature encodings.

use super::{N, Q};

/// Decodes 512 coefficients packed as 14-bit big-endian values.
/// Every value must be below q and unused trailing bits must be zero.
pub(crate) fn modq_decode(input: &[u8]) -> Option<[u16; N]> {
    if input.len() != (N * 14).div_ceil(8) {
        return None;
    }
    let mut out = [0u16; N];
    let mut acc: u32 = 0;
    let mut acc_len = 0;
    let mut u = 0;
    for &byte in input {
        acc = (acc << 8) | byte as u32;
        acc_len += 8;
        if acc_len >= 14 {
            acc_len -= 14;
            let w = (acc >> acc_len) & 0x3fff;
            if w >= Q as u32 {
                return None;
            }
            out[u] = w as u16;
            u += 1;
        }
    }
    if acc & ((1 << acc_len) - 1) != 0 {
        return None;
    }
    Some(out)
}

/// Encodes coefficients (all below q) in the 14-bit packed form.
#[cfg(test)]
pub(crate) fn modq_encode(coeffs: &[u16; N]) -> Vec<u8> {
    let mut out = Vec::with_capacity((N * 14).div_ceil(8));
    let mut acc: u32 = 0;
    let mut acc_len = 0;
    for &c in coeffs {
        acc = (acc << 14) | c as u32;
        acc_len += 14;
        while acc_len >= 8 {
            acc_len -= 8;
            out.push((acc >> acc_len) as u8);
        }
    }
    if acc_len > 0 {
        out.push((acc << (8 - acc_len)) as u8);
    }
    out
}

/// Decodes the compressed signature vector.
///
/// Each coefficient is a sign bit, seven low bits, then the high bits in
/// unary terminated by a one. Returns the coefficients and the number of
/// bytes consumed; rejects "minus zero", magnitudes above 2047 and non-zero
/// padding bits in the last consumed byte.
pub(crate) fn comp_decode(input: &[u8]) -> Option<([i16; N], usize)> {
    let mut out = [0i16; N];
    let mut acc: u32 = 0;
    let mut acc_len: u32 = 0;
    let mut v = 0;
    for coeff in out.iter_mut() {
        let byte = *input.get(v)?;
        v += 1;
        acc = (acc << 8) | byte as u32;
        let b = acc >> acc_len;
        let negative = b & 0x80 != 0;
        let mut m = b & 0x7f;
        loop {
            if acc_len == 0 {
                let byte = *input.get(v)?;
                v += 1;
                acc = (acc << 8) | byte as u32;
                acc_len = 8;
            }
            acc_len -= 1;
            if (acc >> acc_len) & 1 != 0 {
                break;
            }
            m += 128;
            if m > 2047 {
                return None;
            }
        }
        if negative && m == 0 {
            return None;
        }
        *coeff = if negative { -(m as i16) } else { m as i16 };
    }
    if acc & ((1 << acc_len) - 1) != 0 {
        return None;
    }
    Some((out, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modq_round_trip() {
        let coeffs: [u16; N] = std::array::from_fn(|i| ((i * 7919) % Q) as u16);
        let enc = modq_encode(&coeffs);
        assert_eq!(enc.len(), 896);
        assert_eq!(modq_decode(&enc), Some(coeffs));
    }

    #[test]
    fn modq_rejects_out_of_range() {
        let mut coeffs = [0u16; N];
        coeffs[0] = 0x3fff;
        // modq_encode does not check the range, so this produces a value >= q
        let enc = modq_encode(&coeffs);
        assert_eq!(modq_decode(&enc), None);
        assert_eq!(modq_decode(&enc[..895]), None);
    }

    #[test]
    fn comp_rejects_minus_zero_and_truncation() {
        // sign=1, low=0, then terminator bit: 1000_0000 1...
        let mut bytes = vec![0x80, 0x80];
        bytes.resize(1024, 0xff);
        assert!(comp_decode(&bytes).is_none());
        assert!(comp_decode(&[0x00]).is_none());
    }

    #[test]
    fn comp_all_zero_vector() {
        // each zero coefficient is 0000_0000 followed by a single 1 bit: 9 bits
        let bits = N * 9;
        let mut bytes = vec![0u8; bits.div_ceil(8)];
        for i in 0..N {
            let bit = i * 9 + 8;
            bytes[bit / 8] |= 0x80 >> (bit % 8);
        }
        let (coeffs, used) = comp_decode(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert!(coeffs.iter().all(|&c| c == 0));
    }
}
