//! Negacyclic number-theoretic transform over Z_q[x]/(x^512 + 1), q = 12289.

use std::sync::OnceLock;

use super::meter::CostMeter;
use super::{N, Q};

const Q32: u32 = Q as u32;

struct Tables {
    /// `psi^bitrev9(i)` for a primitive 1024-th root of unity `psi`.
    zetas: [u32; N],
    n_inv: u32,
}

fn pow_mod(mut base: u32, mut exp: u32) -> u32 {
    let mut acc = 1u32;
    base %= Q32;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % Q32;
        }
        base = base * base % Q32;
        exp >>= 1;
    }
    acc
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        // q - 1 = 2^12 * 3
        let generator = (2..Q32)
            .find(|&g| pow_mod(g, (Q32 - 1) / 2) != 1 && pow_mod(g, (Q32 - 1) / 3) != 1)
            .expect("Z_q* is cyclic");
        let psi = pow_mod(generator, (Q32 - 1) / (2 * N as u32));
        let mut zetas = [0u32; N];
        for (i, z) in zetas.iter_mut().enumerate() {
            let rev = (i as u32).reverse_bits() >> (32 - 9);
            *z = pow_mod(psi, rev);
        }
        Tables {
            zetas,
            n_inv: pow_mod(N as u32, Q32 - 2),
        }
    })
}

#[inline(always)]
fn mul(a: u32, b: u32) -> u32 {
    a * b % Q32
}

#[inline(always)]
fn add(a: u32, b: u32) -> u32 {
    let s = a + b;
    if s >= Q32 {
        s - Q32
    } else {
        s
    }
}

#[inline(always)]
fn sub(a: u32, b: u32) -> u32 {
    if a >= b {
        a - b
    } else {
        a + Q32 - b
    }
}

/// In-place forward transform; coefficients must already be reduced mod q.
pub fn forward<M: CostMeter>(a: &mut [u32; N], meter: &mut M) {
    let zetas = &tables().zetas;
    let mut k = 0;
    let mut len = N / 2;
    while len >= 1 {
        let mut start = 0;
        while start < N {
            k += 1;
            let zeta = zetas[k];
            for j in start..start + len {
                let t = mul(zeta, a[j + len]);
                a[j + len] = sub(a[j], t);
                a[j] = add(a[j], t);
            }
            start += 2 * len;
        }
        len >>= 1;
    }
    let butterflies = (N / 2 * 9) as u64;
    meter.ntt_butterflies(butterflies);
    meter.field_muls(butterflies);
    // two coefficient reads, two writes and one twiddle read per butterfly
    meter.memory_words(5 * butterflies);
}

/// In-place inverse transform, including the `1/n` scaling.
pub fn inverse<M: CostMeter>(a: &mut [u32; N], meter: &mut M) {
    let t = tables();
    let mut k = N;
    let mut len = 1;
    while len < N {
        let mut start = 0;
        while start < N {
            k -= 1;
            let zeta = Q32 - t.zetas[k];
            for j in start..start + len {
                let u = a[j];
                a[j] = add(u, a[j + len]);
                a[j + len] = mul(zeta, sub(u, a[j + len]));
            }
            start += 2 * len;
        }
        len <<= 1;
    }
    for x in a.iter_mut() {
        *x = mul(*x, t.n_inv);
    }
    let butterflies = (N / 2 * 9) as u64;
    meter.ntt_butterflies(butterflies);
    meter.field_muls(butterflies + N as u64);
    meter.memory_words(5 * butterflies + 2 * N as u64);
}

/// Pointwise product in the NTT domain, written into `a`.
pub fn pointwise<M: CostMeter>(a: &mut [u32; N], b: &[u32; N], meter: &mut M) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = mul(*x, *y);
    }
    meter.field_muls(N as u64);
    meter.memory_words(3 * N as u64);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::falcon::meter::NoMeter;

    fn schoolbook(a: &[u32; N], b: &[u32; N]) -> [u32; N] {
        let mut out = [0i64; N];
        for i in 0..N {
            for j in 0..N {
                let prod = a[i] as i64 * b[j] as i64;
                if i + j < N {
                    out[i + j] += prod;
                } else {
                    out[i + j - N] -= prod;
                }
            }
        }
        out.map(|x| x.rem_euclid(Q as i64) as u32)
    }

    fn sample(seed: u32) -> [u32; N] {
        let mut state = seed;
        std::array::from_fn(|_| {
            state = state.wrapping_mul(1_103_515_245).wrapping_add(12_345);
            (state >> 8) % Q32
        })
    }

    #[test]
    fn psi_has_order_1024() {
        let psi = tables().zetas[N / 2]; // bitrev9(256) = 1
        assert_eq!(pow_mod(psi, 512), Q32 - 1);
        assert_eq!(mul(N as u32, tables().n_inv), 1);
    }

    #[test]
    fn forward_inverse_identity() {
        let orig = sample(3);
        let mut a = orig;
        forward(&mut a, &mut NoMeter);
        inverse(&mut a, &mut NoMeter);
        assert_eq!(a, orig);
    }

    #[test]
    fn product_matches_schoolbook() {
        for seed in 0..3 {
            let a = sample(seed);
            let b = sample(seed + 100);
            let mut fa = a;
            let mut fb = b;
            forward(&mut fa, &mut NoMeter);
            forward(&mut fb, &mut NoMeter);
            pointwise(&mut fa, &fb, &mut NoMeter);
            inverse(&mut fa, &mut NoMeter);
            assert_eq!(fa, schoolbook(&a, &b));
        }
    }
}
