//! Instrumentation hooks inside the verification path.
//!
//! The native verifier reports every primitive event it performs to a
//! [`CostMeter`]. [`NoMeter`] compiles the hooks away; a gas model can price
//! the events to emulate interpreted execution.

/// Raw event counts observed during one verification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    /// Bytes fed into SHAKE256 (nonce and message).
    pub hash_absorbed_bytes: u64,
    /// Bytes squeezed out of SHAKE256 while hashing to a point.
    pub hash_squeezed_bytes: u64,
    /// Keccak-f[1600] permutations implied by the above.
    pub keccak_permutations: u64,
    /// NTT / inverse-NTT butterflies.
    pub ntt_butterflies: u64,
    /// Multiplications in Z_q (butterfly twiddles, pointwise products, scaling).
    pub field_muls: u64,
    /// Coefficient-sized memory words read or written.
    pub memory_words: u64,
}

pub trait CostMeter {
    fn hash_absorb(&mut self, bytes: u64);
    fn hash_squeeze(&mut self, bytes: u64);
    fn keccak_permutations(&mut self, count: u64);
    fn ntt_butterflies(&mut self, count: u64);
    fn field_muls(&mut self, count: u64);
    fn memory_words(&mut self, count: u64);
}

/// Discards every event.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoMeter;

impl CostMeter for NoMeter {
    #[inline(always)]
    fn hash_absorb(&mut self, _: u64) {}
    #[inline(always)]
    fn hash_squeeze(&mut self, _: u64) {}
    #[inline(always)]
    fn keccak_permutations(&mut self, _: u64) {}
    #[inline(always)]
    fn ntt_butterflies(&mut self, _: u64) {}
    #[inline(always)]
    fn field_muls(&mut self, _: u64) {}
    #[inline(always)]
    fn memory_words(&mut self, _: u64) {}
}

impl CostMeter for OpCounts {
    fn hash_absorb(&mut self, bytes: u64) {
        self.hash_absorbed_bytes += bytes;
    }
    fn hash_squeeze(&mut self, bytes: u64) {
        self.hash_squeezed_bytes += bytes;
    }
    fn keccak_permutations(&mut self, count: u64) {
        self.keccak_permutations += count;
    }
    fn ntt_butterflies(&mut self, count: u64) {
        self.ntt_butterflies += count;
    }
    fn field_muls(&mut self, count: u64) {
        self.field_muls += count;
    }
    fn memory_words(&mut self, count: u64) {
        self.memory_words += count;
    }
}
