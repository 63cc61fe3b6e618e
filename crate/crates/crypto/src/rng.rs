//! Explicit randomness sources.
//!
//! Nothing in this crate draws from ambient randomness. Callers pass a
//! [`RandomSource`]; for the reference C code the source is installed on the
//! current thread for the duration of the call and served through
//! `PQCLEAN_randombytes`.

use std::cell::Cell;
use std::os::raw::c_int;
use std::ptr::NonNull;

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes256;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

/// A byte stream that key generation, signing and encapsulation draw from.
pub trait RandomSource {
    fn fill_bytes(&mut self, dest: &mut [u8]);
}

impl<T: RandomSource + ?Sized> RandomSource for &mut T {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        (**self).fill_bytes(dest)
    }
}

/// SHAKE256 expansion of a caller-supplied seed.
#[derive(Clone)]
pub struct ShakeStream {
    reader: <Shake256 as ExtendableOutput>::Reader,
}

impl ShakeStream {
    const DOMAIN: &'static [u8] = b"pqchain/shake-stream/v1";

    pub fn new(seed: &[u8]) -> Self {
        let mut hasher = Shake256::default();
        hasher.update(Self::DOMAIN);
        hasher.update(&(seed.len() as u64).to_be_bytes());
        hasher.update(seed);
        Self {
            reader: hasher.finalize_xof(),
        }
    }
}

impl RandomSource for ShakeStream {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.reader.read(dest);
    }
}

/// The AES-256 CTR_DRBG used to generate the NIST known-answer files.
///
/// Only useful for reproducing published vectors.
pub struct NistKatDrbg {
    key: [u8; 32],
    v: [u8; 16],
}

impl NistKatDrbg {
    pub fn new(entropy: &[u8; 48]) -> Self {
        let mut drbg = Self {
            key: [0; 32],
            v: [0; 16],
        };
        drbg.update(Some(entropy));
        drbg
    }

    fn increment_v(&mut self) {
        for byte in self.v.iter_mut().rev() {
            if *byte == 0xff {
                *byte = 0;
            } else {
                *byte += 1;
                break;
            }
        }
    }

    fn encrypt_v(&self) -> [u8; 16] {
        let cipher = Aes256::new(&self.key.into());
        let mut block = self.v.into();
        cipher.encrypt_block(&mut block);
        block.into()
    }

    fn update(&mut self, provided: Option<&[u8; 48]>) {
        let mut temp = [0u8; 48];
        for chunk in temp.chunks_mut(16) {
            self.increment_v();
            chunk.copy_from_slice(&self.encrypt_v());
        }
        if let Some(data) = provided {
            for (t, d) in temp.iter_mut().zip(data) {
                *t ^= d;
            }
        }
        self.key.copy_from_slice(&temp[..32]);
        self.v.copy_from_slice(&temp[32..]);
    }
}

impl RandomSource for NistKatDrbg {
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(16) {
            self.increment_v();
            let block = self.encrypt_v();
            chunk.copy_from_slice(&block[..chunk.len()]);
        }
        self.update(None);
    }
}

thread_local! {
    static INSTALLED: Cell<Option<NonNull<dyn RandomSource>>> = const { Cell::new(None) };
}

/// Runs `f` with `source` serving every `randombytes` call made on this thread.
pub(crate) fn with_source<R>(source: &mut dyn RandomSource, f: impl FnOnce() -> R) -> R {
    struct Restore(Option<NonNull<dyn RandomSource>>);
    impl Drop for Restore {
        fn drop(&mut self) {
            INSTALLED.with(|slot| slot.set(self.0));
        }
    }

    let ptr = NonNull::from(source);
    // SAFETY: the pointer only lives in the slot until `Restore` runs, which
    // happens before `source`'s borrow ends.
    let ptr: NonNull<dyn RandomSource + 'static> = unsafe { std::mem::transmute(ptr) };
    let _restore = Restore(INSTALLED.with(|slot| slot.replace(Some(ptr))));
    f()
}

#[no_mangle]
extern "C" fn PQCLEAN_randombytes(out: *mut u8, n: usize) -> c_int {
    let Some(mut source) = INSTALLED.with(Cell::get) else {
        eprintln!("pqchain-crypto: reference code requested randomness with no source installed");
        std::process::abort();
    };
    if n == 0 {
        return 0;
    }
    // SAFETY: the C caller hands us a writable buffer of `n` bytes, and the
    // installed source is exclusively borrowed by the enclosing `with_source`.
    unsafe {
        let buf = std::slice::from_raw_parts_mut(out, n);
        source.as_mut().fill_bytes(buf);
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kat_drbg_matches_nist_first_seed() {
        let mut entropy = [0u8; 48];
        for (i, b) in entropy.iter_mut().enumerate() {
            *b = i as u8;
        }
        let mut drbg = NistKatDrbg::new(&entropy);
        let mut seed = [0u8; 48];
        drbg.fill_bytes(&mut seed);
        assert_eq!(
            hex::encode_upper(seed),
            "061550234D158C5EC95595FE04EF7A25767F2E24CC2BC479D09D86DC9ABCFDE7056A8C266F9EF97ED08541DBD2E1FFA1"
        );
    }

    #[test]
    fn shake_stream_is_replayable() {
        let mut a = ShakeStream::new(b"seed");
        let mut b = ShakeStream::new(b"seed");
        let mut c = ShakeStream::new(b"seee");
        let (mut x, mut y, mut z) = ([0u8; 64], [0u8; 64], [0u8; 64]);
        a.fill_bytes(&mut x);
        b.fill_bytes(&mut y);
        c.fill_bytes(&mut z);
        assert_eq!(x, y);
        assert_ne!(x, z);
    }
}
