//! Deterministic random-number contract.
//!
//! A [`SeededRng`] is a ChaCha20 keystream keyed by a 64-bit seed and selected
//! by a 32-bit stream id. Equal `(seed, stream)` pairs produce equal byte
//! streams on every platform; distinct streams are independent keystreams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Well-known stream ids, so that independent consumers of one seed never
/// share a keystream.
pub mod streams {
    pub const SOURCE: u32 = 1;
    pub const ALICE: u32 = 2;
    pub const BOB: u32 = 3;
    pub const CODE: u32 = 4;
    pub const OT_INPUTS: u32 = 5;
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u32,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u32) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream as u64);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u32 {
        self.stream
    }

    /// A generator on another stream of the same seed.
    pub fn fork(&self, stream: u32) -> Self {
        Self::new(self.seed, stream)
    }

    pub fn bit(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
