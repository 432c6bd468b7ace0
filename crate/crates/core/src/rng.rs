//! Seeded random streams.
//!
//! A stream is identified by `(seed, stream)`: the ChaCha key is derived from
//! `seed` and the 64-bit ChaCha stream id is `stream`. Monte Carlo replicate
//! `r` under master seed `S` always uses stream `(S, r)`, so results do not
//! depend on which worker thread runs which replicate.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream with its provenance attached.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream for Monte Carlo replicate `replicate` under `master_seed`.
    pub fn for_replicate(master_seed: u64, replicate: u64) -> Self {
        Self::new(master_seed, replicate)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
