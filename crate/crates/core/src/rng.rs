//! Replayable random streams.
//!
//! Each realization gets its own [`RngStream`], keyed by a master seed and a
//! realization index. The generator is ChaCha8 used as a counter-based
//! generator: the master seed is expanded into the 256-bit key with
//! `seed_from_u64` (a PCG32 expansion, fixed by `rand_core`) and the
//! realization index selects the 64-bit ChaCha stream. Distinct indices
//! therefore read disjoint keystreams of the same cipher instance.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A source of uniform indices in `0..n`.
///
/// The urn draws through this trait so tests can inject forced draws.
pub trait IndexSource {
    fn draw_index(&mut self, n: usize) -> usize;
}

/// Deterministic random stream for one realization.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    realization_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, realization_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(realization_index);
        Self {
            master_seed,
            realization_index,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn realization_index(&self) -> u64 {
        self.realization_index
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Unbiased integer in `0..n` (Lemire's multiply-and-reject method).
    ///
    /// Every value has probability exactly `1/n`: products landing in the
    /// short low zone of size `2^64 mod n` are rejected and redrawn.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "cannot draw from an empty range");
        let mut m = (self.inner.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.inner.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

impl IndexSource for RngStream {
    #[inline]
    fn draw_index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }
}

impl RngCore for RngStream {
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

/// Replays a fixed list of indices; panics when exhausted or out of range.
#[derive(Clone, Debug)]
pub struct ForcedDraws {
    indices: Vec<usize>,
    pos: usize,
}

impl ForcedDraws {
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        Self {
            indices: indices.into(),
            pos: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.indices.len() - self.pos
    }
}

impl IndexSource for ForcedDraws {
    fn draw_index(&mut self, n: usize) -> usize {
        let i = *self
            .indices
            .get(self.pos)
            .expect("forced draw sequence exhausted");
        assert!(i < n, "forced index {i} out of range for {n} balls");
        self.pos += 1;
        i
    }
}
