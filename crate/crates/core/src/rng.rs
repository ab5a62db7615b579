//! Reproducible random streams.
//!
//! Every experiment declares a single master seed. Independent streams are
//! derived from it by selecting a ChaCha stream id, so any component (an index
//! matrix, a chain, an SMC particle at a given generation) can own a private
//! generator whose output does not depend on scheduling order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// A counter-based random stream derived from `(master seed, stream id)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream keyed by a path of task identifiers, e.g. `[generation, particle]`.
    pub fn for_task(seed: u64, path: &[u64]) -> Self {
        let mut h = 0x9e37_79b9_7f4a_7c15_u64;
        for &p in path {
            h = splitmix(h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        }
        Self::new(seed, h)
    }

    /// A fresh master seed for an independent sub-experiment.
    pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
        Self::for_task(seed, path).rng.next_u64()
    }

    /// A child stream that shares this stream's master seed.
    pub fn child(&self, label: u64) -> Self {
        Self::for_task(self.seed, &[self.stream, label])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer on `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Exponential draw with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        e / rate
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
