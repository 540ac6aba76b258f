//! Portable random source for scene generation.
//!
//! Algorithm: ChaCha with 8 rounds. The 32-byte key is the seed as 8
//! little-endian bytes, then the lane as 8 little-endian bytes, then zeros;
//! the stream id is the scene index. Lane 0 drives scene-level draws and
//! lane `j + 1` drives everything about person `j`.
//! Derived draws are defined here rather than taken from `rand` so another
//! implementation can reproduce them:
//!
//! - `uniform`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`
//! - `normal`: Box-Muller with `u1 = 1 - uniform()`, `u2 = uniform()`,
//!   returning `sqrt(-2 ln u1) * cos(2 pi u2)`; two draws per call, nothing cached
//! - `below(n)`: `floor(uniform() * n)`

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SynthRng(ChaCha8Rng);

impl SynthRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::with_lane(seed, stream, 0)
    }

    pub fn with_lane(seed: u64, stream: u64, lane: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.uniform() * n as f64) as u64).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = SynthRng::new(42, 0);
                move |_| r.next_u64()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = SynthRng::new(42, 0);
                move |_| r.next_u64()
            })
            .collect();
        let mut other = SynthRng::new(42, 1);
        assert_eq!(a, b);
        assert_ne!(a[0], other.next_u64());
    }

    #[test]
    fn draws_in_range() {
        let mut r = SynthRng::new(7, 3);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
            assert!(r.normal().is_finite());
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = SynthRng::new(1, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }
}
