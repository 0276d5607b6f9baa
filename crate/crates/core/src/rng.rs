//! Counter-keyed deterministic random streams.
//!
//! Every source of randomness in the simulator is a [`Stream`] opened from a
//! `(seed, purpose, indices...)` key. Opening the same key always yields the
//! same sequence, and distinct keys yield statistically independent sequences,
//! so a round's client work can be farmed out to any number of workers in any
//! order without changing a single drawn value. Nothing here is cryptographic;
//! the generator is SplitMix64, which is more than adequate for simulation
//! noise and cheap enough to open per (round, client).

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

/// Purpose tags namespacing the random streams. Two streams with different
/// tags never collide even for equal seeds and indices.
pub mod purpose {
    /// Model parameter initialization.
    pub const INIT: u64 = 1;
    /// Cohort sampling for a round.
    pub const COHORT: u64 = 2;
    /// Mini-batch shuffling inside local training.
    pub const SHUFFLE: u64 = 3;
    /// Per-client label histogram draws.
    pub const LABELS: u64 = 4;
    /// Per-client feature generation.
    pub const FEATURES: u64 = 5;
    /// Held-out evaluation batch generation.
    pub const EVAL: u64 = 6;
    /// Gradient-statistics warm-up sampling.
    pub const WARMUP: u64 = 7;
    /// Monte Carlo trials in the variance checks.
    pub const MONTE_CARLO: u64 = 8;
    /// Batch draws of the step-indexed convergence run.
    pub const THEORY: u64 = 9;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream of pseudo-random values.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
    /// Cached second Box-Muller output.
    spare_gaussian: Option<f64>,
}

impl Stream {
    /// Opens the stream identified by `key`. The key words are mixed into a
    /// single 64-bit state by running each through the output function, so
    /// `[1, 2]` and `[2, 1]` produce unrelated streams.
    pub fn from_key(key: &[u64]) -> Self {
        let mut state = 0x5bf0_3635_f0c2_9ed3; // arbitrary non-zero base
        for &word in key {
            state ^= word;
            splitmix64(&mut state);
            // keep the mixed value, not the counter, as the next base
            state = state.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ word.rotate_left(17);
        }
        Stream {
            state,
            spare_gaussian: None,
        }
    }

    /// Next raw 64-bit value.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe to pass to `ln`.
    #[inline]
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` via rejection-free Lemire reduction.
    /// Bias is below 2^-32 for `bound` up to a few million, which is
    /// irrelevant at simulation scale.
    #[inline]
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (((self.next_u64() >> 32) * bound as u64) >> 32) as usize
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller; the paired output is cached so
    /// consecutive calls consume uniforms in a fixed pattern.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Gamma(shape, 1) via Marsaglia–Tsang squeeze, with the standard
    /// `U^{1/alpha}` boost for shape < 1.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            let boost = self.next_f64_open().powf(1.0 / shape);
            return self.gamma(shape + 1.0) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.gaussian();
            let v = {
                let t = 1.0 + c * x;
                t * t * t
            };
            if v <= 0.0 {
                continue;
            }
            let u = self.next_f64_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Dirichlet(alpha, ..., alpha) over `dim` categories.
    pub fn dirichlet_symmetric(&mut self, alpha: f64, dim: usize) -> Vec<f64> {
        let mut draws: Vec<f64> = (0..dim).map(|_| self.gamma(alpha)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            for d in &mut draws {
                *d /= total;
            }
        } else {
            // all gamma draws underflowed (pathologically small alpha):
            // fall back to uniform rather than dividing by zero
            for d in &mut draws {
                *d = 1.0 / dim as f64;
            }
        }
        draws
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// `count` distinct values from `0..pool`, returned sorted ascending.
    pub fn sample_without_replacement(&mut self, pool: usize, count: usize) -> Vec<usize> {
        debug_assert!(count <= pool);
        let mut ids: Vec<usize> = (0..pool).collect();
        for i in 0..count {
            let j = i + self.next_below(pool - i);
            ids.swap(i, j);
        }
        ids.truncate(count);
        ids.sort_unstable();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = Stream::from_key(&[42, purpose::FEATURES, 7]);
        let mut b = Stream::from_key(&[42, purpose::FEATURES, 7]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn key_order_matters() {
        let mut a = Stream::from_key(&[1, 2]);
        let mut b = Stream::from_key(&[2, 1]);
        let same = (0..32).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn adjacent_keys_decorrelated() {
        // neighbouring (round, client) keys must not produce shifted copies
        let mut a = Stream::from_key(&[9, purpose::SHUFFLE, 3, 0]);
        let mut b = Stream::from_key(&[9, purpose::SHUFFLE, 3, 1]);
        let va: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert!(va.iter().zip(&vb).all(|(x, y)| x != y));
    }

    #[test]
    fn uniform_range_and_moments() {
        let mut s = Stream::from_key(&[3]);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn gaussian_moments() {
        let mut s = Stream::from_key(&[11]);
        let n = 200_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.gaussian();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn gamma_mean_matches_shape() {
        for &shape in &[0.3f64, 1.0, 2.5, 8.0] {
            let mut s = Stream::from_key(&[17, shape.to_bits()]);
            let n = 100_000;
            let mean: f64 = (0..n).map(|_| s.gamma(shape)).sum::<f64>() / n as f64;
            assert!(
                (mean - shape).abs() < 0.05 * shape.max(1.0),
                "shape {shape}: mean {mean}"
            );
        }
    }

    #[test]
    fn dirichlet_normalized() {
        let mut s = Stream::from_key(&[23]);
        for _ in 0..100 {
            let p = s.dirichlet_symmetric(0.1, 10);
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut s = Stream::from_key(&[31]);
        let mut v: Vec<usize> = (0..50).collect();
        s.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, (0..50).collect::<Vec<_>>()); // astronomically unlikely
    }

    #[test]
    fn sampling_without_replacement_sorted_distinct() {
        let mut s = Stream::from_key(&[37]);
        for _ in 0..200 {
            let picked = s.sample_without_replacement(50, 10);
            assert_eq!(picked.len(), 10);
            assert!(picked.windows(2).all(|w| w[0] < w[1]));
            assert!(picked.iter().all(|&c| c < 50));
        }
    }

    #[test]
    fn cohort_sampling_covers_pool() {
        let mut seen = [false; 20];
        for round in 0..200u64 {
            let mut s = Stream::from_key(&[5, purpose::COHORT, round]);
            for c in s.sample_without_replacement(20, 4) {
                seen[c] = true;
            }
        }
        assert!(seen.iter().all(|&v| v));
    }
}
