//! SplitMix64, the only source of randomness in the crate.
//!
//! State update: `state += 0x9E3779B97F4A7C15` (wrapping). Output: with
//! `z = state`, apply `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, return `z ^ (z >> 31)`.
//!
//! Derived draws:
//! - `next_f64`: `(next_u64() >> 11) as f64 * 2^-53`, uniform on `[0, 1)`.
//! - `below(n)`: `((next_u64() as u128 * n as u128) >> 64) as u64`.
//! - `range(lo, hi)`: `lo + below(hi - lo + 1)` (inclusive bounds).
//! - `bernoulli(p)`: `next_f64() < p`.
//! - `sign()`: `+1` if the top bit of `next_u64()` is clear, else `-1`.
//! - `ternary()`: `below(3) - 1`.
//! - `unit_complex()`: `e(next_f64())`.
//! - `disk()`: modulus `sqrt(next_f64())`, then phase `e(next_f64())`.
//!
//! Suites derive per-trial generators with `SplitMix64::new(seed ^ trial * 0xD1B54A32D192ED03)`.

use num_complex::Complex64;
use std::f64::consts::TAU;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Generator for trial `trial` of a suite run with `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        SplitMix64::new(seed ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as i64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn sign(&mut self) -> i64 {
        if self.next_u64() >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn ternary(&mut self) -> i64 {
        self.below(3) as i64 - 1
    }

    pub fn unit_complex(&mut self) -> Complex64 {
        Complex64::from_polar(1.0, TAU * self.next_f64())
    }

    /// A point of the closed unit disk, area-uniform.
    pub fn disk(&mut self) -> Complex64 {
        let r = self.next_f64().sqrt();
        Complex64::from_polar(r, TAU * self.next_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_stream() {
        // First outputs for seed 0 of the reference SplitMix64.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..10_000 {
            assert!(rng.below(13) < 13);
            let r = rng.range(-3, 3);
            assert!((-3..=3).contains(&r));
        }
    }
}
