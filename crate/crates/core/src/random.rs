//! Deterministic random streams.
//!
//! Every random draw in the crate comes from SplitMix64 (Vigna's reference
//! generator, state advanced by the golden-ratio increment
//! `0x9E3779B97F4A7C15`). A stream is created with its state set to the
//! caller's seed. Uniform reals are `(x >> 11) · 2⁻⁵³ ∈ [0, 1)`; Gaussian
//! reals use Box–Muller on a pair `(u₁, u₂)`, with `u₁` mapped to `(0, 1]`
//! as `1 − uniform`, returning the cosine branch first and caching the sine
//! branch for the next call. These rules are enough to reproduce any matrix
//! in the crate from another language.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: SplitMix64,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
