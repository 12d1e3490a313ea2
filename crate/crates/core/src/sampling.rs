//! Initial-condition samplers: i.i.d. draws and low-discrepancy point sets
//! through the same quantile map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Product law on `ℝ^d`, each coordinate given by its quantile function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Sampler {
    /// Independent `U[lo_i, hi_i]` coordinates.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent `N(mean_i, std_i²)` coordinates.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        let (a, b, name) = match self {
            Sampler::UniformBox { lo, hi } => (lo, hi, "hi"),
            Sampler::Gaussian { mean, std } => (mean, std, "std"),
        };
        if a.is_empty() {
            return Err(Error::config("init", "sampler dimension must be positive"));
        }
        if a.len() != b.len() {
            return Err(Error::config(name, "length must match the other sampler vector"));
        }
        let ok = match self {
            Sampler::UniformBox { lo, hi } => lo.iter().zip(hi).all(|(l, h)| l.is_finite() && h > l && h.is_finite()),
            Sampler::Gaussian { mean, std } => mean.iter().all(|m| m.is_finite()) && std.iter().all(|s| *s > 0.0 && s.is_finite()),
        };
        if !ok {
            return Err(Error::config(name, "bounds must be finite with hi > lo (uniform) or std > 0 (gaussian)"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::UniformBox { lo, .. } => lo.len(),
            Sampler::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Maps `u ∈ (0,1)^d` to a point of the law.
    pub fn quantile(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Sampler::UniformBox { lo, hi } => {
                for i in 0..out.len() {
                    out[i] = lo[i] + (hi[i] - lo[i]) * u[i];
                }
            }
            Sampler::Gaussian { mean, std } => {
                let z = Normal::standard();
                for i in 0..out.len() {
                    out[i] = mean[i] + std[i] * z.inverse_cdf(u[i]);
                }
            }
        }
    }

    /// `n` i.i.d. draws, flattened.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![0.0; d];
        let mut out = vec![0.0; n * d];
        for chunk in out.chunks_exact_mut(d) {
            for v in u.iter_mut() {
                // Open interval: `random::<f64>()` is in [0,1).
                *v = loop {
                    let x: f64 = rng.random();
                    if x > 0.0 {
                        break x;
                    }
                };
            }
            self.quantile(&u, chunk);
        }
        out
    }

    /// First `n` Halton points pushed through the quantile map. Prefixes are
    /// nested: the first `m` points of `low_discrepancy(n)` are `low_discrepancy(m)`.
    pub fn low_discrepancy(&self, n: usize) -> Vec<f64> {
        let d = self.dim();
        let mut u = vec![0.0; d];
        let mut out = vec![0.0; n * d];
        for (i, chunk) in out.chunks_exact_mut(d).enumerate() {
            halton(i as u64 + 1, &mut u);
            self.quantile(&u, chunk);
        }
        out
    }

    pub fn sample_measure(&self, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::uniform(self.dim(), self.sample(n, seed))
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton point with index `index ≥ 1` (all coordinates in (0,1)).
pub fn halton(index: u64, out: &mut [f64]) {
    assert!(out.len() <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
    assert!(index > 0);
    for (o, &base) in out.iter_mut().zip(&PRIMES) {
        let mut f = 1.0;
        let mut r = 0.0;
        let mut i = index;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        *o = r;
    }
}
