//! Seed-addressed Brownian increments.
//!
//! Every increment is a pure function of `(master_seed, particle, step)`:
//! ChaCha8 is a counter-mode generator, so each particle gets its own stream
//! and each step a fixed word offset inside it. Particle `i` therefore sees the
//! same individual noise whatever the ensemble size, which is what coupled
//! runs across different `N` require. Stream 0 carries the common noise.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COMMON_STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct NoisePath {
    master_seed: u64,
    dt: f64,
    steps: usize,
    common: Vec<f64>,
    base: ChaCha8Rng,
}

impl PartialEq for NoisePath {
    fn eq(&self, other: &Self) -> bool {
        self.master_seed == other.master_seed
            && self.dt == other.dt
            && self.steps == other.steps
            && self.common == other.common
    }
}

impl NoisePath {
    pub fn new(master_seed: u64, dt: f64, steps: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(master_seed);
        let mut rng = base.clone();
        rng.set_stream(COMMON_STREAM);
        let sqrt_dt = dt.sqrt();
        let mut common = Vec::with_capacity(steps + 1);
        while common.len() < steps {
            let (a, b) = normal_pair(&mut rng);
            common.push(sqrt_dt * a);
            common.push(sqrt_dt * b);
        }
        common.truncate(steps);
        Self {
            master_seed,
            dt,
            steps,
            common,
            base,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `Δβ_k ~ N(0, dt)`.
    pub fn common_increment(&self, step: usize) -> f64 {
        self.common[step]
    }

    pub fn common_increments(&self) -> &[f64] {
        &self.common
    }

    /// `ΔB^i_k ~ N(0, dt·I)` in `ℝ^{out.len()}` for the particle with noise id `particle`.
    pub fn individual_increment(&self, particle: u64, step: usize, out: &mut [f64]) {
        let pairs = out.len().div_ceil(2) as u128;
        let mut rng = self.base.clone();
        rng.set_stream(particle.wrapping_add(1));
        // Two u64 draws (four 32-bit words) per Box–Muller pair.
        rng.set_word_pos(step as u128 * pairs * 4);
        let sqrt_dt = self.dt.sqrt();
        let mut chunks = out.chunks_mut(2);
        for chunk in &mut chunks {
            let (a, b) = normal_pair(&mut rng);
            chunk[0] = sqrt_dt * a;
            if let Some(second) = chunk.get_mut(1) {
                *second = sqrt_dt * b;
            }
        }
    }
}

/// Box–Muller on two 53-bit uniforms; consumes exactly two `u64`s.
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}
