//! Stochastic characteristics of a frozen mean-field, push-forwards, and the
//! transport-form and comparison experiments built on them.
//!
//! A characteristic started at `x` follows
//! `X_{k+1} = X_k + (B+S)[μ_k](X_k)·dt + C[μ_k](X_k)·Δβ_k`
//! with `μ_k` and `Δβ_k` taken from a recorded run. The recurrence is the
//! particle stepper's, evaluated through the same code path, so a
//! characteristic started at a particle's initial state reproduces that
//! particle bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, ParticleEnsemble, SimConfig, TrajectoryRecord, DEFAULT_BLOWUP_BOUND};
use crate::error::{Error, Result};
use crate::kernels::{axpy, FieldCache, KernelSet};
use crate::measure::{EmpiricalMeasure, MeasurePath};
use crate::noise::NoisePath;
use crate::stats::Estimate;
use crate::transport;

/// A measure path treated as exogenous, together with the common increments
/// it was generated with.
#[derive(Debug, Clone)]
pub struct FrozenField {
    kernel: KernelSet,
    dim: usize,
    weights: Vec<f64>,
    times: Vec<f64>,
    /// Atom positions at every grid time, flattened per time.
    states: Vec<Vec<f64>>,
    dbeta: Vec<f64>,
    dt: f64,
}

fn require_common_only(kernel: &KernelSet) -> Result<()> {
    if kernel.has_individual() {
        return Err(Error::Precondition(format!(
            "characteristics need sigma = 0, but kernel `{}` has individual noise",
            kernel.name()
        )));
    }
    Ok(())
}

impl FrozenField {
    /// The field of a recorded run; needs every step recorded.
    pub fn from_run(kernel: &KernelSet, run: &TrajectoryRecord) -> Result<Self> {
        require_common_only(kernel)?;
        if run.stride != 1 {
            return Err(Error::Precondition(format!(
                "frozen field needs record_stride = 1, run has {}",
                run.stride
            )));
        }
        let noise = run
            .noise
            .as_ref()
            .ok_or_else(|| Error::Precondition("run carries no noise path".into()))?;
        Self::build(kernel, run.dim, run.weights.clone(), run.times.clone(), run.states.clone(), noise)
    }

    /// A field from an arbitrary measure path on the noise grid.
    pub fn new(kernel: &KernelSet, path: &MeasurePath, noise: &NoisePath) -> Result<Self> {
        require_common_only(kernel)?;
        let states = path.measures().iter().map(|m| m.atoms().to_vec()).collect();
        Self::build(kernel, path.dim(), path.weights().to_vec(), path.times().to_vec(), states, noise)
    }

    fn build(
        kernel: &KernelSet,
        dim: usize,
        weights: Vec<f64>,
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        noise: &NoisePath,
    ) -> Result<Self> {
        Error::check_dim("field", kernel.dim(), dim)?;
        if times.len() != noise.steps() + 1 {
            return Err(Error::Precondition(format!(
                "field path has {} times but the noise has {} steps",
                times.len(),
                noise.steps()
            )));
        }
        let dt = noise.dt();
        if let Some((k, t)) = times
            .iter()
            .enumerate()
            .find(|(k, t)| (**t - *k as f64 * dt).abs() > 1e-9 * (1.0 + **t))
        {
            return Err(Error::Precondition(format!(
                "field time {t} at index {k} is off the noise grid (dt = {dt})"
            )));
        }
        Ok(Self {
            kernel: kernel.clone(),
            dim,
            weights,
            times,
            states,
            dbeta: noise.common_increments().to_vec(),
            dt,
        })
    }

    pub fn kernel(&self) -> &KernelSet {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.dbeta.len()
    }

    /// The frozen measure at grid index `k`.
    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.states[k].clone(), self.weights.clone())
            .expect("field states form a valid measure")
    }

    /// Characteristics from every start in `x0` (flattened). Returns the
    /// flattened positions at each grid time, starting with `x0` itself.
    pub fn solve_batch(&self, x0: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        if x0.len() % d != 0 || x0.is_empty() {
            return Err(Error::DimensionMismatch {
                argument: "x0",
                expected: d,
                found: x0.len(),
            });
        }
        let has_c = self.kernel.has_common();
        let mut path = Vec::with_capacity(self.times.len());
        path.push(x0.to_vec());
        let mut drift = vec![0.0; d];
        let mut common = vec![0.0; d];
        for k in 0..self.steps() {
            let cache = FieldCache::new(&self.kernel, d, &self.states[k], &self.weights);
            let cur = &path[k];
            let mut next = cur.clone();
            for (x, out) in cur.chunks_exact(d).zip(next.chunks_exact_mut(d)) {
                cache.ito_fields(x, &mut drift, &mut common);
                axpy(self.dt, &drift, out);
                if has_c {
                    axpy(self.dbeta[k], &common, out);
                }
            }
            let max_norm = next
                .chunks_exact(d)
                .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if !max_norm.is_finite() || max_norm > DEFAULT_BLOWUP_BOUND {
                return Err(Error::BlowUp {
                    step: k,
                    max_norm,
                    partial: None,
                });
            }
            path.push(next);
        }
        Ok(path)
    }

    /// One characteristic: the position at each grid time.
    pub fn solve(&self, x0: &[f64]) -> Result<Vec<Vec<f64>>> {
        Error::check_dim("x0", self.dim, x0.len())?;
        self.solve_batch(x0)
    }

    /// The discrete push-forward `(X^μ)^* init`.
    pub fn pushforward(&self, init: &EmpiricalMeasure) -> Result<MeasurePath> {
        Error::check_dim("init", self.dim, init.dim())?;
        let path = self.solve_batch(init.atoms())?;
        let measures = path
            .into_iter()
            .map(|atoms| EmpiricalMeasure::new(self.dim, atoms, init.weights().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        MeasurePath::new(self.times.clone(), measures)
    }
}

/// `sup_k W₂(μ_k, ((X^μ)^* μ₀)_k)` for a common-noise-only run against its
/// own frozen field.
pub fn transport_residual(kernel: &KernelSet, run: &TrajectoryRecord) -> Result<f64> {
    let field = FrozenField::from_run(kernel, run)?;
    let pushed = field.pushforward(&run.measure_at(0))?;
    let mut worst = 0.0f64;
    for (k, m) in pushed.measures().iter().enumerate() {
        worst = worst.max(transport::wasserstein(&run.measure_at(k), m, 2.0)?);
    }
    Ok(worst)
}

/// Settings for [`comparison_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSpec {
    pub p: f64,
    /// `τ_R` threshold on `sup_{x∈K} |X^a_t(x)| + |X^b_t(x)|`.
    pub radius: f64,
    /// Finite stand-in for the compact `K` (flattened); the atoms of both
    /// initial measures are always added.
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `W_p^p(init_a, init_b)`.
    pub initial_cost: f64,
    /// Per-seed `sup_{k < k_τ} W_p^p(μ^a_k, μ^b_k)`.
    pub per_seed: Vec<f64>,
    /// Per-seed first grid index with the joint radius `≥ R` (steps + 1 if never).
    pub stop_index: Vec<usize>,
    pub estimate: Estimate,
    /// `estimate.mean / initial_cost`, or 0 when the initial distance vanishes.
    pub ratio: f64,
    pub degenerate: bool,
}

/// Monte-Carlo estimate of `E[sup_{t<τ_R} W_p^p(μ^a_t, μ^b_t)]` for the two
/// transport-form solutions started at `init_a`, `init_b` under shared
/// common noise, and its ratio to `W_p^p(init_a, init_b)`.
///
/// Both solutions are weighted particle systems on the initial atoms; `τ_R`
/// is the first grid time at which the characteristics of either field,
/// started anywhere in `K`, reach joint norm `R`. The supremum runs over
/// grid times strictly before `τ_R`, so a stop at time 0 gives 0.
pub fn comparison_experiment(
    kernel: &KernelSet,
    init_a: &EmpiricalMeasure,
    init_b: &EmpiricalMeasure,
    cfg: &SimConfig,
    spec: &ComparisonSpec,
) -> Result<ComparisonReport> {
    require_common_only(kernel)?;
    Error::check_dim("init_a", kernel.dim(), init_a.dim())?;
    Error::check_dim("init_b", kernel.dim(), init_b.dim())?;
    if spec.seeds.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "comparison seeds",
            got: 0,
            need: 1,
        });
    }
    if spec.grid.len() % kernel.dim() != 0 {
        return Err(Error::DimensionMismatch {
            argument: "grid",
            expected: kernel.dim(),
            found: spec.grid.len(),
        });
    }
    let cap = transport::DEFAULT_SUPPORT_CAP;
    let initial_cost = transport::wasserstein_cost(init_a, init_b, spec.p, cap)?;
    let mut starts = spec.grid.clone();
    starts.extend_from_slice(init_a.atoms());
    starts.extend_from_slice(init_b.atoms());

    let per: Vec<(f64, usize)> = spec
        .seeds
        .par_iter()
        .map(|&seed| comparison_seed(kernel, init_a, init_b, cfg, spec, &starts, seed))
        .collect::<Result<_>>()?;
    let per_seed: Vec<f64> = per.iter().map(|p| p.0).collect();
    let stop_index = per.iter().map(|p| p.1).collect();
    let estimate = Estimate::of(&per_seed);
    let degenerate = initial_cost == 0.0;
    Ok(ComparisonReport {
        initial_cost,
        ratio: if degenerate { 0.0 } else { estimate.mean / initial_cost },
        per_seed,
        stop_index,
        estimate,
        degenerate,
    })
}

fn comparison_seed(
    kernel: &KernelSet,
    init_a: &EmpiricalMeasure,
    init_b: &EmpiricalMeasure,
    cfg: &SimConfig,
    spec: &ComparisonSpec,
    starts: &[f64],
    seed: u64,
) -> Result<(f64, usize)> {
    let d = kernel.dim();
    let run_for = |init: &EmpiricalMeasure| -> Result<TrajectoryRecord> {
        let mut c = cfg.clone();
        c.master_seed = seed;
        c.record_stride = 1;
        c.n_particles = init.len();
        c.dim = d;
        simulate(kernel, &ParticleEnsemble::from_measure(init), &c)
    };
    let (run_a, run_b) = (run_for(init_a)?, run_for(init_b)?);
    let chars_a = FrozenField::from_run(kernel, &run_a)?.solve_batch(starts)?;
    let chars_b = FrozenField::from_run(kernel, &run_b)?.solve_batch(starts)?;
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sup = 0.0f64;
    for k in 0..run_a.len() {
        let joint = chars_a[k]
            .chunks_exact(d)
            .zip(chars_b[k].chunks_exact(d))
            .map(|(a, b)| norm(a) + norm(b))
            .fold(0.0, f64::max);
        if joint >= spec.radius {
            return Ok((sup, k));
        }
        let w = transport::wasserstein_cost(
            &run_a.measure_at(k),
            &run_b.measure_at(k),
            spec.p,
            transport::DEFAULT_SUPPORT_CAP,
        )?;
        sup = sup.max(w);
    }
    Ok((sup, run_a.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ConstantKernel, CuckerSmaleParams, GeometricNoise, Truncation, ZeroKernel};

    fn cs_bounded() -> KernelSet {
        let mut p = CuckerSmaleParams::flocking(1.0, 0.5);
        p.phi_lambda = 0.3;
        p.truncation = Some(Truncation {
            radius: 1.0,
            margin: 1.0,
        });
        crate::kernels::CuckerSmale::new(p).unwrap().into_set()
    }

    fn cfg(n: usize, dim: usize) -> SimConfig {
        SimConfig::new(n, dim, 0.5, 0.01).with_seed(11)
    }

    #[test]
    fn single_particle_is_reproduced() {
        let k = cs_bounded();
        let init = ParticleEnsemble::new(2, vec![0.3, -0.7]).unwrap();
        let run = simulate(&k, &init, &cfg(1, 2)).unwrap();
        let field = FrozenField::from_run(&k, &run).unwrap();
        let path = field.solve(&[0.3, -0.7]).unwrap();
        for (kk, x) in path.iter().enumerate() {
            assert_eq!(x.as_slice(), run.particle_state(kk, 0));
        }
    }

    #[test]
    fn trivial_fields() {
        let k = KernelSet::new("zero", ZeroKernel::new(2));
        let init = ParticleEnsemble::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let run = simulate(&k, &init, &cfg(2, 2)).unwrap();
        let field = FrozenField::from_run(&k, &run).unwrap();
        let path = field.solve(&[5.0, -1.0]).unwrap();
        assert!(path.iter().all(|x| x == &[5.0, -1.0]));
        assert_eq!(transport_residual(&k, &run).unwrap(), 0.0);

        let k = KernelSet::new("const", ConstantKernel::new(vec![2.0, -1.0], vec![0.0, 0.0]));
        let run = simulate(&k, &init, &cfg(2, 2)).unwrap();
        let path = FrozenField::from_run(&k, &run).unwrap().solve(&[0.0, 0.0]).unwrap();
        for (kk, x) in path.iter().enumerate() {
            let t = run.times[kk];
            assert!((x[0] - 2.0 * t).abs() < 1e-12 && (x[1] + t).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_is_fixed_point() {
        let k = cs_bounded();
        let init = ParticleEnsemble::new(2, vec![0.0, 1.0, 0.5, -1.0, -0.2, 0.3, 1.0, 0.0]).unwrap();
        let run = simulate(&k, &init, &cfg(4, 2)).unwrap();
        let field = FrozenField::from_run(&k, &run).unwrap();
        let pushed = field.pushforward(&run.measure_at(0)).unwrap();
        assert_eq!(pushed, run.measure_path().unwrap());
        assert!(pushed.measures().iter().all(|m| m.weights() == run.weights.as_slice()));
        assert!(transport_residual(&k, &run).unwrap() <= 1e-10);
    }

    #[test]
    fn preconditions() {
        let k = KernelSet::new("geo", GeometricNoise::new(1, 0.5));
        let init = ParticleEnsemble::new(1, vec![1.0]).unwrap();
        let run = simulate(&k, &init, &cfg(1, 1)).unwrap();
        assert!(matches!(transport_residual(&k, &run), Err(Error::Precondition(_))));

        let k = cs_bounded();
        let init = ParticleEnsemble::new(2, vec![0.0, 1.0]).unwrap();
        let run = simulate(&k, &init, &cfg(1, 2).with_stride(5)).unwrap();
        assert!(FrozenField::from_run(&k, &run).is_err());
    }

    #[test]
    fn comparison_degenerate_cases() {
        let k = cs_bounded();
        let a = EmpiricalMeasure::uniform(2, vec![0.0, 0.5, 0.2, -0.5]).unwrap();
        let spec = ComparisonSpec {
            p: 2.0,
            radius: 50.0,
            grid: vec![0.0, 0.0],
            seeds: vec![1, 2],
        };
        let c = SimConfig::new(2, 2, 0.2, 0.01);
        let same = comparison_experiment(&k, &a, &a, &c, &spec).unwrap();
        assert!(same.degenerate);
        assert_eq!(same.ratio, 0.0);
        assert_eq!(same.estimate.mean, 0.0);

        let b = EmpiricalMeasure::uniform(2, vec![0.0, 0.6, 0.2, -0.4]).unwrap();
        let tight = ComparisonSpec { radius: 0.1, ..spec };
        let r = comparison_experiment(&k, &a, &b, &c, &tight).unwrap();
        assert!(r.stop_index.iter().all(|&s| s == 0));
        assert_eq!(r.estimate.mean, 0.0);
    }
}
