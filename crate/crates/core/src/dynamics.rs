//! Fixed-step integrators for the N-particle system.
//!
//! `step_euler_ito` discretises the Itô form
//! `dX = (B + S)[μ](X) dt + C[μ](X) dβ + σ(X) dB`;
//! `step_heun_stratonovich` applies the stochastic Heun predictor–corrector
//! to the Stratonovich form `dX = B[μ](X) dt + C[μ](X) ∘ dβ + σ(X) ∘ dB`,
//! which needs no corrective terms. The two must agree to `O(dt)` in law.
//!
//! Mean-field sums run over every particle including `j = i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{add_matvec, axpy, FieldCache, KernelSet};
use crate::measure::{EmpiricalMeasure, MeasurePath};
use crate::noise::NoisePath;

pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

/// State of all particles at one time.
///
/// `ids` are the noise addresses: particle `ids[i]` draws its individual
/// increments from stream `ids[i]` of the [`NoisePath`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    states: Vec<f64>,
    weights: Vec<f64>,
    ids: Vec<u64>,
    time: f64,
}

impl ParticleEnsemble {
    /// Uniformly weighted particles with ids `0..n`, at time 0.
    pub fn new(dim: usize, states: Vec<f64>) -> Result<Self> {
        let measure = EmpiricalMeasure::uniform(dim, states)?;
        Ok(Self::from_measure(&measure))
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::from_measure(&EmpiricalMeasure::from_points(points)?))
    }

    /// One particle per atom, carrying the atom's weight.
    pub fn from_measure(measure: &EmpiricalMeasure) -> Self {
        Self {
            dim: measure.dim(),
            states: measure.atoms().to_vec(),
            weights: measure.weights().to_vec(),
            ids: (0..measure.len() as u64).collect(),
            time: 0.0,
        }
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        Error::check_dim("ids", self.len(), ids.len())?;
        self.ids = ids;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.states.clone(), self.weights.clone())
            .expect("ensemble invariants imply a valid measure")
    }

    pub fn max_norm(&self) -> f64 {
        self.states
            .chunks_exact(self.dim)
            .map(|s| s.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, |m, v| if v.is_nan() || v > m { v } else { m })
    }

    /// Particles at `indices`, keeping their noise ids, reweighted uniformly.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let mut states = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Precondition(format!(
                    "subsample index {i} out of range for {} particles",
                    self.len()
                )));
            }
            states.extend_from_slice(self.state(i));
            ids.push(self.ids[i]);
        }
        let m = indices.len();
        Ok(Self {
            dim: self.dim,
            states,
            weights: vec![1.0 / m as f64; m],
            ids,
            time: self.time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerIto,
    HeunStratonovich,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub record_stride: usize,
    pub blowup_bound: f64,
}

impl SimConfig {
    pub fn new(n_particles: usize, dim: usize, t_final: f64, dt: f64) -> Self {
        Self {
            n_particles,
            dim,
            t_final,
            dt,
            scheme: Scheme::EulerIto,
            master_seed: 0,
            record_stride: 1,
            blowup_bound: DEFAULT_BLOWUP_BOUND,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", "must be nonnegative"));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "t_final",
                format!("t_final / dt = {ratio} is not an integer"),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if self.n_particles == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if !(self.blowup_bound > 0.0) {
            return Err(Error::config("blowup_bound", "must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time_of(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Recorded states every `stride` steps (plus the initial state), and the noise used.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub ids: Vec<u64>,
    pub weights: Vec<f64>,
    pub stride: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub noise: Option<NoisePath>,
}

impl TrajectoryRecord {
    fn empty(init: &ParticleEnsemble, stride: usize) -> Self {
        Self {
            dim: init.dim,
            ids: init.ids.clone(),
            weights: init.weights.clone(),
            stride,
            times: Vec::new(),
            states: Vec::new(),
            noise: None,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.states[k].clone(), self.weights.clone())
            .expect("recorded states form a valid measure")
    }

    pub fn measure_path(&self) -> Result<MeasurePath> {
        MeasurePath::new(
            self.times.clone(),
            (0..self.len()).map(|k| self.measure_at(k)).collect(),
        )
    }

    pub fn particle_state(&self, k: usize, i: usize) -> &[f64] {
        &self.states[k][i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial(&self) -> ParticleEnsemble {
        ParticleEnsemble {
            dim: self.dim,
            states: self.states[0].clone(),
            weights: self.weights.clone(),
            ids: self.ids.clone(),
            time: self.times[0],
        }
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("record holds at least the initial state")
    }
}

/// Receives the ensemble after every step (and the initial state as step 0).
pub trait Observer {
    fn observe(&mut self, step: usize, ensemble: &ParticleEnsemble);
}

impl<F: FnMut(usize, &ParticleEnsemble)> Observer for F {
    fn observe(&mut self, step: usize, ensemble: &ParticleEnsemble) {
        self(step, ensemble)
    }
}

struct Recorder {
    record: TrajectoryRecord,
}

impl Observer for Recorder {
    fn observe(&mut self, step: usize, ensemble: &ParticleEnsemble) {
        if step % self.record.stride == 0 {
            self.record.times.push(ensemble.time);
            self.record.states.push(ensemble.states.clone());
        }
    }
}

fn check_step(kernel: &KernelSet, ens: &ParticleEnsemble, noise: &NoisePath, k: usize) -> Result<()> {
    Error::check_dim("ensemble", kernel.dim(), ens.dim)?;
    if k >= noise.steps() {
        return Err(Error::Precondition(format!(
            "step index {k} beyond noise path of {} steps",
            noise.steps()
        )));
    }
    Ok(())
}

fn guard(next: &ParticleEnsemble, step: usize, bound: f64) -> Result<()> {
    let max_norm = next.max_norm();
    if !max_norm.is_finite() || max_norm > bound {
        return Err(Error::BlowUp {
            step,
            max_norm,
            partial: None,
        });
    }
    Ok(())
}

/// Adds `σ(x)·ΔB` for the particle with noise id `id`.
fn add_individual(
    kernel: &KernelSet,
    noise: &NoisePath,
    id: u64,
    k: usize,
    x: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let d = x.len();
    let mut db = vec![0.0; d];
    noise.individual_increment(id, k, &mut db);
    let mut sigma = vec![0.0; d * d];
    kernel.kernel().individual(x, &mut sigma);
    add_matvec(d, &sigma, &db, scale, out);
}

/// One Euler–Maruyama step of the Itô system.
pub fn step_euler_ito(
    kernel: &KernelSet,
    ens: &ParticleEnsemble,
    noise: &NoisePath,
    step_index: usize,
) -> Result<ParticleEnsemble> {
    step_euler_bounded(kernel, ens, noise, step_index, DEFAULT_BLOWUP_BOUND)
}

fn step_euler_bounded(
    kernel: &KernelSet,
    ens: &ParticleEnsemble,
    noise: &NoisePath,
    k: usize,
    bound: f64,
) -> Result<ParticleEnsemble> {
    check_step(kernel, ens, noise, k)?;
    let d = ens.dim;
    let dt = noise.dt();
    let dbeta = noise.common_increment(k);
    let cache = FieldCache::new(kernel, d, &ens.states, &ens.weights);
    let mut next = ens.clone();
    let mut drift = vec![0.0; d];
    let mut common = vec![0.0; d];
    for i in 0..ens.len() {
        let x = ens.state(i);
        cache.ito_fields_at_atom(i, &mut drift, &mut common);
        let out = &mut next.states[i * d..(i + 1) * d];
        axpy(dt, &drift, out);
        if kernel.has_common() {
            axpy(dbeta, &common, out);
        }
        if kernel.has_individual() {
            add_individual(kernel, noise, ens.ids[i], k, x, 1.0, out);
        }
    }
    next.time = (k + 1) as f64 * dt;
    guard(&next, k, bound)?;
    Ok(next)
}

/// One stochastic Heun step of the Stratonovich system.
pub fn step_heun_stratonovich(
    kernel: &KernelSet,
    ens: &ParticleEnsemble,
    noise: &NoisePath,
    step_index: usize,
) -> Result<ParticleEnsemble> {
    step_heun_bounded(kernel, ens, noise, step_index, DEFAULT_BLOWUP_BOUND)
}

fn step_heun_bounded(
    kernel: &KernelSet,
    ens: &ParticleEnsemble,
    noise: &NoisePath,
    k: usize,
    bound: f64,
) -> Result<ParticleEnsemble> {
    check_step(kernel, ens, noise, k)?;
    let d = ens.dim;
    let n = ens.len();
    let dt = noise.dt();
    let dbeta = noise.common_increment(k);
    let has_c = kernel.has_common();
    let has_s = kernel.has_individual();

    // Euler predictor on the uncorrected drift; keep the increments of the
    // first stage so the corrector can reuse them.
    let cache = FieldCache::new(kernel, d, &ens.states, &ens.weights);
    let mut stage = vec![0.0; n * d];
    let mut predicted = ens.clone();
    let mut drift = vec![0.0; d];
    for i in 0..n {
        let x = ens.state(i);
        let inc = &mut stage[i * d..(i + 1) * d];
        cache.drift_mean(x, &mut drift);
        axpy(dt, &drift, inc);
        if has_c {
            axpy(dbeta, cache.common_at_atom(i), inc);
        }
        if has_s {
            add_individual(kernel, noise, ens.ids[i], k, x, 1.0, inc);
        }
        axpy(1.0, inc, &mut predicted.states[i * d..(i + 1) * d]);
    }

    let cache_bar = FieldCache::new(kernel, d, &predicted.states, &predicted.weights);
    let mut next = ens.clone();
    let mut inc_bar = vec![0.0; d];
    for i in 0..n {
        let x_bar = predicted.state(i);
        inc_bar.fill(0.0);
        cache_bar.drift_mean(x_bar, &mut drift);
        axpy(dt, &drift, &mut inc_bar);
        if has_c {
            axpy(dbeta, cache_bar.common_at_atom(i), &mut inc_bar);
        }
        if has_s {
            add_individual(kernel, noise, ens.ids[i], k, x_bar, 1.0, &mut inc_bar);
        }
        let out = &mut next.states[i * d..(i + 1) * d];
        axpy(0.5, &stage[i * d..(i + 1) * d], out);
        axpy(0.5, &inc_bar, out);
    }
    next.time = (k + 1) as f64 * dt;
    guard(&next, k, bound)?;
    Ok(next)
}

fn check_config(kernel: &KernelSet, init: &ParticleEnsemble, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    Error::check_dim("init", kernel.dim(), init.dim)?;
    Error::check_dim("dim", kernel.dim(), cfg.dim)?;
    if cfg.n_particles != init.len() {
        return Err(Error::config(
            "n_particles",
            format!("config says {} but the initial ensemble has {}", cfg.n_particles, init.len()),
        ));
    }
    Ok(())
}

/// Runs the integrator, handing every state to `observer`, and returns the noise used.
pub fn simulate_observed(
    kernel: &KernelSet,
    init: &ParticleEnsemble,
    cfg: &SimConfig,
    observer: &mut dyn Observer,
) -> Result<NoisePath> {
    check_config(kernel, init, cfg)?;
    let noise = NoisePath::new(cfg.master_seed, cfg.dt, cfg.steps());
    simulate_with_noise(kernel, init, cfg, &noise, observer)?;
    Ok(noise)
}

pub(crate) fn simulate_with_noise(
    kernel: &KernelSet,
    init: &ParticleEnsemble,
    cfg: &SimConfig,
    noise: &NoisePath,
    observer: &mut dyn Observer,
) -> Result<()> {
    let mut ens = init.clone();
    ens.time = 0.0;
    observer.observe(0, &ens);
    for k in 0..noise.steps() {
        ens = match cfg.scheme {
            Scheme::EulerIto => step_euler_bounded(kernel, &ens, noise, k, cfg.blowup_bound)?,
            Scheme::HeunStratonovich => step_heun_bounded(kernel, &ens, noise, k, cfg.blowup_bound)?,
        };
        observer.observe(k + 1, &ens);
    }
    Ok(())
}

/// Full trajectory, recorded every `record_stride` steps. A blow-up returns the
/// states recorded so far inside the error.
pub fn simulate(kernel: &KernelSet, init: &ParticleEnsemble, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    check_config(kernel, init, cfg)?;
    let noise = NoisePath::new(cfg.master_seed, cfg.dt, cfg.steps());
    run_recorded(kernel, init, cfg, noise)
}

fn run_recorded(
    kernel: &KernelSet,
    init: &ParticleEnsemble,
    cfg: &SimConfig,
    noise: NoisePath,
) -> Result<TrajectoryRecord> {
    let mut recorder = Recorder {
        record: TrajectoryRecord::empty(init, cfg.record_stride),
    };
    match simulate_with_noise(kernel, init, cfg, &noise, &mut recorder) {
        Ok(()) => {
            let mut record = recorder.record;
            record.noise = Some(noise);
            Ok(record)
        }
        Err(Error::BlowUp { step, max_norm, .. }) => {
            let mut partial = recorder.record;
            partial.noise = Some(noise);
            Err(Error::BlowUp {
                step,
                max_norm,
                partial: Some(Box::new(partial)),
            })
        }
        Err(e) => Err(e),
    }
}

/// Simulates `init_big` and its restriction to `subsample` on the same noise:
/// identical common increments, and identical individual increments for the
/// shared particles.
pub fn coupled_pair(
    kernel: &KernelSet,
    init_big: &ParticleEnsemble,
    cfg: &SimConfig,
    subsample: &[usize],
) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
    let small_init = init_big.restrict(subsample)?;
    let big = simulate(kernel, init_big, cfg)?;
    let mut small_cfg = cfg.clone();
    small_cfg.n_particles = small_init.len();
    check_config(kernel, &small_init, &small_cfg)?;
    let noise = big.noise.clone().expect("simulate attaches its noise path");
    let small = run_recorded(kernel, &small_init, &small_cfg, noise)?;
    Ok((big, small))
}
