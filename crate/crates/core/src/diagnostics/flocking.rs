use super::{DiagnosticsReport, Series, Verdict};
use crate::dynamics::{simulate_observed, ParticleEnsemble, SimConfig};
use crate::error::{Error, Result};
use crate::kernels::{CuckerSmaleParams, KernelSet};
use crate::measure::EmpiricalMeasure;
use crate::stats::{self, Estimate};

/// Mean velocity `v̄ = Σ w_j v_j` and velocity variance `E = Σ w_j |v_j − v̄|²`
/// of a measure on position–velocity space `ℝ^{2d}`.
pub fn flocking_energy(mu: &EmpiricalMeasure) -> Result<(Vec<f64>, f64)> {
    let dim = mu.dim();
    if dim % 2 != 0 {
        return Err(Error::Precondition(format!(
            "flocking energy needs a position-velocity state of even dimension, got {dim}"
        )));
    }
    Ok(energy(dim / 2, mu.atoms(), mu.weights()))
}

fn energy(d: usize, states: &[f64], weights: &[f64]) -> (Vec<f64>, f64) {
    let mut vbar = vec![0.0; d];
    for (s, w) in states.chunks_exact(2 * d).zip(weights) {
        for k in 0..d {
            vbar[k] += w * s[d + k];
        }
    }
    let mut e = 0.0;
    for (s, w) in states.chunks_exact(2 * d).zip(weights) {
        let sq: f64 = (0..d).map(|k| (s[d + k] - vbar[k]).powi(2)).sum();
        e += w * sq;
    }
    (vbar, e)
}

/// Largest coordinate-box diagonal of the positions: an upper bound on every
/// pairwise position distance.
fn position_spread(d: usize, states: &[f64]) -> f64 {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for s in states.chunks_exact(2 * d) {
        for k in 0..d {
            lo[k] = lo[k].min(s[k]);
            hi[k] = hi[k].max(s[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
}

/// Velocity statistics of one run, sampled every `record_stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockingTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mean_velocity: Vec<Vec<f64>>,
    /// Upper bound on `sup_t max_{i,j} |x_i(t) − x_j(t)|` over all steps.
    pub max_spread: f64,
}

pub fn flocking_trace(kernel: &KernelSet, init: &ParticleEnsemble, cfg: &SimConfig) -> Result<FlockingTrace> {
    if kernel.dim() % 2 != 0 {
        return Err(Error::Precondition("flocking needs an even (position, velocity) dimension".into()));
    }
    let d = kernel.dim() / 2;
    let stride = cfg.record_stride;
    let mut trace = FlockingTrace {
        times: Vec::new(),
        energy: Vec::new(),
        mean_velocity: Vec::new(),
        max_spread: 0.0,
    };
    let mut observe = |step: usize, ens: &ParticleEnsemble| {
        trace.max_spread = trace.max_spread.max(position_spread(d, ens.states()));
        if step % stride == 0 {
            let (vbar, e) = energy(d, ens.states(), ens.weights());
            trace.times.push(ens.time());
            trace.energy.push(e);
            trace.mean_velocity.push(vbar);
        }
    };
    simulate_observed(kernel, init, cfg, &mut observe)?;
    Ok(trace)
}

/// `max_t |v̄_t − v̄_0|`.
pub fn velocity_drift(trace: &FlockingTrace) -> f64 {
    let v0 = &trace.mean_velocity[0];
    trace
        .mean_velocity
        .iter()
        .map(|v| v.iter().zip(v0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Fits the exponential decay rate of the ensemble-mean velocity variance and
/// compares it with `r* = 2(ψ_m − 4‖φ‖²_∞)`.
///
/// `ψ_m` is `ψ` at `window` (default: the largest position spread seen in any
/// run), which lower-bounds `ψ` on every observed pair since `ψ` is radially
/// non-increasing. The fit is OLS of `log E[E_t]` on `[0.1·T, T]`.
pub fn flocking_rate(
    traces: &[FlockingTrace],
    params: &CuckerSmaleParams,
    window: Option<f64>,
    tol: f64,
) -> Result<DiagnosticsReport> {
    let first = traces.first().ok_or(Error::InsufficientSamples {
        what: "flocking runs",
        got: 0,
        need: 1,
    })?;
    if traces.iter().any(|t| t.times != first.times) {
        return Err(Error::Precondition("flocking runs must share a time grid".into()));
    }
    if first.times.len() < 3 {
        return Err(Error::InsufficientSamples {
            what: "recorded times",
            got: first.times.len(),
            need: 3,
        });
    }
    let width = window.unwrap_or_else(|| traces.iter().map(|t| t.max_spread).fold(0.0, f64::max));
    let psi_m = params.psi_min(width);
    let phi = params.phi_sup();
    let bound = 2.0 * (psi_m - 4.0 * phi * phi);

    let mut report = DiagnosticsReport::new("flocking");
    report
        .metric("psi_m", psi_m)
        .metric("phi_sup", phi)
        .metric("window_width", width)
        .metric("rate_bound", bound)
        .metric("tolerance", tol)
        .metric("runs", traces.len() as f64);

    let times = &first.times;
    let mut means = Vec::with_capacity(times.len());
    let mut ses = Vec::with_capacity(times.len());
    let mut column = vec![0.0; traces.len()];
    for k in 0..times.len() {
        for (c, t) in column.iter_mut().zip(traces) {
            *c = t.energy[k];
        }
        let e = Estimate::of(&column);
        means.push(e.mean);
        ses.push(e.se);
    }
    report.series(Series {
        name: "mean_energy".into(),
        t: times.clone(),
        values: means.clone(),
        se: Some(ses),
    });
    let drift = traces.iter().map(velocity_drift).fold(0.0, f64::max);
    report.metric("max_mean_velocity_drift", drift);

    if psi_m <= 4.0 * phi * phi {
        report.note(format!(
            "bound not applicable: psi_m = {psi_m} <= 4 |phi|^2 = {}",
            4.0 * phi * phi
        ));
        return Ok(report);
    }

    let t_end = *times.last().expect("non-empty grid");
    let t_start = 0.1 * t_end;
    report.metric("fit_t0", t_start).metric("fit_t1", t_end);
    report.note("rate fitted by least squares on log E[E_t] over [0.1 T, T]");
    if means.iter().all(|&e| e == 0.0) {
        report.note("velocity variance vanishes identically: already flocked");
        report.verdict(Verdict::at_most("energy_vanishes", 0.0, 0.0));
        return Ok(report);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&means)
        .filter(|(t, e)| **t >= t_start - 1e-12 && **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "positive-energy points in the fit window",
            got: xs.len(),
            need: 2,
        });
    }
    let fit = stats::ols(&xs, &ys);
    let rate = -fit.slope;
    report.metric("rate_fit", rate).metric("rate_fit_se", fit.slope_se);
    report.verdict(Verdict::at_least("decay_rate", rate, bound * (1.0 - tol)));
    Ok(report)
}
