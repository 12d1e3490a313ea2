use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiagnosticsReport, Series, TestFunction, Verdict};
use crate::dynamics::{simulate_observed, ParticleEnsemble, SimConfig};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::sampling::Sampler;
use crate::stats::{self, mix_seed, Estimate};

const MIN_RESAMPLES: usize = 32;

/// `φ(X) = Π_m f(X(t_m))` over grid steps `t_m`: a cylinder function on path space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub steps: Vec<usize>,
    pub f: TestFunction,
}

impl CylinderFunction {
    /// `snapshots[m]` holds the flattened states at `steps[m]`.
    fn eval(&self, snapshots: &[Vec<f64>], particle: usize) -> f64 {
        let d = self.f.dim;
        snapshots
            .iter()
            .map(|s| self.f.eval(&s[particle * d..(particle + 1) * d]))
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSpec {
    /// One cylinder function per marginal; `r = phis.len()`.
    pub phis: Vec<CylinderFunction>,
    pub n_list: Vec<usize>,
    /// One common-noise path per seed.
    pub beta_seeds: Vec<u64>,
    /// Initial-condition resamples per noise path.
    pub resamples: usize,
    pub n_ref: usize,
}

fn snapshots(
    kernel: &KernelSet,
    init: ParticleEnsemble,
    cfg: &SimConfig,
    steps: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let mut c = cfg.clone();
    c.n_particles = init.len();
    let mut out = vec![Vec::new(); steps.len()];
    let mut observe = |step: usize, ens: &ParticleEnsemble| {
        for (slot, &s) in out.iter_mut().zip(steps) {
            if s == step {
                *slot = ens.states().to_vec();
            }
        }
    };
    simulate_observed(kernel, &init, &c, &mut observe)?;
    Ok(out)
}

/// Conditional propagation of chaos given the common noise.
///
/// For each noise path β the conditional expectation
/// `E[Π_i φ_i(X^{i,N}) | β]` is estimated by resampling i.i.d. initial data
/// under the same β; within each resample the product is averaged over the
/// `⌊N/r⌋` disjoint particle blocks (exchangeability makes every block an
/// unbiased copy). The target `Π_i ⟨φ_i, μ⟩` uses a reference run of size
/// `n_ref` on the same β whose initial points are a low-discrepancy set
/// mapped through the sampler, so its own error is far below that of the
/// tested sizes. Reports `Δ_N = mean_β |Ê − Π⟨φ_i, μ^ref⟩|` and passes iff it
/// decreases along `n_list`.
pub fn chaos_test(
    kernel: &KernelSet,
    sampler: &Sampler,
    cfg: &SimConfig,
    spec: &ChaosSpec,
) -> Result<DiagnosticsReport> {
    if kernel.has_individual() {
        return Err(Error::Precondition("chaos test runs in the sigma = 0 regime".into()));
    }
    sampler.validate()?;
    Error::check_dim("sampler", kernel.dim(), sampler.dim())?;
    if spec.resamples < MIN_RESAMPLES {
        return Err(Error::InsufficientSamples {
            what: "initial-condition resamples",
            got: spec.resamples,
            need: MIN_RESAMPLES,
        });
    }
    if spec.beta_seeds.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "noise paths",
            got: 0,
            need: 1,
        });
    }
    let r = spec.phis.len();
    let n_min = spec.n_list.iter().copied().min().unwrap_or(0);
    if r == 0 || n_min < r {
        return Err(Error::Precondition(format!(
            "need 1 <= r <= min N (r = {r}, min N = {n_min})"
        )));
    }
    let total_steps = cfg.steps();
    let mut steps: Vec<usize> = spec.phis.iter().flat_map(|p| p.steps.iter().copied()).collect();
    steps.sort_unstable();
    steps.dedup();
    if let Some(&s) = steps.iter().find(|&&s| s > total_steps) {
        return Err(Error::Precondition(format!("cylinder step {s} beyond {total_steps} steps")));
    }
    for phi in &spec.phis {
        Error::check_dim("phi", kernel.dim(), phi.f.dim)?;
    }
    let select = |snaps: &[Vec<f64>], phi: &CylinderFunction| -> Vec<Vec<f64>> {
        phi.steps
            .iter()
            .map(|s| snaps[steps.binary_search(s).expect("collected step")].clone())
            .collect()
    };

    let d = kernel.dim();
    // Reference targets Π_i ⟨φ_i, μ^ref⟩ per noise path.
    let reference: Vec<f64> = spec
        .beta_seeds
        .par_iter()
        .map(|&beta| {
            let init = ParticleEnsemble::new(d, sampler.low_discrepancy(spec.n_ref))?;
            let snaps = snapshots(kernel, init, &cfg.clone().with_seed(beta), &steps)?;
            Ok(spec
                .phis
                .iter()
                .map(|phi| {
                    let own = select(&snaps, phi);
                    let vals: Vec<f64> = (0..spec.n_ref).map(|j| phi.eval(&own, j)).collect();
                    stats::mean(&vals)
                })
                .product())
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..spec.beta_seeds.len())
        .flat_map(|b| (0..spec.n_list.len()).flat_map(move |n| (0..spec.resamples).map(move |s| (b, n, s))))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, ni, s)| {
            let beta = spec.beta_seeds[b];
            let n = spec.n_list[ni];
            let init_seed = mix_seed(mix_seed(beta, n as u64), s as u64);
            let init = ParticleEnsemble::new(d, sampler.sample(n, init_seed))?;
            let snaps = snapshots(kernel, init, &cfg.clone().with_seed(beta), &steps)?;
            let own: Vec<Vec<Vec<f64>>> = spec.phis.iter().map(|phi| select(&snaps, phi)).collect();
            let blocks = n / r;
            let prods: Vec<f64> = (0..blocks)
                .map(|blk| {
                    spec.phis
                        .iter()
                        .zip(&own)
                        .enumerate()
                        .map(|(i, (phi, o))| phi.eval(o, blk * r + i))
                        .product()
                })
                .collect();
            Ok(stats::mean(&prods))
        })
        .collect::<Result<_>>()?;

    let mut report = DiagnosticsReport::new("chaos");
    report
        .metric("r", r as f64)
        .metric("n_ref", spec.n_ref as f64)
        .metric("resamples", spec.resamples as f64)
        .metric("noise_paths", spec.beta_seeds.len() as f64);
    let per_n = spec.n_list.len() * spec.resamples;
    let mut deltas = Vec::new();
    for (ni, &n) in spec.n_list.iter().enumerate() {
        let gaps: Vec<f64> = (0..spec.beta_seeds.len())
            .map(|b| {
                let start = b * per_n + ni * spec.resamples;
                let cond = stats::mean(&values[start..start + spec.resamples]);
                (cond - reference[b]).abs()
            })
            .collect();
        let e = Estimate::of(&gaps);
        report.metric(format!("delta[{n}]"), e.mean).metric(format!("delta_se[{n}]"), e.se);
        deltas.push((n, e));
    }
    for w in deltas.windows(2) {
        report.verdict(Verdict::at_most(
            format!("delta_decreasing[{} vs {}]", w[1].0, w[0].0),
            w[1].1.mean,
            w[0].1.mean,
        ));
    }
    report.series(Series {
        name: "delta_by_n".into(),
        t: deltas.iter().map(|x| x.0 as f64).collect(),
        values: deltas.iter().map(|x| x.1.mean).collect(),
        se: Some(deltas.iter().map(|x| x.1.se).collect()),
    });
    report.note("series abscissa is the ensemble size N");
    Ok(report)
}
