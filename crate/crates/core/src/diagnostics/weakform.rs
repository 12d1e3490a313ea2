use rayon::prelude::*;

use super::{z_score, DiagnosticsReport, Series, TestFunction, Verdict};
use crate::dynamics::{simulate_observed, ParticleEnsemble, SimConfig};
use crate::error::{Error, Result};
use crate::kernels::{dot, KernelSet};
use crate::stats::{self, Estimate};

const MIN_RUNS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct WeakformSpec {
    /// Number of equispaced checkpoints in `(0, T]`.
    pub checkpoints: usize,
    /// Band, in standard errors, for `|E M_ψ(t)|`.
    pub mean_band: f64,
    /// Band, in standard errors, for `|Var M_ψ(t) − E[M_ψ](t)|`.
    pub variance_band: f64,
}

impl Default for WeakformSpec {
    fn default() -> Self {
        Self {
            checkpoints: 8,
            mean_band: 4.0,
            variance_band: 5.0,
        }
    }
}

/// `M_ψ` and its discrete quadratic variation at the checkpoints of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakformTrace {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub martingale: Vec<f64>,
    pub quadratic_variation: Vec<f64>,
}

/// Per-state integrands: `⟨Lψ, μ⟩`, `⟨C·∇ψ, μ⟩` and `Σ_i w_i²|σᵀ∇ψ(X_i)|²`.
fn integrands(kernel: &KernelSet, psi: &TestFunction, ens: &ParticleEnsemble) -> (f64, f64, f64) {
    let d = ens.dim();
    let cache = crate::kernels::FieldCache::new(kernel, d, ens.states(), ens.weights());
    let mut drift = vec![0.0; d];
    let mut common = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut hc = vec![0.0; d];
    let (mut gen, mut cdot, mut indiv) = (0.0, 0.0, 0.0);
    for (i, &w) in ens.weights().iter().enumerate() {
        let x = ens.state(i);
        psi.grad(x, &mut grad);
        psi.hess(x, &mut hess);
        // Outside the support of ψ nothing contributes.
        if grad.iter().chain(&hess).all(|&g| g == 0.0) {
            continue;
        }
        cache.ito_fields_at_atom(i, &mut drift, &mut common);
        // ½ tr((σσᵀ + CCᵀ) H)
        for r in 0..d {
            hc[r] = dot(&hess[r * d..(r + 1) * d], &common);
        }
        let mut second = dot(&common, &hc);
        if kernel.has_individual() {
            let sigma = kernel.sigma(x);
            let mut st_grad_sq = 0.0;
            for l in 0..d {
                let col: Vec<f64> = (0..d).map(|k| sigma[k * d + l]).collect();
                for r in 0..d {
                    hc[r] = dot(&hess[r * d..(r + 1) * d], &col);
                }
                second += dot(&col, &hc);
                st_grad_sq += dot(&col, &grad).powi(2);
            }
            indiv += w * w * st_grad_sq;
        }
        gen += w * (dot(&drift, &grad) + 0.5 * second);
        cdot += w * dot(&common, &grad);
    }
    (gen, cdot, indiv)
}

/// `M_ψ(t_K) = ⟨ψ,μ_K⟩ − ⟨ψ,μ_0⟩ − Σ_{k<K} ⟨L[μ_k]ψ, μ_k⟩ dt` and
/// `[M_ψ](t_K) = Σ_{k<K} (|⟨C[μ_k]·∇ψ, μ_k⟩|² + Σ_i w_i²|σᵀ∇ψ(X_i)|²) dt`,
/// streamed during the run.
pub fn weakform_run(
    kernel: &KernelSet,
    init: &ParticleEnsemble,
    cfg: &SimConfig,
    psi: &TestFunction,
    checkpoint_steps: &[usize],
) -> Result<WeakformTrace> {
    Error::check_dim("psi", kernel.dim(), psi.dim)?;
    let dt = cfg.dt;
    let steps_total = cfg.steps();
    if let Some(&s) = checkpoint_steps.iter().find(|&&s| s > steps_total) {
        return Err(Error::Precondition(format!("checkpoint step {s} beyond {steps_total} steps")));
    }
    let mut trace = WeakformTrace {
        steps: checkpoint_steps.to_vec(),
        times: Vec::new(),
        martingale: Vec::new(),
        quadratic_variation: Vec::new(),
    };
    let mut pairing0 = 0.0;
    let mut drift_integral = 0.0;
    let mut qv = 0.0;
    let mut observe = |step: usize, ens: &ParticleEnsemble| {
        let pairing: f64 = ens.weights().iter().enumerate().map(|(i, w)| w * psi.eval(ens.state(i))).sum();
        if step == 0 {
            pairing0 = pairing;
        }
        if checkpoint_steps.contains(&step) {
            trace.times.push(ens.time());
            trace.martingale.push(pairing - pairing0 - drift_integral);
            trace.quadratic_variation.push(qv);
        }
        if step < steps_total {
            let (gen, cdot, indiv) = integrands(kernel, psi, ens);
            drift_integral += gen * dt;
            qv += (cdot * cdot + indiv) * dt;
        }
    };
    simulate_observed(kernel, init, cfg, &mut observe)?;
    Ok(trace)
}

/// Martingale certification of the weak form over an ensemble of runs from
/// `init`, one per seed: at each checkpoint the mean of `M_ψ` must lie within
/// `mean_band` standard errors of 0, and its variance within `variance_band`
/// combined standard errors of the mean quadratic variation.
pub fn weakform_residual(
    kernel: &KernelSet,
    init: &ParticleEnsemble,
    cfg: &SimConfig,
    psi: &TestFunction,
    seeds: &[u64],
    spec: &WeakformSpec,
) -> Result<DiagnosticsReport> {
    if seeds.len() < MIN_RUNS {
        return Err(Error::InsufficientSamples {
            what: "weak-form runs (increase the ensemble)",
            got: seeds.len(),
            need: MIN_RUNS,
        });
    }
    cfg.validate()?;
    let steps = cfg.steps();
    let n_cp = spec.checkpoints.max(1);
    let mut checkpoint_steps: Vec<usize> = (1..=n_cp).map(|j| j * steps / n_cp).filter(|&s| s > 0).collect();
    checkpoint_steps.dedup();
    let traces: Vec<WeakformTrace> = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.master_seed = seed;
            weakform_run(kernel, init, &c, psi, &checkpoint_steps)
        })
        .collect::<Result<_>>()?;

    let mut report = DiagnosticsReport::new("weakform");
    report
        .metric("runs", seeds.len() as f64)
        .metric("n_particles", init.len() as f64)
        .metric("dt", cfg.dt)
        .metric("mean_band", spec.mean_band)
        .metric("variance_band", spec.variance_band);
    let times = traces[0].times.clone();
    let mut means = Vec::new();
    let mut mean_se = Vec::new();
    let mut vars = Vec::new();
    let mut var_se = Vec::new();
    let mut qv_means = Vec::new();
    let mut qv_se = Vec::new();
    let mut worst_mean_z = 0.0f64;
    let mut worst_var_z = 0.0f64;
    for (c, &t) in times.iter().enumerate() {
        let m: Vec<f64> = traces.iter().map(|tr| tr.martingale[c]).collect();
        let q: Vec<f64> = traces.iter().map(|tr| tr.quadratic_variation[c]).collect();
        let em = Estimate::of(&m);
        let eq = Estimate::of(&q);
        let var = stats::variance(&m);
        let vse = stats::variance_se(&m);
        let z_mean = z_score(em.mean, em.se);
        let z_var = z_score(var - eq.mean, vse.hypot(eq.se));
        worst_mean_z = worst_mean_z.max(z_mean);
        worst_var_z = worst_var_z.max(z_var);
        report.verdict(Verdict::at_most(format!("martingale_mean_z[t={t:.6}]"), z_mean, spec.mean_band));
        report.verdict(Verdict::at_most(format!("quadratic_variation_z[t={t:.6}]"), z_var, spec.variance_band));
        means.push(em.mean);
        mean_se.push(em.se);
        vars.push(var);
        var_se.push(vse);
        qv_means.push(eq.mean);
        qv_se.push(eq.se);
    }
    report
        .metric("max_mean_z", worst_mean_z)
        .metric("max_variance_z", worst_var_z);
    for (name, values, se) in [
        ("martingale_mean", means, mean_se),
        ("martingale_variance", vars, var_se),
        ("quadratic_variation_mean", qv_means, qv_se),
    ] {
        report.series(Series {
            name: name.into(),
            t: times.clone(),
            values,
            se: Some(se),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CuckerSmale, CuckerSmaleParams};

    fn cs() -> KernelSet {
        let mut p = CuckerSmaleParams::flocking(1.0, 0.0);
        p.phi_lambda = 0.2;
        CuckerSmale::new(p).unwrap().into_set()
    }

    #[test]
    fn constant_psi_gives_zero() {
        let k = cs();
        let init = ParticleEnsemble::new(2, vec![0.0, 1.0, 0.5, -1.0, 1.0, 0.2]).unwrap();
        let cfg = SimConfig::new(3, 2, 0.1, 0.01).with_seed(3);
        let psi = TestFunction::constant(2, 2.0);
        let tr = weakform_run(&k, &init, &cfg, &psi, &[5, 10]).unwrap();
        assert_eq!(tr.martingale, vec![0.0, 0.0]);
        assert_eq!(tr.quadratic_variation, vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_defect_is_first_order() {
        let k = CuckerSmale::new(CuckerSmaleParams::flocking(1.0, 0.5)).unwrap().into_set();
        let init = ParticleEnsemble::new(2, vec![0.0, 1.0, 0.5, -1.0, 1.0, 0.2]).unwrap();
        let psi = TestFunction::gaussian(2, vec![1], vec![0.1], 0.8).unwrap();
        let defect = |dt: f64| {
            let cfg = SimConfig::new(3, 2, 1.0, dt);
            let steps = cfg.steps();
            let tr = weakform_run(&k, &init, &cfg, &psi, &[steps / 2, steps]).unwrap();
            assert!(tr.quadratic_variation.iter().all(|&q| q == 0.0));
            tr.martingale.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let (a, b) = (defect(0.02), defect(0.01));
        assert!(a > 0.0);
        let ratio = a / b;
        assert!((ratio - 2.0).abs() < 0.2, "halving dt should halve the defect: {a} {b}");
    }

    #[test]
    fn too_few_runs() {
        let k = cs();
        let init = ParticleEnsemble::new(2, vec![0.0, 1.0]).unwrap();
        let cfg = SimConfig::new(1, 2, 0.1, 0.01);
        let psi = TestFunction::constant(2, 1.0);
        let seeds: Vec<u64> = (0..15).collect();
        assert!(matches!(
            weakform_residual(&k, &init, &cfg, &psi, &seeds, &WeakformSpec::default()),
            Err(Error::InsufficientSamples { got: 15, need: 16, .. })
        ));
    }
}
