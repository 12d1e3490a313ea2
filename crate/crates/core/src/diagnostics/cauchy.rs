use rayon::prelude::*;

use super::{DiagnosticsReport, Series, Verdict};
use crate::dynamics::{coupled_pair, ParticleEnsemble, SimConfig};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::stats::Estimate;
use crate::transport;

#[derive(Debug, Clone, PartialEq)]
pub struct CauchySpec {
    /// Ensemble sizes; each must divide the next, the largest must not exceed the base.
    pub sizes: Vec<usize>,
    pub p: f64,
    pub seeds: Vec<u64>,
}

/// For consecutive sizes `N < N'`, runs the prefix ensembles of `base_init`
/// of size `N'` and `N` on shared noise and estimates
/// `E[W_p^p(μ^N, μ^{N'})]` in path space (sup-in-time ground distance on the
/// recorded grid). Pass iff each estimate is at most the previous one plus
/// their combined standard error.
pub fn cauchy_convergence(
    kernel: &KernelSet,
    base_init: &ParticleEnsemble,
    cfg: &SimConfig,
    spec: &CauchySpec,
) -> Result<DiagnosticsReport> {
    if kernel.has_individual() {
        return Err(Error::Precondition("Cauchy test runs in the sigma = 0 regime".into()));
    }
    let mut sizes = spec.sizes.clone();
    sizes.sort_unstable();
    if sizes.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "ensemble sizes",
            got: sizes.len(),
            need: 2,
        });
    }
    for w in sizes.windows(2) {
        if w[0] == 0 || w[0] == w[1] || w[1] % w[0] != 0 {
            return Err(Error::Precondition(format!(
                "sizes must be nested (each dividing the next, no repeats): {} and {}",
                w[0], w[1]
            )));
        }
    }
    let largest = *sizes.last().expect("two sizes");
    if largest > base_init.len() {
        return Err(Error::Precondition(format!(
            "largest size {largest} exceeds the base ensemble of {}",
            base_init.len()
        )));
    }
    if spec.seeds.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "paired seeds",
            got: 0,
            need: 1,
        });
    }

    let mut report = DiagnosticsReport::new("cauchy");
    report.metric("p", spec.p).metric("seeds", spec.seeds.len() as f64);
    let mut estimates: Vec<(usize, usize, Estimate)> = Vec::new();
    for w in sizes.windows(2) {
        let (small, big) = (w[0], w[1]);
        let big_init = base_init.restrict(&(0..big).collect::<Vec<_>>())?;
        let subsample: Vec<usize> = (0..small).collect();
        let costs: Vec<f64> = spec
            .seeds
            .par_iter()
            .map(|&seed| {
                let mut c = cfg.clone();
                c.master_seed = seed;
                c.n_particles = big;
                let (rb, rs) = coupled_pair(kernel, &big_init, &c, &subsample)?;
                transport::wasserstein_path_cost(&rs.measure_path()?, &rb.measure_path()?, spec.p)
            })
            .collect::<Result<_>>()?;
        let e = Estimate::of(&costs);
        report
            .metric(format!("cost[{small},{big}]"), e.mean)
            .metric(format!("cost_se[{small},{big}]"), e.se);
        estimates.push((small, big, e));
    }
    for pair in estimates.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        report.verdict(Verdict::at_most(
            format!("decreasing[{},{} vs {},{}]", b.0, b.1, a.0, a.1),
            b.2.mean,
            a.2.mean + a.2.se.hypot(b.2.se),
        ));
    }
    report.series(Series {
        name: "cost_by_size".into(),
        t: estimates.iter().map(|e| e.0 as f64).collect(),
        values: estimates.iter().map(|e| e.2.mean).collect(),
        se: Some(estimates.iter().map(|e| e.2.se).collect()),
    });
    report.note("series abscissa is the smaller ensemble size of each pair");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ConstantKernel, CuckerSmale, CuckerSmaleParams};
    use crate::measure::EmpiricalMeasure;

    #[test]
    fn non_interacting_translation_preserves_distance() {
        let k = KernelSet::new("const", ConstantKernel::new(vec![0.3, -0.1], vec![1.0, 0.5]));
        let pts: Vec<f64> = (0..8).flat_map(|i| [i as f64 * 0.37 % 1.0, (i * i) as f64 * 0.11 % 1.0]).collect();
        let base = ParticleEnsemble::new(2, pts.clone()).unwrap();
        let cfg = SimConfig::new(8, 2, 0.5, 0.05).with_stride(2);
        let spec = CauchySpec {
            sizes: vec![4, 8],
            p: 2.0,
            seeds: vec![1, 2, 3],
        };
        let r = cauchy_convergence(&k, &base, &cfg, &spec).unwrap();
        let small = EmpiricalMeasure::uniform(2, pts[..8].to_vec()).unwrap();
        let big = EmpiricalMeasure::uniform(2, pts).unwrap();
        let w0 = transport::wasserstein_cost(&small, &big, 2.0, 4096).unwrap();
        assert!((r.metrics["cost[4,8]"] - w0).abs() < 1e-9, "{} vs {w0}", r.metrics["cost[4,8]"]);
        assert!(r.metrics["cost_se[4,8]"] < 1e-9);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        let k = CuckerSmale::new(CuckerSmaleParams::flocking(1.0, 0.0)).unwrap().into_set();
        let base = ParticleEnsemble::new(2, vec![0.0; 16]).unwrap();
        let cfg = SimConfig::new(8, 2, 0.1, 0.05);
        let mut spec = CauchySpec {
            sizes: vec![4, 4],
            p: 2.0,
            seeds: vec![1],
        };
        assert!(cauchy_convergence(&k, &base, &cfg, &spec).is_err());
        spec.sizes = vec![3, 4];
        assert!(cauchy_convergence(&k, &base, &cfg, &spec).is_err());
        spec.sizes = vec![4, 16];
        assert!(cauchy_convergence(&k, &base, &cfg, &spec).is_err());
    }
}
