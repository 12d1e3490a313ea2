#![allow(dead_code, unused_imports)]

use mfs_core::kernels::registry::{self, ModelParams};
use mfs_core::kernels::KernelSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as Rng8;

/// Every registered model with representative parameters.
pub fn kernel_zoo() -> Vec<KernelSet> {
    let cs = ModelParams {
        half_dim: Some(2),
        lambda: Some(1.3),
        gamma: Some(0.7),
        phi_lambda: Some(0.4),
        phi_gamma: Some(0.9),
        ..Default::default()
    };
    registry::catalog()
        .iter()
        .map(|info| {
            let p = match info.name {
                "constant-drift" => ModelParams {
                    drift: Some(vec![0.3, -0.2, 1.0]),
                    common: Some(vec![0.5, 0.1, -0.4]),
                    ..Default::default()
                },
                "cucker-smale" => cs.clone(),
                "cucker-smale-truncated" => ModelParams {
                    truncation_radius: Some(0.8),
                    truncation_margin: Some(1.2),
                    ..cs.clone()
                },
                "cucker-smale-individual" => ModelParams {
                    sigma_base: Some(0.3),
                    sigma_slope: Some(0.45),
                    ..cs.clone()
                },
                _ => ModelParams {
                    dim: Some(3),
                    rate: Some(0.6),
                    ..Default::default()
                },
            };
            registry::build(info.name, &p).unwrap_or_else(|e| panic!("{}: {e}", info.name))
        })
        .collect()
}

fn fd_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Worst relative Frobenius error of `∇ₓc`, `∇_y c` and `∇σ` against central
/// differences over `points` random `(x, y)` in `[-5, 5]^d`. A vanishing
/// Jacobian is compared in absolute terms.
pub fn jacobian_error(kernel: &KernelSet, points: usize, seed: u64) -> f64 {
    let d = kernel.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut fdx = vec![0.0; d * d];
        let mut fdy = vec![0.0; d * d];
        let mut fds = vec![0.0; d * d * d];
        for j in 0..d {
            let shifted = |v: &[f64], s: f64| {
                let mut v = v.to_vec();
                v[j] += s;
                v
            };
            let (cxp, cxm) = (kernel.c(&shifted(&x, h), &y), kernel.c(&shifted(&x, -h), &y));
            let (cyp, cym) = (kernel.c(&x, &shifted(&y, h)), kernel.c(&x, &shifted(&y, -h)));
            let (sp, sm) = (kernel.sigma(&shifted(&x, h)), kernel.sigma(&shifted(&x, -h)));
            for i in 0..d {
                fdx[i * d + j] = (cxp[i] - cxm[i]) / (2.0 * h);
                fdy[i * d + j] = (cyp[i] - cym[i]) / (2.0 * h);
                for l in 0..d {
                    fds[(i * d + l) * d + j] = (sp[i * d + l] - sm[i * d + l]) / (2.0 * h);
                }
            }
        }
        worst = worst
            .max(fd_error(&kernel.grad_c_x(&x, &y), &fdx))
            .max(fd_error(&kernel.grad_c_y(&x, &y), &fdy))
            .max(fd_error(&kernel.grad_sigma(&x), &fds));
    }
    worst
}

/// Proptest settings without on-disk failure persistence.
pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}

/// `min_σ (1/n) Σ_i cost[i][σ(i)]` over all permutations.
pub fn brute_force_assignment(cost: &[f64], n: usize) -> f64 {
    use itertools::Itertools;
    (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Uniform random instance: `n` atoms each in `[-1, 1]^dim`, and its `|x−y|^p` cost.
pub fn random_uniform_pair(rng: &mut ChaCha8Rng, n: usize, dim: usize, p: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = (0..dim).map(|k| (a[i * dim + k] - b[j * dim + k]).powi(2)).sum();
            cost[i * n + j] = d2.sqrt().powf(p);
        }
    }
    (a, b, cost)
}
