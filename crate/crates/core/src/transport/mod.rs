//! Exact Wasserstein distances on finite supports and moment functionals.

pub mod assignment;
pub mod simplex;

use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, MeasurePath};

/// Largest combined support (`|supp μ| + |supp ν|`) the exact solvers accept.
pub const DEFAULT_SUPPORT_CAP: usize = 4096;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("Wasserstein order p must be >= 1, got {p}")));
    }
    Ok(())
}

fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        return Err(Error::SupportCapExceeded { size, cap });
    }
    Ok(())
}

/// Exact optimal cost `min_π Σ π_ij cost_ij` for a row-major `rows×cols`
/// cost matrix with marginals `a`, `b`.
///
/// Equal-size uniform marginals go to the assignment solver (an optimal
/// vertex of the Birkhoff polytope is a permutation); anything else to the
/// transportation simplex.
pub fn optimal_cost(cost: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let (rows, cols) = (a.len(), b.len());
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMeasure);
    }
    Error::check_dim("cost", rows * cols, cost.len())?;
    let uniform = |w: &[f64]| w.iter().all(|&x| x == w[0]);
    if rows == cols && uniform(a) && uniform(b) {
        return Ok(assignment::mean_cost(cost, rows));
    }
    Ok(simplex::solve(cost, rows, cols, a, b)?.cost)
}

/// `W_p(μ, ν)` with the default support cap.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    wasserstein_with_cap(mu, nu, p, DEFAULT_SUPPORT_CAP)
}

pub fn wasserstein_with_cap(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
    cap: usize,
) -> Result<f64> {
    Ok(wasserstein_cost(mu, nu, p, cap)?.powf(1.0 / p))
}

/// Optimal cost `W_p^p(μ, ν)` (no root taken).
pub fn wasserstein_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, cap: usize) -> Result<f64> {
    check_p(p)?;
    Error::check_dim("nu", mu.dim(), nu.dim())?;
    check_cap(mu.len() + nu.len(), cap)?;
    if mu.dim() == 1 {
        return Ok(sorted_cost(mu, nu, p));
    }
    let cost = pairwise(mu.len(), nu.len(), |i, j| euclid(mu.atom(i), nu.atom(j)).powf(p));
    optimal_cost(&cost, mu.weights(), nu.weights())
}

fn pairwise(m: usize, n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            out.push(f(i, j));
        }
    }
    out
}

/// Monotone (quantile) coupling on the line; optimal for every convex cost.
fn sorted_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> f64 {
    let sorted = |m: &EmpiricalMeasure| {
        let mut v: Vec<(f64, f64)> = m.iter().map(|(x, w)| (x[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    loop {
        let mass = ra.min(rb);
        cost += mass * (a[i].0 - b[j].0).abs().powf(p);
        let (last_a, last_b) = (i + 1 == a.len(), j + 1 == b.len());
        if last_a && last_b {
            break;
        }
        if (ra <= rb && !last_a) || last_b {
            rb -= mass;
            i += 1;
            ra = a[i].1;
        } else {
            ra -= mass;
            j += 1;
            rb = b[j].1;
        }
    }
    cost
}

fn check_grids(mu: &MeasurePath, nu: &MeasurePath) -> Result<()> {
    Error::check_dim("nu", mu.dim(), nu.dim())?;
    let same = mu.times().len() == nu.times().len()
        && mu
            .times()
            .iter()
            .zip(nu.times())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same {
        return Err(Error::Precondition(format!(
            "path-space distance needs identical time grids ({} vs {} points)",
            mu.times().len(),
            nu.times().len()
        )));
    }
    Ok(())
}

fn sup_distance(mu: &MeasurePath, nu: &MeasurePath, i: usize, j: usize) -> f64 {
    mu.measures()
        .iter()
        .zip(nu.measures())
        .map(|(a, b)| euclid(a.atom(i), b.atom(j)))
        .fold(0.0, f64::max)
}

/// `W_p` on path space under the sup-in-time ground distance: exact OT over
/// all trajectory pairs.
pub fn wasserstein_path(mu: &MeasurePath, nu: &MeasurePath, p: f64) -> Result<f64> {
    Ok(wasserstein_path_cost(mu, nu, p)?.powf(1.0 / p))
}

/// Path-space `W_p^p`.
pub fn wasserstein_path_cost(mu: &MeasurePath, nu: &MeasurePath, p: f64) -> Result<f64> {
    check_p(p)?;
    check_grids(mu, nu)?;
    check_cap(mu.atom_count() + nu.atom_count(), DEFAULT_SUPPORT_CAP)?;
    let cost = pairwise(mu.atom_count(), nu.atom_count(), |i, j| {
        sup_distance(mu, nu, i, j).powf(p)
    });
    optimal_cost(&cost, mu.weights(), nu.weights())
}

/// `Σ_j w_j sup_t |x_j(t) − y_j(t)|^p` for paths whose atoms correspond
/// index-by-index; an upper bound on the path-space `W_p^p`.
pub fn matched_path_cost(mu: &MeasurePath, nu: &MeasurePath, p: f64) -> Result<f64> {
    check_p(p)?;
    check_grids(mu, nu)?;
    Error::check_dim("nu atoms", mu.atom_count(), nu.atom_count())?;
    if mu.weights() != nu.weights() {
        return Err(Error::Precondition("matched paths must carry identical weights".into()));
    }
    Ok(mu
        .weights()
        .iter()
        .enumerate()
        .map(|(j, w)| w * sup_distance(mu, nu, j, j).powf(p))
        .sum())
}

/// `Σ_j w_j |y_j|^q`.
pub fn moments(mu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Precondition(format!("moment order must be >= 1, got {q}")));
    }
    Ok(mu.iter().map(|(y, w)| w * norm(y).powf(q)).sum())
}

/// `Σ_j w_j exp(α|y_j|²)`; overflow is reported with the offending norm.
pub fn exp_moment(mu: &EmpiricalMeasure, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Precondition(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut total = 0.0;
    for (y, w) in mu.iter() {
        let r = norm(y);
        let e = (alpha * r * r).exp();
        if !e.is_finite() {
            return Err(Error::ExpOverflow { norm: r });
        }
        total += w * e;
    }
    if !total.is_finite() {
        return Err(Error::ExpOverflow { norm: support_radius(mu) });
    }
    Ok(total)
}

/// Largest atom norm.
pub fn support_radius(mu: &EmpiricalMeasure) -> f64 {
    mu.iter().map(|(y, _)| norm(y)).fold(0.0, f64::max)
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}
