use serde::{Deserialize, Serialize};

use super::{AssumptionTag, Kernel, KernelSet};
use crate::error::{Error, Result};

/// `λ / (1 + r²)^γ` evaluated from `r² = |r|²`.
#[inline]
pub fn rational_weight(lambda: f64, gamma: f64, r2: f64) -> f64 {
    if gamma == 0.0 {
        lambda
    } else if gamma == 1.0 {
        lambda / (1.0 + r2)
    } else if gamma == 0.5 {
        lambda / (1.0 + r2).sqrt()
    } else {
        lambda * (1.0 + r2).powf(-gamma)
    }
}

/// Velocity truncation `𝓡(u) = u·χ(|u|)`, with `χ = 1` on `[0, R₀]`,
/// `χ = 0` beyond `R₀ + ε` and a quintic smoothstep in between (C²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub radius: f64,
    pub margin: f64,
}

impl Truncation {
    /// `(χ(s), χ'(s))`.
    pub fn bump(&self, s: f64) -> (f64, f64) {
        if s <= self.radius {
            (1.0, 0.0)
        } else if s >= self.radius + self.margin {
            (0.0, 0.0)
        } else {
            let t = (s - self.radius) / self.margin;
            let t2 = t * t;
            let smooth = t2 * t * (10.0 - 15.0 * t + 6.0 * t2);
            let dsmooth = 30.0 * t2 * (1.0 - 2.0 * t + t2) / self.margin;
            (1.0 - smooth, -dsmooth)
        }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (chi, _) = self.bump(norm(u));
        for (o, ui) in out.iter_mut().zip(u) {
            *o = chi * ui;
        }
    }

    /// `∇𝓡(u)_{ij} = χ δ_ij + χ'(|u|) u_i u_j / |u|`.
    pub fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        let d = u.len();
        let s = norm(u);
        let (chi, dchi) = self.bump(s);
        for i in 0..d {
            for j in 0..d {
                let radial = if s > 0.0 { dchi * u[i] * u[j] / s } else { 0.0 };
                out[i * d + j] = if i == j { chi } else { 0.0 } + radial;
            }
        }
    }

    /// `sup_u |𝓡(u)|`, attained inside `[R₀, R₀+ε]`; bounded above by `R₀ + ε`.
    pub fn sup_norm(&self) -> f64 {
        self.radius + self.margin
    }
}

/// Parameters of the Cucker–Smale family on `ℝ^{2d}` states `(x, v)`.
///
/// `ψ(r) = λ/(1+|r|²)^γ` weights the alignment drift, `φ(r) = λ_φ/(1+|r|²)^{γ_φ}`
/// the common-noise interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuckerSmaleParams {
    pub half_dim: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub phi_lambda: f64,
    pub phi_gamma: f64,
    pub truncation: Option<Truncation>,
}

impl CuckerSmaleParams {
    /// One-dimensional positions and velocities, constant `ψ ≡ λ`-style
    /// weight with exponent `gamma`, no common noise.
    pub fn flocking(lambda: f64, gamma: f64) -> Self {
        Self {
            half_dim: 1,
            lambda,
            gamma,
            phi_lambda: 0.0,
            phi_gamma: 0.0,
            truncation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_dim == 0 {
            return Err(Error::config("half_dim", "must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", "must be nonnegative"));
        }
        if !(self.phi_lambda >= 0.0 && self.phi_lambda.is_finite()) {
            return Err(Error::config("phi_lambda", "must be nonnegative"));
        }
        if !(self.phi_gamma >= 0.0 && self.phi_gamma.is_finite()) {
            return Err(Error::config("phi_gamma", "must be nonnegative"));
        }
        if let Some(t) = &self.truncation {
            if !(t.radius > 0.0 && t.radius.is_finite()) {
                return Err(Error::config("truncation_radius", "must be positive"));
            }
            if !(t.margin > 0.0 && t.margin.is_finite()) {
                return Err(Error::config("truncation_margin", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn psi(&self, r2: f64) -> f64 {
        rational_weight(self.lambda, self.gamma, r2)
    }

    pub fn phi(&self, r2: f64) -> f64 {
        rational_weight(self.phi_lambda, self.phi_gamma, r2)
    }

    /// `inf ψ` over position differences of norm at most `width`.
    pub fn psi_min(&self, width: f64) -> f64 {
        self.psi(width * width)
    }

    /// `‖φ‖∞ = φ(0)`.
    pub fn phi_sup(&self) -> f64 {
        self.phi_lambda
    }
}

/// Optional diagonal velocity noise `σ_{v_i v_i}(x, v) = base + slope·v_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualNoise {
    pub base: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct CuckerSmale {
    params: CuckerSmaleParams,
    individual: Option<IndividualNoise>,
}

impl CuckerSmale {
    pub fn new(params: CuckerSmaleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            individual: None,
        })
    }

    pub fn with_individual(mut self, noise: IndividualNoise) -> Self {
        if noise.base != 0.0 || noise.slope != 0.0 {
            self.individual = Some(noise);
        }
        self
    }

    pub fn params(&self) -> &CuckerSmaleParams {
        &self.params
    }

    /// Wraps into a [`KernelSet`] with the tags this family satisfies.
    pub fn into_set(self) -> KernelSet {
        let name = match (&self.params.truncation, &self.individual) {
            (_, Some(_)) => "cucker-smale-individual",
            (Some(_), None) => "cucker-smale-truncated",
            (None, None) => "cucker-smale",
        };
        let bound = self
            .params
            .truncation
            .map(|t| self.params.phi_sup() * t.sup_norm());
        let mut set = KernelSet::new(name, self)
            .with_tag(AssumptionTag::Sublinear)
            .with_tag(AssumptionTag::LocallyLipschitz);
        if let Some(b) = bound {
            set = set.with_common_bound(b);
        }
        set
    }

    #[inline]
    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.params.half_dim)
    }
}

impl Kernel for CuckerSmale {
    fn dim(&self) -> usize {
        2 * self.params.half_dim
    }

    fn drift(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.params.half_dim;
        let (xp, xv) = self.split(x);
        let (yp, yv) = self.split(y);
        let w = self.params.psi(dist2(xp, yp));
        out[..d].copy_from_slice(xv);
        for i in 0..d {
            out[d + i] = w * (yv[i] - xv[i]);
        }
    }

    fn common(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.params.half_dim;
        out[..d].fill(0.0);
        if self.params.phi_lambda == 0.0 {
            out[d..].fill(0.0);
            return;
        }
        let (xp, xv) = self.split(x);
        let (yp, yv) = self.split(y);
        let w = self.params.phi(dist2(xp, yp));
        let vel = &mut out[d..];
        for i in 0..d {
            vel[i] = yv[i] - xv[i];
        }
        if let Some(t) = &self.params.truncation {
            let u: Vec<f64> = vel.to_vec();
            t.apply(&u, vel);
        }
        for v in vel.iter_mut() {
            *v *= w;
        }
    }

    fn common_jacobians(&self, x: &[f64], y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        let d = self.params.half_dim;
        let n = 2 * d;
        jx.fill(0.0);
        jy.fill(0.0);
        let p = &self.params;
        if p.phi_lambda == 0.0 {
            return;
        }
        let (xp, xv) = self.split(x);
        let (yp, yv) = self.split(y);
        let r2 = dist2(xp, yp);
        let phi = p.phi(r2);
        // ∂φ/∂r_j = −2γ_φ φ r_j / (1 + r²)
        let dphi_scale = -2.0 * p.phi_gamma * phi / (1.0 + r2);
        let u: Vec<f64> = (0..d).map(|i| yv[i] - xv[i]).collect();
        let mut ru = vec![0.0; d];
        let mut grad_r = vec![0.0; d * d];
        match &p.truncation {
            Some(t) => {
                t.apply(&u, &mut ru);
                t.jacobian(&u, &mut grad_r);
            }
            None => {
                ru.copy_from_slice(&u);
                for i in 0..d {
                    grad_r[i * d + i] = 1.0;
                }
            }
        }
        for i in 0..d {
            let row = (d + i) * n;
            for j in 0..d {
                let dphi_j = dphi_scale * (xp[j] - yp[j]);
                jx[row + j] = dphi_j * ru[i];
                jy[row + j] = -dphi_j * ru[i];
                jx[row + d + j] = -phi * grad_r[i * d + j];
                jy[row + d + j] = phi * grad_r[i * d + j];
            }
        }
    }

    fn individual(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Some(noise) = &self.individual {
            let d = self.params.half_dim;
            let n = 2 * d;
            for i in 0..d {
                out[(d + i) * n + d + i] = noise.base + noise.slope * x[d + i];
            }
        }
    }

    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Some(noise) = &self.individual {
            let d = self.params.half_dim;
            let n = 2 * d;
            for i in 0..d {
                let a = d + i;
                out[(a * n + a) * n + a] = noise.slope;
            }
        }
    }

    fn has_common(&self) -> bool {
        self.params.phi_lambda > 0.0
    }

    fn has_individual(&self) -> bool {
        self.individual.is_some()
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_values() {
        let p = CuckerSmaleParams::flocking(1.0, 1.0);
        assert_eq!(p.psi(0.0), 1.0);
        assert_eq!(p.psi(1.0), 0.5);
        let p3 = CuckerSmaleParams::flocking(2.5, 0.7);
        assert_eq!(p3.psi(0.0), 2.5);
        assert!((p3.psi_min(3.0) - 2.5 / 10f64.powf(0.7)).abs() < 1e-15);
    }

    #[test]
    fn psi_decreases_and_is_bounded() {
        let p = CuckerSmaleParams::flocking(1.3, 0.8);
        let mut last = p.psi(0.0);
        for k in 1..200 {
            let r = k as f64 * 0.05;
            let v = p.psi(r * r);
            assert!(v > 0.0 && v <= p.lambda && v <= last);
            last = v;
        }
    }

    #[test]
    fn truncation_bump() {
        let t = Truncation { radius: 1.0, margin: 1.0 };
        let mut out = [0.0; 2];
        t.apply(&[0.6, 0.8], &mut out);
        assert_eq!(out, [0.6, 0.8]);
        t.apply(&[1.2, 1.6], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        t.apply(&[0.5], &mut out[..1]);
        assert_eq!(out[0], 0.5);
        let (chi, _) = t.bump(1.5);
        assert!((chi - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = CuckerSmaleParams::flocking(0.0, 1.0);
        assert!(matches!(
            CuckerSmale::new(p.clone()),
            Err(Error::Config { ref field, .. }) if field == "lambda"
        ));
        p.lambda = 1.0;
        p.gamma = -0.1;
        assert!(CuckerSmale::new(p).is_err());
    }

    #[test]
    fn velocity_interaction_is_antisymmetric() {
        let p = CuckerSmaleParams {
            half_dim: 2,
            lambda: 1.7,
            gamma: 0.6,
            phi_lambda: 0.0,
            phi_gamma: 0.0,
            truncation: None,
        };
        let k = CuckerSmale::new(p).unwrap();
        let pts: Vec<[f64; 4]> = (0..7)
            .map(|i| {
                let f = i as f64;
                [f.sin(), (2.0 * f).cos(), 0.3 * f - 1.0, (0.7 * f).sin() * 2.0]
            })
            .collect();
        let mut total = [0.0; 2];
        let mut out = [0.0; 4];
        for a in &pts {
            for b in &pts {
                k.drift(a, b, &mut out);
                total[0] += out[2];
                total[1] += out[3];
            }
        }
        assert!(total[0].abs() < 1e-13 && total[1].abs() < 1e-13);
    }
}
