use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Profile of a radial test function in the selected coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `ψ ≡ amplitude`.
    Constant,
    /// `amplitude · exp(−|u|²/2)` with `u = (x_S − center)/width`.
    Gaussian,
    /// `amplitude · exp(−1/(1−|u|²))` on `|u| < 1`, zero outside: `C^∞_c`.
    Bump,
}

/// A smooth `ψ: ℝ^d → ℝ` depending on a subset `coords` of the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub shape: Shape,
    pub dim: usize,
    pub coords: Vec<usize>,
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn constant(dim: usize, value: f64) -> Self {
        Self {
            shape: Shape::Constant,
            dim,
            coords: Vec::new(),
            center: Vec::new(),
            width: 1.0,
            amplitude: value,
        }
    }

    pub fn gaussian(dim: usize, coords: Vec<usize>, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::new(Shape::Gaussian, dim, coords, center, width, 1.0)
    }

    pub fn bump(dim: usize, coords: Vec<usize>, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::new(Shape::Bump, dim, coords, center, width, 1.0)
    }

    /// Bump in the velocity half `(d..2d)` of a position–velocity state.
    pub fn velocity_bump(half_dim: usize, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::bump(2 * half_dim, (half_dim..2 * half_dim).collect(), center, width)
    }

    pub fn new(shape: Shape, dim: usize, coords: Vec<usize>, center: Vec<f64>, width: f64, amplitude: f64) -> Result<Self> {
        let f = Self {
            shape,
            dim,
            coords,
            center,
            width,
            amplitude,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("psi", "dimension must be positive"));
        }
        if let Some(c) = self.coords.iter().find(|&&c| c >= self.dim) {
            return Err(Error::config("psi_coords", format!("coordinate {c} outside dimension {}", self.dim)));
        }
        if self.shape != Shape::Constant {
            if self.coords.is_empty() {
                return Err(Error::config("psi_coords", "must select at least one coordinate"));
            }
            if self.center.len() != self.coords.len() {
                return Err(Error::config("psi_center", "length must match psi_coords"));
            }
            if !(self.width > 0.0 && self.width.is_finite()) {
                return Err(Error::config("psi_width", "must be positive"));
            }
        }
        if !self.amplitude.is_finite() {
            return Err(Error::config("psi_amplitude", "must be finite"));
        }
        Ok(())
    }

    /// Radius of the support around the centre in the selected coordinates
    /// (infinite unless compactly supported).
    pub fn support_radius(&self) -> f64 {
        match self.shape {
            Shape::Bump => self.width,
            _ => f64::INFINITY,
        }
    }

    fn reduced(&self, x: &[f64]) -> Vec<f64> {
        self.coords
            .iter()
            .zip(&self.center)
            .map(|(&c, m)| (x[c] - m) / self.width)
            .collect()
    }

    /// Profile `g(s)` and its first two derivatives in `s = |u|²`.
    fn profile(&self, s: f64) -> (f64, f64, f64) {
        let a = self.amplitude;
        match self.shape {
            Shape::Constant => (a, 0.0, 0.0),
            Shape::Gaussian => {
                let g = a * (-0.5 * s).exp();
                (g, -0.5 * g, 0.25 * g)
            }
            Shape::Bump => {
                if s >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let q = 1.0 / (1.0 - s);
                let g = a * (-q).exp();
                (g, -g * q * q, g * (q.powi(4) - 2.0 * q.powi(3)))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = self.reduced(x);
        self.profile(u.iter().map(|v| v * v).sum()).0
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if self.shape == Shape::Constant {
            return;
        }
        let u = self.reduced(x);
        let (_, g1, _) = self.profile(u.iter().map(|v| v * v).sum());
        for (k, &c) in self.coords.iter().enumerate() {
            out[c] = g1 * 2.0 * u[k] / self.width;
        }
    }

    /// Row-major `d×d` Hessian.
    pub fn hess(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if self.shape == Shape::Constant {
            return;
        }
        let d = self.dim;
        let u = self.reduced(x);
        let (_, g1, g2) = self.profile(u.iter().map(|v| v * v).sum());
        let w2 = self.width * self.width;
        for (a, &ca) in self.coords.iter().enumerate() {
            for (b, &cb) in self.coords.iter().enumerate() {
                let mut h = g2 * 4.0 * u[a] * u[b] / w2;
                if a == b {
                    h += g1 * 2.0 / w2;
                }
                out[ca * d + cb] = h;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &TestFunction, x: &[f64]) {
        let d = f.dim;
        let h = 1e-5;
        let mut g = vec![0.0; d];
        let mut hs = vec![0.0; d * d];
        f.grad(x, &mut g);
        f.hess(x, &mut hs);
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for k in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1e-3), "grad {k}: {fd} vs {}", g[k]);
            f.grad(&xp, &mut gp);
            f.grad(&xm, &mut gm);
            for i in 0..d {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                let an = hs[i * d + k];
                assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "hess {i},{k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = TestFunction::velocity_bump(1, vec![0.1], 1.5).unwrap();
        let g = TestFunction::gaussian(3, vec![0, 2], vec![0.5, -0.2], 0.7).unwrap();
        for x in [[0.3, -0.4, 0.0], [1.0, 0.9, -0.5], [-0.2, 0.0, 0.8]] {
            fd_check(&b, &x[..2]);
            fd_check(&g, &x);
        }
    }

    #[test]
    fn constant_has_no_derivatives() {
        let c = TestFunction::constant(2, 3.0);
        assert_eq!(c.eval(&[5.0, 1.0]), 3.0);
        let mut g = [1.0; 2];
        c.grad(&[0.0, 0.0], &mut g);
        assert_eq!(g, [0.0; 2]);
    }

    #[test]
    fn bump_is_compact() {
        let b = TestFunction::velocity_bump(1, vec![0.0], 1.0).unwrap();
        assert_eq!(b.eval(&[0.0, 1.0]), 0.0);
        assert_eq!(b.eval(&[7.0, 0.0]), (-1.0f64).exp());
        assert_eq!(b.support_radius(), 1.0);
        assert!(TestFunction::bump(2, vec![2], vec![0.0], 1.0).is_err());
    }
}
