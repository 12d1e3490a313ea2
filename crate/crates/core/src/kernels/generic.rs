//! Small closed-form kernels used for examples and as test fixtures.

use super::Kernel;

#[derive(Debug, Clone)]
pub struct ZeroKernel {
    dim: usize,
}

impl ZeroKernel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Kernel for ZeroKernel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common_jacobians(&self, _x: &[f64], _y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        jx.fill(0.0);
        jy.fill(0.0);
    }
    fn individual(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn has_common(&self) -> bool {
        false
    }
    fn has_individual(&self) -> bool {
        false
    }
}

/// `b ≡ b₀`, `c ≡ c₀`, `σ ≡ 0`.
#[derive(Debug, Clone)]
pub struct ConstantKernel {
    drift: Vec<f64>,
    common: Vec<f64>,
}

impl ConstantKernel {
    /// Panics if the two vectors differ in length.
    pub fn new(drift: Vec<f64>, common: Vec<f64>) -> Self {
        assert_eq!(drift.len(), common.len(), "drift and common must share a dimension");
        Self { drift, common }
    }
}

impl Kernel for ConstantKernel {
    fn dim(&self) -> usize {
        self.drift.len()
    }
    fn drift(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.drift);
    }
    fn common(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.common);
    }
    fn common_jacobians(&self, _x: &[f64], _y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        jx.fill(0.0);
        jy.fill(0.0);
    }
    fn individual(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn has_common(&self) -> bool {
        self.common.iter().any(|c| *c != 0.0)
    }
    fn has_individual(&self) -> bool {
        false
    }
}

/// `b(x, y) = a·x`: independent particles following `dx = a x dt`.
#[derive(Debug, Clone)]
pub struct LinearDrift {
    dim: usize,
    rate: f64,
}

impl LinearDrift {
    pub fn new(dim: usize, rate: f64) -> Self {
        Self { dim, rate }
    }
}

impl Kernel for LinearDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.rate * xi;
        }
    }
    fn common(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common_jacobians(&self, _x: &[f64], _y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        jx.fill(0.0);
        jy.fill(0.0);
    }
    fn individual(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn has_common(&self) -> bool {
        false
    }
    fn has_individual(&self) -> bool {
        false
    }
}

/// `b ≡ 0`, `c(x, y) = a·x`: geometric Brownian motion driven by the common noise.
#[derive(Debug, Clone)]
pub struct LinearCommon {
    dim: usize,
    rate: f64,
}

impl LinearCommon {
    pub fn new(dim: usize, rate: f64) -> Self {
        Self { dim, rate }
    }
}

impl Kernel for LinearCommon {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.rate * xi;
        }
    }
    fn common_jacobians(&self, _x: &[f64], _y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        jx.fill(0.0);
        jy.fill(0.0);
        for i in 0..self.dim {
            jx[i * self.dim + i] = self.rate;
        }
    }
    fn individual(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn has_common(&self) -> bool {
        self.rate != 0.0
    }
    fn has_individual(&self) -> bool {
        false
    }
}

/// `b ≡ 0`, `c ≡ 0`, `σ(x) = a·diag(x)`: coordinatewise geometric individual noise.
#[derive(Debug, Clone)]
pub struct GeometricNoise {
    dim: usize,
    rate: f64,
}

impl GeometricNoise {
    pub fn new(dim: usize, rate: f64) -> Self {
        Self { dim, rate }
    }
}

impl Kernel for GeometricNoise {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn common_jacobians(&self, _x: &[f64], _y: &[f64], jx: &mut [f64], jy: &mut [f64]) {
        jx.fill(0.0);
        jy.fill(0.0);
    }
    fn individual(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, xi) in x.iter().enumerate() {
            out[i * self.dim + i] = self.rate * xi;
        }
    }
    fn individual_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = self.dim;
        for i in 0..d {
            out[(i * d + i) * d + i] = self.rate;
        }
    }
    fn has_common(&self) -> bool {
        false
    }
    fn has_individual(&self) -> bool {
        self.rate != 0.0
    }
}
