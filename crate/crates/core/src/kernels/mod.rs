//! Interaction kernels `b`, `c`, `σ`, the Itô corrective terms and the
//! mean-field fields `B[μ]`, `C[μ]`, `S[μ]`.
//!
//! Matrices are stored row-major. For a `d×d` Jacobian `J`, `J[i*d + j]` is
//! `∂f_i/∂x_j`. The rank-3 Jacobian of `σ` stores `∂_k σ_{i,l}` at
//! `(i*d + l)*d + k`.

mod cucker_smale;
mod generic;
pub mod registry;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

pub use cucker_smale::{rational_weight, CuckerSmale, CuckerSmaleParams, IndividualNoise, Truncation};
pub use generic::{ConstantKernel, GeometricNoise, LinearCommon, LinearDrift, ZeroKernel};

/// Coefficients of a mean-field particle system with one-dimensional common noise.
///
/// Implementations write full results into the `out` buffers; callers never
/// rely on the previous contents.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `b(x, y)`.
    fn drift(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// `c(x, y)`.
    fn common(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// `∇ₓc(x, y)` into `jx` and `∇_y c(x, y)` into `jy`.
    fn common_jacobians(&self, x: &[f64], y: &[f64], jx: &mut [f64], jy: &mut [f64]);

    /// `σ(x)`.
    fn individual(&self, x: &[f64], out: &mut [f64]);

    /// `∂_k σ_{i,l}(x)`.
    fn individual_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// False when `c ≡ 0`; lets evaluators skip the common-noise terms.
    fn has_common(&self) -> bool {
        true
    }

    /// False when `σ ≡ 0`.
    fn has_individual(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionTag {
    Sublinear,
    LocallyLipschitz,
    BoundedC,
    CommonNoiseOnly,
}

/// Placement of the factor ½ in the common-noise corrective term `s₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Convention {
    /// `½(∇ₓc(x,y)c(x,z) + ∇_y c(x,y)c(y,z))`, the Itô bracket of `C[μ](X)` with `β`.
    #[default]
    HalfBoth,
    /// `½∇ₓc(x,y)c(x,z) + ∇_y c(x,y)c(y,z)`.
    PaperLiteral,
}

impl S1Convention {
    fn factors(self) -> (f64, f64) {
        match self {
            S1Convention::HalfBoth => (0.5, 0.5),
            S1Convention::PaperLiteral => (0.5, 1.0),
        }
    }
}

/// A kernel plus the metadata describing its declared regime.
#[derive(Clone)]
pub struct KernelSet {
    name: String,
    kernel: Arc<dyn Kernel>,
    tags: BTreeSet<AssumptionTag>,
    theta: Option<f64>,
    common_bound: Option<f64>,
    s1_convention: S1Convention,
}

impl fmt::Debug for KernelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSet")
            .field("name", &self.name)
            .field("kernel", &self.kernel)
            .field("tags", &self.tags)
            .field("theta", &self.theta)
            .field("common_bound", &self.common_bound)
            .field("s1_convention", &self.s1_convention)
            .finish()
    }
}

impl KernelSet {
    pub fn new(name: impl Into<String>, kernel: impl Kernel + 'static) -> Self {
        let mut tags = BTreeSet::new();
        if !kernel.has_individual() {
            tags.insert(AssumptionTag::CommonNoiseOnly);
        }
        Self {
            name: name.into(),
            kernel: Arc::new(kernel),
            tags,
            theta: None,
            common_bound: None,
            s1_convention: S1Convention::default(),
        }
    }

    pub fn with_tag(mut self, tag: AssumptionTag) -> Self {
        self.tags.insert(tag);
        self
    }

    /// Hölder-growth exponent, recorded as metadata.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::config("theta", "must lie in [0, 1)"));
        }
        self.theta = Some(theta);
        Ok(self)
    }

    /// Declares `‖c‖ ≤ bound` and tags the kernel `bounded_c`.
    pub fn with_common_bound(mut self, bound: f64) -> Self {
        self.common_bound = Some(bound);
        self.tags.insert(AssumptionTag::BoundedC);
        self
    }

    pub fn with_s1_convention(mut self, convention: S1Convention) -> Self {
        self.s1_convention = convention;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn tags(&self) -> &BTreeSet<AssumptionTag> {
        &self.tags
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn common_bound(&self) -> Option<f64> {
        self.common_bound
    }

    pub fn s1_convention(&self) -> S1Convention {
        self.s1_convention
    }

    pub fn has_common(&self) -> bool {
        self.kernel.has_common()
    }

    pub fn has_individual(&self) -> bool {
        self.kernel.has_individual()
    }

    pub fn kernel(&self) -> &dyn Kernel {
        self.kernel.as_ref()
    }

    fn check(&self, argument: &'static str, v: &[f64]) -> Result<()> {
        Error::check_dim(argument, self.dim(), v.len())
    }

    pub fn b(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.kernel.drift(x, y, &mut out);
        out
    }

    pub fn c(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.kernel.common(x, y, &mut out);
        out
    }

    pub fn grad_c_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.common_jacobians(x, y).0
    }

    pub fn grad_c_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.common_jacobians(x, y).1
    }

    fn common_jacobians(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut jx = vec![0.0; d * d];
        let mut jy = vec![0.0; d * d];
        self.kernel.common_jacobians(x, y, &mut jx, &mut jy);
        (jx, jy)
    }

    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.kernel.individual(x, &mut out);
        out
    }

    pub fn grad_sigma(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d * d];
        self.kernel.individual_jacobian(x, &mut out);
        out
    }

    /// Common-noise corrective kernel `s₁(x, y, z)` under the configured convention.
    pub fn eval_s1(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check("x", x)?;
        self.check("y", y)?;
        self.check("z", z)?;
        let d = self.dim();
        let (fx, fy) = self.s1_convention.factors();
        let (jx, jy) = self.common_jacobians(x, y);
        let cxz = self.c(x, z);
        let cyz = self.c(y, z);
        let mut out = vec![0.0; d];
        for (i, o) in out.iter_mut().enumerate() {
            let row_x = &jx[i * d..(i + 1) * d];
            let row_y = &jy[i * d..(i + 1) * d];
            *o = fx * dot(row_x, &cxz) + fy * dot(row_y, &cyz);
        }
        Ok(out)
    }

    /// Individual-noise corrective term `S₂(x) = ½ Tr(∇σ σᵀ)`.
    pub fn eval_s2(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check("x", x)?;
        let mut out = vec![0.0; self.dim()];
        if self.has_individual() {
            let sigma = self.sigma(x);
            let grad = self.grad_sigma(x);
            add_s2(self.dim(), &sigma, &grad, &mut out);
        }
        Ok(out)
    }

    fn check_measure(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<()> {
        if mu.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Error::check_dim("mu", self.dim(), mu.dim())?;
        self.check("x", x)
    }

    /// `B[μ](x) = Σ_j w_j b(x, y_j)`.
    pub fn mean_field_b(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<Vec<f64>> {
        self.check_measure(mu, x)?;
        let mut out = vec![0.0; self.dim()];
        weighted_sum(mu, x, &mut out, |x, y, o| self.kernel.drift(x, y, o));
        Ok(out)
    }

    /// `C[μ](x) = Σ_j w_j c(x, y_j)`.
    pub fn mean_field_c(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<Vec<f64>> {
        self.check_measure(mu, x)?;
        let mut out = vec![0.0; self.dim()];
        weighted_sum(mu, x, &mut out, |x, y, o| self.kernel.common(x, y, o));
        Ok(out)
    }

    /// `S[μ](x) = Σ_{j,l} w_j w_l s₁(x, y_j, y_l) + S₂(x)`, evaluated as the
    /// literal double sum: `O(N²)` kernel evaluations per query. The particle
    /// integrators use the factorised [`FieldCache`] instead.
    pub fn mean_field_s(&self, mu: &EmpiricalMeasure, x: &[f64]) -> Result<Vec<f64>> {
        self.check_measure(mu, x)?;
        let mut out = self.eval_s2(x)?;
        if self.has_common() {
            for (y, wy) in mu.iter() {
                for (z, wz) in mu.iter() {
                    let s = self.eval_s1(x, y, z)?;
                    for (o, v) in out.iter_mut().zip(&s) {
                        *o += wy * wz * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Precomputes `C[μ]` at every atom of `mu`, after which `B`, `C` and `S`
    /// can be evaluated anywhere in `O(N)`.
    pub fn field_cache<'a>(&'a self, mu: &'a EmpiricalMeasure) -> Result<FieldCache<'a>> {
        if mu.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Error::check_dim("mu", self.dim(), mu.dim())?;
        Ok(FieldCache::new(self, mu.dim(), mu.atoms(), mu.weights()))
    }
}

/// `B`, `C`, `S` against a fixed weighted point cloud.
///
/// `S₁[μ](x)` factorises as
/// `a·(Σ_j w_j ∇ₓc(x,y_j)) C[μ](x) + b·Σ_j w_j ∇_y c(x,y_j) C[μ](y_j)`
/// with `(a, b)` the convention factors, so caching `C[μ](y_j)` turns the
/// `O(N²)` double sum into an `O(N)` query.
pub struct FieldCache<'a> {
    set: &'a KernelSet,
    dim: usize,
    atoms: &'a [f64],
    weights: &'a [f64],
    common_at_atoms: Vec<f64>,
}

impl<'a> FieldCache<'a> {
    pub(crate) fn new(set: &'a KernelSet, dim: usize, atoms: &'a [f64], weights: &'a [f64]) -> Self {
        let mut cache = Self {
            set,
            dim,
            atoms,
            weights,
            common_at_atoms: Vec::new(),
        };
        if set.has_common() {
            let mut all = vec![0.0; atoms.len()];
            for (y, out) in atoms.chunks_exact(dim).zip(all.chunks_exact_mut(dim)) {
                cache.common_mean(y, out);
            }
            cache.common_at_atoms = all;
        }
        cache
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn drift_mean(&self, x: &[f64], out: &mut [f64]) {
        let k = self.set.kernel();
        let mut tmp = vec![0.0; self.dim];
        out.fill(0.0);
        for (y, w) in self.atoms.chunks_exact(self.dim).zip(self.weights) {
            k.drift(x, y, &mut tmp);
            axpy(*w, &tmp, out);
        }
    }

    pub fn common_mean(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if !self.set.has_common() {
            return;
        }
        let k = self.set.kernel();
        let mut tmp = vec![0.0; self.dim];
        for (y, w) in self.atoms.chunks_exact(self.dim).zip(self.weights) {
            k.common(x, y, &mut tmp);
            axpy(*w, &tmp, out);
        }
    }

    /// `C[μ]` at atom `j`, as cached.
    pub fn common_at_atom(&self, j: usize) -> &[f64] {
        &self.common_at_atoms[j * self.dim..(j + 1) * self.dim]
    }

    /// Adds `S[μ](x)` to `out`, given `common = C[μ](x)`.
    pub fn add_correction(&self, x: &[f64], common: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let set = self.set;
        if set.has_common() {
            let (fx, fy) = set.s1_convention.factors();
            let mut jx = vec![0.0; d * d];
            let mut jy = vec![0.0; d * d];
            let mut jx_mean = vec![0.0; d * d];
            let mut tail = vec![0.0; d];
            for j in 0..self.len() {
                let w = self.weights[j];
                set.kernel().common_jacobians(x, self.atom(j), &mut jx, &mut jy);
                axpy(w, &jx, &mut jx_mean);
                let cy = self.common_at_atom(j);
                for (i, t) in tail.iter_mut().enumerate() {
                    *t += w * dot(&jy[i * d..(i + 1) * d], cy);
                }
            }
            for i in 0..d {
                out[i] += fx * dot(&jx_mean[i * d..(i + 1) * d], common) + fy * tail[i];
            }
        }
        if set.has_individual() {
            let sigma = set.sigma(x);
            let grad = set.grad_sigma(x);
            add_s2(d, &sigma, &grad, out);
        }
    }

    /// `(B + S)[μ](x)` into `drift` and `C[μ](x)` into `common`.
    pub fn ito_fields(&self, x: &[f64], drift: &mut [f64], common: &mut [f64]) {
        self.common_mean(x, common);
        self.drift_mean(x, drift);
        self.add_correction(x, common, drift);
    }

    /// Same as [`Self::ito_fields`] at atom `j`, reusing the cached `C[μ](y_j)`.
    /// Bitwise identical to `ito_fields(atom_j, ..)`.
    pub fn ito_fields_at_atom(&self, j: usize, drift: &mut [f64], common: &mut [f64]) {
        let x = self.atom(j);
        if self.set.has_common() {
            common.copy_from_slice(self.common_at_atom(j));
        } else {
            common.fill(0.0);
        }
        self.drift_mean(x, drift);
        self.add_correction(x, common, drift);
    }
}

fn add_s2(d: usize, sigma: &[f64], grad: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for l in 0..d {
            for k in 0..d {
                acc += grad[(i * d + l) * d + k] * sigma[k * d + l];
            }
        }
        *o += 0.5 * acc;
    }
}

fn weighted_sum(
    mu: &EmpiricalMeasure,
    x: &[f64],
    out: &mut [f64],
    f: impl Fn(&[f64], &[f64], &mut [f64]),
) {
    let mut tmp = vec![0.0; out.len()];
    for (y, w) in mu.iter() {
        f(x, y, &mut tmp);
        axpy(w, &tmp, out);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out += m · v` for row-major `d×d` `m`, scaled by `scale`.
#[inline]
pub(crate) fn add_matvec(d: usize, m: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += scale * dot(&m[i * d..(i + 1) * d], v);
    }
}
