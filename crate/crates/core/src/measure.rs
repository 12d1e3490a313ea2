//! Weighted point clouds and time-indexed sequences of them.

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite weighted point cloud `Σ w_j δ_{y_j}` in `ℝ^d`.
///
/// Atoms are stored contiguously: atom `j` occupies `atoms[j*dim..(j+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Error::check_dim("atoms", weights.len() * dim, atoms.len())?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
        }
        Ok(Self {
            dim,
            atoms,
            weights,
        })
    }

    /// Uniform measure `(1/n) Σ δ_{y_j}`.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        let n = atoms.len() / dim;
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        Error::check_dim("atoms", n * dim, atoms.len())?;
        Self::new(dim, atoms, vec![1.0 / n as f64; n])
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyMeasure)?.len();
        let mut atoms = Vec::with_capacity(points.len() * dim);
        for p in points {
            Error::check_dim("point", dim, p.len())?;
            atoms.extend_from_slice(p);
        }
        Self::uniform(dim, atoms)
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// True when all weights are equal (bitwise), as produced by [`Self::uniform`].
    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| *w == w0)
    }

    /// Pairs each atom with its weight and sorts, giving a canonical form for equality tests.
    pub fn canonical(&self) -> Vec<(Vec<f64>, f64)> {
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut items: Vec<(Vec<f64>, f64)> = self.iter().map(|(a, w)| (a.to_vec(), w)).collect();
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        for (a, w) in items {
            match merged.last_mut() {
                Some((last, lw)) if *last == a => *lw += w,
                _ => merged.push((a, w)),
            }
        }
        merged
    }
}

/// Time-indexed sequence of measures sharing one atom indexing.
///
/// Atom `j` at every time belongs to the same trajectory, which is what the
/// path-space distances rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePath {
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasurePath {
    pub fn new(times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.len() != measures.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} times but {} measures",
                times.len(),
                measures.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMeasure("times must be strictly increasing".into()));
        }
        let (n, d) = (measures[0].len(), measures[0].dim());
        if measures.iter().any(|m| m.len() != n || m.dim() != d) {
            return Err(Error::InvalidMeasure(
                "all measures of a path must share atom count and dimension".into(),
            ));
        }
        Ok(Self { times, measures })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.measures[0].len()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        self.measures[0].weights()
    }

    pub fn initial(&self) -> &EmpiricalMeasure {
        &self.measures[0]
    }
}
