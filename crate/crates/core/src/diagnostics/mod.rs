//! Monte-Carlo certificates: flocking decay, weak-form martingale residuals,
//! mean-field Cauchy convergence and conditional propagation of chaos.

mod cauchy;
mod chaos;
mod flocking;
mod test_function;
mod weakform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cauchy::{cauchy_convergence, CauchySpec};
pub use chaos::{chaos_test, ChaosSpec, CylinderFunction};
pub use flocking::{flocking_energy, flocking_rate, flocking_trace, velocity_drift, FlockingTrace};
pub use test_function::{Shape, TestFunction};
pub use weakform::{weakform_residual, weakform_run, WeakformSpec, WeakformTrace};

/// One pass/fail judgement and the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes iff `value ≤ tolerance`.
    pub fn at_most(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes iff `value ≥ tolerance`.
    pub fn at_least(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

/// A named time series with optional Monte-Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub name: String,
    pub metrics: BTreeMap<String, f64>,
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn verdict(&mut self, v: Verdict) -> &mut Self {
        self.verdicts.push(v);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn series(&mut self, s: Series) -> &mut Self {
        self.series.push(s);
        self
    }

    /// True iff every verdict passed (vacuously true without verdicts).
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Appends all of `other`'s content, prefixing metric and check names.
    pub fn absorb(&mut self, prefix: &str, other: DiagnosticsReport) {
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), v);
        }
        for mut s in other.series {
            s.name = format!("{prefix}.{}", s.name);
            self.series.push(s);
        }
        for mut v in other.verdicts {
            v.check = format!("{prefix}.{}", v.check);
            self.verdicts.push(v);
        }
        self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
    }
}

/// `|x| / se`, treating an exact zero with zero error as 0 and a nonzero
/// value with zero error as maximally significant (`f64::MAX`, which keeps
/// reports JSON-representable).
pub(crate) fn z_score(x: f64, se: f64) -> f64 {
    if se > 0.0 {
        x.abs() / se
    } else if x == 0.0 {
        0.0
    } else {
        f64::MAX
    }
}
