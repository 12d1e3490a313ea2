//! Named kernel builders.

use super::{
    ConstantKernel, CuckerSmale, CuckerSmaleParams, GeometricNoise, IndividualNoise, KernelSet,
    LinearCommon, LinearDrift, S1Convention, Truncation, ZeroKernel,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ParamDoc {
    pub key: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamDoc],
}

const fn p(key: &'static str, doc: &'static str) -> ParamDoc {
    ParamDoc { key, doc }
}

const CS_PARAMS: [ParamDoc; 5] = [
    p("half_dim", "d; states are (x, v) in R^{2d} (default 1)"),
    p("lambda", "psi amplitude, > 0"),
    p("gamma", "psi decay exponent, >= 0"),
    p("phi_lambda", "phi amplitude (common-noise interaction), >= 0 (default 0)"),
    p("phi_gamma", "phi decay exponent, >= 0 (default 0)"),
];

static CATALOG: [ModelInfo; 8] = [
    ModelInfo {
        name: "constant-drift",
        summary: "b = drift, c = common (constant vectors), no individual noise",
        params: &[
            p("drift", "constant drift vector; its length sets the dimension"),
            p("common", "constant common-noise vector (default zeros)"),
        ],
    },
    ModelInfo {
        name: "cucker-smale",
        summary: "alignment drift psi(x-y)(w-v) with common-noise interaction phi(x-y)(w-v)",
        params: &CS_PARAMS,
    },
    ModelInfo {
        name: "cucker-smale-individual",
        summary: "cucker-smale plus diagonal velocity noise sigma = sigma_base + sigma_slope * v_i",
        params: &[
            CS_PARAMS[0],
            CS_PARAMS[1],
            CS_PARAMS[2],
            CS_PARAMS[3],
            CS_PARAMS[4],
            p("sigma_base", "constant part of the velocity noise"),
            p("sigma_slope", "velocity-proportional part of the velocity noise (default 0)"),
        ],
    },
    ModelInfo {
        name: "cucker-smale-truncated",
        summary: "cucker-smale with truncated velocities R(w-v) in the common-noise term; bounded c",
        params: &[
            CS_PARAMS[0],
            CS_PARAMS[1],
            CS_PARAMS[2],
            CS_PARAMS[3],
            CS_PARAMS[4],
            p("truncation_radius", "R0 > 0; R is the identity on |u| <= R0"),
            p("truncation_margin", "eps > 0; R vanishes for |u| >= R0 + eps"),
        ],
    },
    ModelInfo {
        name: "geometric-noise",
        summary: "b = c = 0, sigma(x) = rate * diag(x)",
        params: &[p("dim", "state dimension"), p("rate", "noise rate")],
    },
    ModelInfo {
        name: "linear-common",
        summary: "b = 0, c(x, y) = rate * x",
        params: &[p("dim", "state dimension"), p("rate", "common-noise rate")],
    },
    ModelInfo {
        name: "linear-drift",
        summary: "b(x, y) = rate * x, c = 0",
        params: &[p("dim", "state dimension"), p("rate", "growth rate")],
    },
    ModelInfo {
        name: "zero",
        summary: "all coefficients vanish",
        params: &[p("dim", "state dimension")],
    },
];

/// Every registered builder, sorted by name.
pub fn catalog() -> &'static [ModelInfo] {
    &CATALOG
}

pub fn find(name: &str) -> Result<&'static ModelInfo> {
    CATALOG.iter().find(|m| m.name == name).ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|m| m.name).collect();
        Error::config(
            "model",
            format!("unknown model `{name}`; available: {}", names.join(", ")),
        )
    })
}

/// Parameters for [`build`]; fields a model does not list are ignored here and
/// rejected by the configuration layer.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    pub dim: Option<usize>,
    pub half_dim: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub phi_lambda: Option<f64>,
    pub phi_gamma: Option<f64>,
    pub truncation_radius: Option<f64>,
    pub truncation_margin: Option<f64>,
    pub sigma_base: Option<f64>,
    pub sigma_slope: Option<f64>,
    pub drift: Option<Vec<f64>>,
    pub common: Option<Vec<f64>>,
    pub rate: Option<f64>,
    pub theta: Option<f64>,
    pub s1_convention: S1Convention,
}

fn required<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::config(key, "required by the selected model"))
}

fn positive_dim(v: &Option<usize>) -> Result<usize> {
    let d = required(v, "dim")?;
    if d == 0 {
        return Err(Error::config("dim", "must be positive"));
    }
    Ok(d)
}

impl ModelParams {
    /// Cucker–Smale parameters, possibly without truncation.
    pub fn cucker_smale(&self) -> Result<CuckerSmaleParams> {
        let truncation = match (self.truncation_radius, self.truncation_margin) {
            (Some(radius), Some(margin)) => Some(Truncation { radius, margin }),
            (None, None) => None,
            (None, Some(_)) => return Err(Error::config("truncation_radius", "required with truncation_margin")),
            (Some(_), None) => return Err(Error::config("truncation_margin", "required with truncation_radius")),
        };
        let params = CuckerSmaleParams {
            half_dim: self.half_dim.unwrap_or(1),
            lambda: required(&self.lambda, "lambda")?,
            gamma: required(&self.gamma, "gamma")?,
            phi_lambda: self.phi_lambda.unwrap_or(0.0),
            phi_gamma: self.phi_gamma.unwrap_or(0.0),
            truncation,
        };
        params.validate()?;
        Ok(params)
    }
}

pub fn build(name: &str, params: &ModelParams) -> Result<KernelSet> {
    let info = find(name)?;
    let set = match info.name {
        "zero" => KernelSet::new(name, ZeroKernel::new(positive_dim(&params.dim)?)),
        "constant-drift" => {
            let drift = required(&params.drift, "drift")?;
            if drift.is_empty() {
                return Err(Error::config("drift", "must not be empty"));
            }
            let common = params.common.clone().unwrap_or_else(|| vec![0.0; drift.len()]);
            if common.len() != drift.len() {
                return Err(Error::config("common", "length must match drift"));
            }
            let bound = common.iter().map(|c| c * c).sum::<f64>().sqrt();
            KernelSet::new(name, ConstantKernel::new(drift, common)).with_common_bound(bound)
        }
        "linear-drift" => KernelSet::new(
            name,
            LinearDrift::new(positive_dim(&params.dim)?, required(&params.rate, "rate")?),
        ),
        "linear-common" => KernelSet::new(
            name,
            LinearCommon::new(positive_dim(&params.dim)?, required(&params.rate, "rate")?),
        ),
        "geometric-noise" => KernelSet::new(
            name,
            GeometricNoise::new(positive_dim(&params.dim)?, required(&params.rate, "rate")?),
        ),
        "cucker-smale" => {
            let mut cs = params.cucker_smale()?;
            cs.truncation = None;
            CuckerSmale::new(cs)?.into_set()
        }
        "cucker-smale-truncated" => {
            let cs = params.cucker_smale()?;
            if cs.truncation.is_none() {
                return Err(Error::config("truncation_radius", "required by cucker-smale-truncated"));
            }
            CuckerSmale::new(cs)?.into_set()
        }
        "cucker-smale-individual" => {
            let noise = IndividualNoise {
                base: required(&params.sigma_base, "sigma_base")?,
                slope: params.sigma_slope.unwrap_or(0.0),
            };
            CuckerSmale::new(params.cucker_smale()?)?
                .with_individual(noise)
                .into_set()
        }
        _ => unreachable!("catalog entry without builder"),
    };
    let set = set.with_s1_convention(params.s1_convention);
    match params.theta {
        Some(theta) => set.with_theta(theta),
        None => Ok(set),
    }
}
