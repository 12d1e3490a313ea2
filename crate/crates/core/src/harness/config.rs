//! Flat TOML experiment configuration: typed keys, unknown keys rejected, and
//! semantic checks that name the offending key and its line.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Shape, TestFunction};
use crate::dynamics::{Scheme, SimConfig, DEFAULT_BLOWUP_BOUND};
use crate::error::{Error, Result};
use crate::kernels::registry::{self, ModelParams};
use crate::kernels::{KernelSet, S1Convention};
use crate::sampling::Sampler;

/// Upper bounds that keep a validated config inside desk-scale resources.
const MAX_STEPS: usize = 100_000_000;
const MAX_PARTICLES: usize = 1_000_000;
const MAX_SEEDS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Flocking,
    Weakform,
    Cauchy,
    Chaos,
    Comparison,
    TransportCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLaw {
    Uniform,
    Gaussian,
    Points,
}

fn default_true() -> bool {
    true
}

/// Every recognised key. See the README for the schema reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub name: Option<String>,
    pub output_dir: Option<String>,

    // kernel
    pub model: String,
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
    #[serde(default)]
    pub s1_convention: S1Convention,

    // simulation
    pub n_particles: usize,
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Option<Scheme>,
    pub record_stride: Option<usize>,
    pub blowup_bound: Option<f64>,

    // initial condition
    pub init: Option<InitLaw>,
    pub init_lo: Option<Vec<f64>>,
    pub init_hi: Option<Vec<f64>>,
    pub init_mean: Option<Vec<f64>>,
    pub init_std: Option<Vec<f64>>,
    pub init_points: Option<Vec<f64>>,
    #[serde(default)]
    pub init_low_discrepancy: bool,
    pub init_seed: Option<u64>,

    // seeds
    pub seeds: Option<Vec<u64>>,
    pub seed_count: Option<usize>,
    pub seed_base: Option<u64>,

    // diagnostics
    pub tolerance: Option<f64>,
    pub window: Option<f64>,
    pub p: Option<f64>,
    pub residual_tolerance: Option<f64>,
    pub psi: Option<Shape>,
    pub psi_coords: Option<Vec<usize>>,
    pub psi_center: Option<Vec<f64>>,
    pub psi_width: Option<f64>,
    pub psi_amplitude: Option<f64>,
    pub checkpoints: Option<usize>,
    pub mean_band: Option<f64>,
    pub variance_band: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub n_list: Option<Vec<usize>>,
    pub n_ref: Option<usize>,
    pub resamples: Option<usize>,
    pub chaos_centers: Option<Vec<Vec<f64>>>,
    pub chaos_width: Option<f64>,
    pub chaos_times: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub shift: Option<Vec<f64>>,
    pub shift_scales: Option<Vec<f64>>,
    pub stability_tolerance: Option<f64>,
    pub grid_lo: Option<Vec<f64>>,
    pub grid_hi: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

/// Line (1-based) where `key` is assigned, for diagnostics.
pub fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

fn with_line(err: Error, text: &str) -> Error {
    match err {
        Error::Config { field, message } => {
            let key = field.split(['[', '.']).next().unwrap_or(&field).to_string();
            let message = match line_of(text, &key) {
                Some(line) => format!("{message} (line {line})"),
                None => message,
            };
            Error::Config { field, message }
        }
        other => other,
    }
}

fn parse_error(e: toml::de::Error, text: &str) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

impl ExperimentConfig {
    /// Parses and fully validates a configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| parse_error(e, text))?;
        cfg.validate().map_err(|e| with_line(e, text))?;
        Ok(cfg)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            dim: self.dim,
            half_dim: self.half_dim,
            lambda: self.lambda,
            gamma: self.gamma,
            phi_lambda: self.phi_lambda,
            phi_gamma: self.phi_gamma,
            truncation_radius: self.truncation_radius,
            truncation_margin: self.truncation_margin,
            sigma_base: self.sigma_base,
            sigma_slope: self.sigma_slope,
            drift: self.drift.clone(),
            common: self.common.clone(),
            rate: self.rate,
            theta: self.theta,
            s1_convention: self.s1_convention,
        }
    }

    pub fn kernel(&self) -> Result<KernelSet> {
        registry::build(&self.model, &self.model_params())
    }

    pub fn sim_config(&self, state_dim: usize) -> SimConfig {
        SimConfig {
            n_particles: self.n_particles,
            dim: state_dim,
            t_final: self.t_final,
            dt: self.dt,
            scheme: self.scheme.unwrap_or(Scheme::EulerIto),
            master_seed: self.seed_list().first().copied().unwrap_or(0),
            record_stride: self.record_stride.unwrap_or(1),
            blowup_bound: self.blowup_bound.unwrap_or(DEFAULT_BLOWUP_BOUND),
        }
    }

    /// Explicit seeds, or `seed_base, seed_base+1, …` for `seed_count` runs.
    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed_count) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => {
                let base = self.seed_base.unwrap_or(0);
                (0..n as u64).map(|i| base.wrapping_add(i)).collect()
            }
            (None, None) => vec![self.seed_base.unwrap_or(0)],
        }
    }

    pub fn sampler(&self) -> Result<Option<Sampler>> {
        let s = match self.init.unwrap_or(InitLaw::Uniform) {
            InitLaw::Points => return Ok(None),
            InitLaw::Uniform => Sampler::UniformBox {
                lo: self.init_lo.clone().ok_or_else(|| Error::config("init_lo", "required for init = \"uniform\""))?,
                hi: self.init_hi.clone().ok_or_else(|| Error::config("init_hi", "required for init = \"uniform\""))?,
            },
            InitLaw::Gaussian => Sampler::Gaussian {
                mean: self.init_mean.clone().ok_or_else(|| Error::config("init_mean", "required for init = \"gaussian\""))?,
                std: self.init_std.clone().ok_or_else(|| Error::config("init_std", "required for init = \"gaussian\""))?,
            },
        };
        s.validate()?;
        Ok(Some(s))
    }

    /// `n` initial states (flattened): explicit points, a low-discrepancy
    /// set, or i.i.d. draws with `init_seed`.
    pub fn initial_states(&self, n: usize, dim: usize) -> Result<Vec<f64>> {
        match self.sampler()? {
            None => {
                let pts = self.init_points.clone().ok_or_else(|| Error::config("init_points", "required for init = \"points\""))?;
                if pts.len() != n * dim {
                    return Err(Error::config(
                        "init_points",
                        format!("expected {n} points of dimension {dim} ({} numbers), found {}", n * dim, pts.len()),
                    ));
                }
                Ok(pts)
            }
            Some(s) if self.init_low_discrepancy => Ok(s.low_discrepancy(n)),
            Some(s) => Ok(s.sample(n, self.init_seed.unwrap_or(0))),
        }
    }

    pub fn test_function(&self, dim: usize) -> Result<TestFunction> {
        let shape = self.psi.ok_or_else(|| Error::config("psi", "required by the weakform experiment"))?;
        if shape == Shape::Constant {
            return Ok(TestFunction::constant(dim, self.psi_amplitude.unwrap_or(1.0)));
        }
        let coords = self.psi_coords.clone().unwrap_or_else(|| (0..dim).collect());
        let center = self.psi_center.clone().unwrap_or_else(|| vec![0.0; coords.len()]);
        TestFunction::new(shape, dim, coords, center, self.psi_width.unwrap_or(1.0), self.psi_amplitude.unwrap_or(1.0))
    }

    fn require<T: Clone>(v: &Option<T>, key: &str, kind: &str) -> Result<T> {
        v.clone().ok_or_else(|| Error::config(key, format!("required by the {kind} experiment")))
    }

    pub fn validate(&self) -> Result<()> {
        let kernel = self.kernel()?;
        let d = kernel.dim();
        let sim = self.sim_config(d);
        sim.validate()?;
        if sim.steps() > MAX_STEPS {
            return Err(Error::config("dt", format!("t_final / dt exceeds {MAX_STEPS} steps")));
        }
        if self.n_particles > MAX_PARTICLES {
            return Err(Error::config("n_particles", format!("at most {MAX_PARTICLES}")));
        }
        if let Some(n) = self.seed_count {
            if n == 0 || n > MAX_SEEDS {
                return Err(Error::config("seed_count", format!("must be in 1..={MAX_SEEDS}")));
            }
        }
        if let Some(s) = &self.seeds {
            if s.is_empty() {
                return Err(Error::config("seeds", "must not be empty"));
            }
            if self.seed_count.is_some() {
                return Err(Error::config("seed_count", "give either seeds or seed_count, not both"));
            }
        }
        if let Some(s) = self.sampler()? {
            if s.dim() != d {
                return Err(Error::config(
                    if self.init == Some(InitLaw::Gaussian) { "init_mean" } else { "init_lo" },
                    format!("sampler dimension {} does not match the state dimension {d}", s.dim()),
                ));
            }
        }
        if let Some(p) = self.p {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::config("p", "must be >= 1"));
            }
        }
        let positive = |v: Option<f64>, key: &str| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::config(key, "must be positive")),
                _ => Ok(()),
            }
        };
        positive(self.residual_tolerance, "residual_tolerance")?;
        positive(self.mean_band, "mean_band")?;
        positive(self.variance_band, "variance_band")?;
        positive(self.chaos_width, "chaos_width")?;
        positive(self.radius, "radius")?;
        positive(self.stability_tolerance, "stability_tolerance")?;
        if let Some(t) = self.tolerance {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::config("tolerance", "must be in [0, 1)"));
            }
        }
        if let Some(w) = self.window {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config("window", "must be nonnegative"));
            }
        }

        let kind = match self.experiment {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Flocking => "flocking",
            ExperimentKind::Weakform => "weakform",
            ExperimentKind::Cauchy => "cauchy",
            ExperimentKind::Chaos => "chaos",
            ExperimentKind::Comparison => "comparison",
            ExperimentKind::TransportCheck => "transport-check",
        };
        let needs_sigma_free = matches!(
            self.experiment,
            ExperimentKind::Cauchy | ExperimentKind::Chaos | ExperimentKind::Comparison | ExperimentKind::TransportCheck
        );
        if needs_sigma_free && kernel.has_individual() {
            return Err(Error::config("model", format!("the {kind} experiment needs a kernel without individual noise")));
        }
        match self.experiment {
            ExperimentKind::Simulate | ExperimentKind::TransportCheck => {
                self.initial_states(self.n_particles, d)?;
            }
            ExperimentKind::Flocking => {
                if !self.model.starts_with("cucker-smale") {
                    return Err(Error::config("model", "flocking needs a cucker-smale model"));
                }
                self.initial_states(self.n_particles, d)?;
            }
            ExperimentKind::Weakform => {
                self.initial_states(self.n_particles, d)?;
                self.test_function(d)?;
                if self.seed_list().len() < 16 {
                    return Err(Error::config("seed_count", "the weakform experiment needs at least 16 runs"));
                }
                if self.checkpoints == Some(0) {
                    return Err(Error::config("checkpoints", "must be at least 1"));
                }
            }
            ExperimentKind::Cauchy => {
                let sizes = Self::require(&self.sizes, "sizes", kind)?;
                let max = sizes.iter().copied().max().unwrap_or(0);
                if sizes.len() < 2 || sizes.contains(&0) || max > MAX_PARTICLES {
                    return Err(Error::config("sizes", format!("need at least two positive sizes up to {MAX_PARTICLES}")));
                }
                self.initial_states(max, d)?;
            }
            ExperimentKind::Chaos => {
                if self.sampler()?.is_none() {
                    return Err(Error::config("init", "the chaos experiment needs a sampler (uniform or gaussian)"));
                }
                let n_list = Self::require(&self.n_list, "n_list", kind)?;
                if n_list.is_empty() || n_list.iter().any(|&n| n == 0 || n > MAX_PARTICLES) {
                    return Err(Error::config("n_list", "sizes must be positive"));
                }
                let centers = Self::require(&self.chaos_centers, "chaos_centers", kind)?;
                if centers.is_empty() || centers.iter().any(|c| c.len() != d) {
                    return Err(Error::config("chaos_centers", format!("each centre needs {d} coordinates")));
                }
                let times = Self::require(&self.chaos_times, "chaos_times", kind)?;
                self.chaos_steps(&times)?;
                if let Some(n) = self.n_ref {
                    if n == 0 || n > MAX_PARTICLES {
                        return Err(Error::config("n_ref", "must be positive"));
                    }
                }
                if self.resamples.unwrap_or(64) < 32 {
                    return Err(Error::config("resamples", "at least 32 initial-condition resamples"));
                }
            }
            ExperimentKind::Comparison => {
                self.initial_states(self.n_particles, d)?;
                let shift = Self::require(&self.shift, "shift", kind)?;
                if shift.len() != d {
                    return Err(Error::config("shift", format!("needs {d} coordinates")));
                }
                Self::require(&self.radius, "radius", kind)?;
                for (key, v) in [("grid_lo", &self.grid_lo), ("grid_hi", &self.grid_hi)] {
                    if let Some(v) = v {
                        if v.len() != d {
                            return Err(Error::config(key, format!("needs {d} coordinates")));
                        }
                    }
                }
                if let Some(g) = self.grid_points {
                    if g == 0 || g.checked_pow(d as u32).map_or(true, |n| n > 1 << 16) {
                        return Err(Error::config("grid_points", "grid must have between 1 and 65536 points"));
                    }
                }
                if let Some(s) = &self.shift_scales {
                    if s.is_empty() || s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                        return Err(Error::config("shift_scales", "scales must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Grid step indices for the chaos cylinder times.
    pub fn chaos_steps(&self, times: &[f64]) -> Result<Vec<usize>> {
        if times.is_empty() {
            return Err(Error::config("chaos_times", "must not be empty"));
        }
        times
            .iter()
            .map(|&t| {
                let k = t / self.dt;
                if !(t > 0.0 && t <= self.t_final + 1e-12) || (k - k.round()).abs() > 1e-6 {
                    return Err(Error::config("chaos_times", format!("{t} is not a grid time in (0, t_final]")));
                }
                Ok(k.round() as usize)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "transport-check"
model = "cucker-smale-truncated"
lambda = 1.0
gamma = 0.5
phi_lambda = 0.3
truncation_radius = 1.0
truncation_margin = 1.0
n_particles = 4
t_final = 0.5
dt = 0.01
init = "uniform"
init_lo = [-1.0, -1.0]
init_hi = [1.0, 1.0]
seeds = [1, 2]
"#;

    #[test]
    fn parses() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::TransportCheck);
        assert_eq!(c.seed_list(), vec![1, 2]);
        assert_eq!(c.kernel().unwrap().dim(), 2);
    }

    #[test]
    fn bad_dt_names_field_and_line() {
        let text = BASE.replace("dt = 0.01", "dt = -0.01");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`dt`") && msg.contains("line 11"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{BASE}\nfrobnicate = 3\n");
        match ExperimentConfig::parse(&text).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 17);
                assert!(message.contains("frobnicate"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_model_lists_catalog() {
        let text = BASE.replace("cucker-smale-truncated", "vicsek");
        let msg = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("available") && msg.contains("constant-drift"), "{msg}");
    }

    #[test]
    fn sigma_rejected_where_characteristics_needed() {
        let text = BASE.replace("cucker-smale-truncated", "cucker-smale-individual") + "sigma_base = 0.1\n";
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn seed_count_expands() {
        let text = BASE.replace("seeds = [1, 2]", "seed_count = 3\nseed_base = 10");
        assert_eq!(ExperimentConfig::parse(&text).unwrap().seed_list(), vec![10, 11, 12]);
    }
}
