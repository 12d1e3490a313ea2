//! Experiment orchestration: config in, `report.json` + `manifest.json` +
//! trajectory CSVs out.

mod config;
mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{line_of, ExperimentConfig, ExperimentKind, InitLaw};
pub use io::{
    parse_report, read_trajectory_csv, sha256_hex, to_json_pretty, trajectory_csv, write_atomic, Manifest,
};

use crate::characteristics::{comparison_experiment, transport_residual, ComparisonSpec};
use crate::diagnostics::{
    cauchy_convergence, chaos_test, flocking_rate, flocking_trace, velocity_drift, weakform_residual,
    CauchySpec, ChaosSpec, CylinderFunction, DiagnosticsReport, TestFunction, Verdict, WeakformSpec,
};
use crate::dynamics::{simulate, ParticleEnsemble, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::kernels::registry;
use crate::measure::EmpiricalMeasure;
use crate::transport;

pub const TOOL: &str = "mfs";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes of a harness run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

const DEFAULT_FLOCKING_TOLERANCE: f64 = 0.25;
const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-10;
const VELOCITY_DRIFT_TOLERANCE: f64 = 1e-10;
const DEFAULT_STABILITY_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: DiagnosticsReport,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Worker count from `MFS_THREADS` (unset or empty: rayon's default).
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("MFS_THREADS") {
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config("MFS_THREADS", format!("`{s}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Human-readable model catalog with parameter docs.
pub fn list_models() -> String {
    let mut out = String::new();
    for m in registry::catalog() {
        out.push_str(&format!("{}\n    {}\n", m.name, m.summary));
        for p in m.params {
            out.push_str(&format!("    {:<18} {}\n", p.key, p.doc));
        }
        out.push_str(&format!("    {:<18} {}\n", "s1_convention", "half_both (default) | paper_literal"));
    }
    out
}

/// Loads either a TOML config or a `manifest.json` written by a previous run.
/// For a manifest, its embedded config is re-run on its recorded seeds.
pub fn load(path: &Path) -> Result<(ExperimentConfig, String)> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let m = Manifest::parse(&text)?;
        let mut cfg = ExperimentConfig::parse(&m.config)?;
        cfg.seeds = Some(m.seeds);
        cfg.seed_count = None;
        cfg.validate()?;
        Ok((cfg, m.config))
    } else {
        let cfg = ExperimentConfig::parse(&text)?;
        Ok((cfg, text))
    }
}

/// Runs the config or manifest at `path`; `out` overrides the output directory.
pub fn run_path(path: &Path, out: Option<&Path>, threads: Option<usize>) -> Result<RunOutcome> {
    let (cfg, text) = load(path)?;
    run(&cfg, &text, out, threads)
}

/// Runs a validated config. `text` is the source recorded in the manifest.
pub fn run(cfg: &ExperimentConfig, text: &str, out: Option<&Path>, threads: Option<usize>) -> Result<RunOutcome> {
    let output_dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("mfs-out").join(cfg.name.as_deref().unwrap_or(kind_name(cfg.experiment))),
    };
    fs::create_dir_all(&output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads();
    let start = Instant::now();
    let (report, trajectories) = pool.install(|| execute(cfg))?;
    let wall = start.elapsed().as_secs_f64();

    let mut outputs = Vec::new();
    for (seed, rec) in &trajectories {
        let name = format!("run_{seed}.csv");
        write_atomic(&output_dir.join(&name), &trajectory_csv(rec)?)?;
        outputs.push(name);
    }
    write_atomic(&output_dir.join("report.json"), &to_json_pretty(&report)?)?;
    outputs.push("report.json".into());
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        experiment: kind_name(cfg.experiment).into(),
        config_sha256: sha256_hex(text.as_bytes()),
        config: text.to_string(),
        seeds: cfg.seed_list(),
        threads: workers,
        wall_time_seconds: wall,
        outputs,
    };
    write_atomic(&output_dir.join("manifest.json"), &to_json_pretty(&manifest)?)?;
    Ok(RunOutcome {
        report,
        manifest,
        output_dir,
    })
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Simulate => "simulate",
        ExperimentKind::Flocking => "flocking",
        ExperimentKind::Weakform => "weakform",
        ExperimentKind::Cauchy => "cauchy",
        ExperimentKind::Chaos => "chaos",
        ExperimentKind::Comparison => "comparison",
        ExperimentKind::TransportCheck => "transport-check",
    }
}

type Trajectories = Vec<(u64, TrajectoryRecord)>;

/// Computes the report (and any trajectories to persist) without touching disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<(DiagnosticsReport, Trajectories)> {
    cfg.validate()?;
    let kernel = cfg.kernel()?;
    let d = kernel.dim();
    let sim = cfg.sim_config(d);
    let seeds = cfg.seed_list();
    let mut report = DiagnosticsReport::new(kind_name(cfg.experiment));
    report
        .metric("n_particles", cfg.n_particles as f64)
        .metric("dim", d as f64)
        .metric("t_final", cfg.t_final)
        .metric("dt", cfg.dt)
        .metric("steps", sim.steps() as f64);
    let ensemble = |n: usize| -> Result<ParticleEnsemble> { ParticleEnsemble::new(d, cfg.initial_states(n, d)?) };
    let keep = |runs: Vec<(u64, TrajectoryRecord)>| if cfg.write_trajectories { runs } else { Vec::new() };

    let trajectories = match cfg.experiment {
        ExperimentKind::Simulate => {
            let init = ensemble(cfg.n_particles)?;
            let runs: Trajectories = seeds
                .par_iter()
                .map(|&s| Ok((s, simulate(&kernel, &init, &sim.clone().with_seed(s))?)))
                .collect::<Result<_>>()?;
            let final_norm = runs
                .iter()
                .flat_map(|(_, r)| r.last().chunks_exact(d).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()))
                .fold(0.0, f64::max);
            let m2: Vec<f64> = runs
                .iter()
                .map(|(_, r)| transport::moments(&r.measure_at(r.len() - 1), 2.0))
                .collect::<Result<_>>()?;
            report
                .metric("runs", runs.len() as f64)
                .metric("final_max_norm", final_norm)
                .metric("final_second_moment_mean", crate::stats::mean(&m2));
            keep(runs)
        }
        ExperimentKind::TransportCheck => {
            let init = ensemble(cfg.n_particles)?;
            let tol = cfg.residual_tolerance.unwrap_or(DEFAULT_RESIDUAL_TOLERANCE);
            let runs: Vec<(u64, TrajectoryRecord, f64)> = seeds
                .par_iter()
                .map(|&s| {
                    let run = simulate(&kernel, &init, &sim.clone().with_seed(s).with_stride(1))?;
                    let res = transport_residual(&kernel, &run)?;
                    Ok((s, run, res))
                })
                .collect::<Result<_>>()?;
            let mut worst = 0.0f64;
            for (s, _, res) in &runs {
                worst = worst.max(*res);
                report.verdict(Verdict::at_most(format!("transport_residual[seed={s}]"), *res, tol));
            }
            report.metric("max_transport_residual", worst).metric("runs", runs.len() as f64);
            keep(runs.into_iter().map(|(s, r, _)| (s, r)).collect())
        }
        ExperimentKind::Flocking => {
            let params = cfg.model_params().cucker_smale()?;
            let init = ensemble(cfg.n_particles)?;
            let traces = seeds
                .par_iter()
                .map(|&s| flocking_trace(&kernel, &init, &sim.clone().with_seed(s)))
                .collect::<Result<Vec<_>>>()?;
            let tol = cfg.tolerance.unwrap_or(DEFAULT_FLOCKING_TOLERANCE);
            let sub = flocking_rate(&traces, &params, cfg.window, tol)?;
            if !kernel.has_individual() {
                let drift = traces.iter().map(velocity_drift).fold(0.0, f64::max);
                let bound = VELOCITY_DRIFT_TOLERANCE * cfg.t_final.max(1.0);
                report.verdict(Verdict::at_most("mean_velocity_drift", drift, bound));
            }
            report.absorb("flocking", sub);
            Vec::new()
        }
        ExperimentKind::Weakform => {
            let init = ensemble(cfg.n_particles)?;
            let psi = cfg.test_function(d)?;
            let defaults = WeakformSpec::default();
            let spec = WeakformSpec {
                checkpoints: cfg.checkpoints.unwrap_or(defaults.checkpoints),
                mean_band: cfg.mean_band.unwrap_or(defaults.mean_band),
                variance_band: cfg.variance_band.unwrap_or(defaults.variance_band),
            };
            report.absorb("weakform", weakform_residual(&kernel, &init, &sim, &psi, &seeds, &spec)?);
            Vec::new()
        }
        ExperimentKind::Cauchy => {
            let sizes = cfg.sizes.clone().expect("validated");
            let base = ensemble(sizes.iter().copied().max().expect("validated"))?;
            let spec = CauchySpec {
                sizes,
                p: cfg.p.unwrap_or(2.0),
                seeds: seeds.clone(),
            };
            report.absorb("cauchy", cauchy_convergence(&kernel, &base, &sim, &spec)?);
            Vec::new()
        }
        ExperimentKind::Chaos => {
            let sampler = cfg.sampler()?.expect("validated");
            let steps = cfg.chaos_steps(cfg.chaos_times.as_deref().expect("validated"))?;
            let width = cfg.chaos_width.unwrap_or(1.0);
            let phis = cfg
                .chaos_centers
                .as_ref()
                .expect("validated")
                .iter()
                .map(|c| {
                    Ok(CylinderFunction {
                        steps: steps.clone(),
                        f: TestFunction::gaussian(d, (0..d).collect(), c.clone(), width)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let spec = ChaosSpec {
                phis,
                n_list: cfg.n_list.clone().expect("validated"),
                beta_seeds: seeds.clone(),
                resamples: cfg.resamples.unwrap_or(64),
                n_ref: cfg.n_ref.unwrap_or(1024),
            };
            report.absorb("chaos", chaos_test(&kernel, &sampler, &sim, &spec)?);
            Vec::new()
        }
        ExperimentKind::Comparison => {
            comparison(cfg, &kernel, &sim, &seeds, &mut report)?;
            Vec::new()
        }
    };
    Ok((report, trajectories))
}

fn comparison(
    cfg: &ExperimentConfig,
    kernel: &crate::kernels::KernelSet,
    sim: &crate::dynamics::SimConfig,
    seeds: &[u64],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    let d = kernel.dim();
    let base = cfg.initial_states(cfg.n_particles, d)?;
    let init_a = EmpiricalMeasure::uniform(d, base.clone())?;
    let shift = cfg.shift.clone().expect("validated");
    let grid = tensor_grid(cfg, d);
    let spec = ComparisonSpec {
        p: cfg.p.unwrap_or(2.0),
        radius: cfg.radius.expect("validated"),
        grid,
        seeds: seeds.to_vec(),
    };
    let scales = cfg.shift_scales.clone().unwrap_or_else(|| vec![1.0, 0.5]);
    let mut ratios = Vec::new();
    for &scale in &scales {
        let shifted: Vec<f64> = base
            .chunks_exact(d)
            .flat_map(|x| x.iter().zip(&shift).map(|(a, b)| a + scale * b).collect::<Vec<_>>())
            .collect();
        let init_b = EmpiricalMeasure::uniform(d, shifted)?;
        let r = comparison_experiment(kernel, &init_a, &init_b, sim, &spec)?;
        let tag = format!("scale={scale}");
        report
            .metric(format!("initial_cost[{tag}]"), r.initial_cost)
            .metric(format!("sup_cost_mean[{tag}]"), r.estimate.mean)
            .metric(format!("sup_cost_se[{tag}]"), r.estimate.se)
            .metric(format!("ratio[{tag}]"), r.ratio)
            .metric(
                format!("min_stop_index[{tag}]"),
                r.stop_index.iter().copied().min().unwrap_or(0) as f64,
            );
        if r.degenerate {
            report.note(format!("{tag}: initial measures coincide; ratio reported as 0"));
        } else {
            ratios.push((scale, r.ratio));
        }
    }
    let tol = cfg.stability_tolerance.unwrap_or(DEFAULT_STABILITY_TOLERANCE);
    if let Some(&(_, r0)) = ratios.first() {
        for &(scale, r) in &ratios[1..] {
            let rel = if r0 > 0.0 { (r / r0 - 1.0).abs() } else { r.abs() };
            report.verdict(Verdict::at_most(format!("ratio_stable[scale={scale}]"), rel, tol));
        }
    }
    Ok(())
}

/// Tensor grid on `[grid_lo, grid_hi]` with `grid_points` per axis (empty if unset).
fn tensor_grid(cfg: &ExperimentConfig, d: usize) -> Vec<f64> {
    let (Some(lo), Some(hi)) = (&cfg.grid_lo, &cfg.grid_hi) else {
        return Vec::new();
    };
    let g = cfg.grid_points.unwrap_or(3);
    let axis = |k: usize, i: usize| {
        if g == 1 {
            0.5 * (lo[k] + hi[k])
        } else {
            lo[k] + (hi[k] - lo[k]) * i as f64 / (g - 1) as f64
        }
    };
    let total = g.pow(d as u32);
    let mut out = Vec::with_capacity(total * d);
    for flat in 0..total {
        let mut idx = flat;
        for k in 0..d {
            out.push(axis(k, idx % g));
            idx /= g;
        }
    }
    out
}
