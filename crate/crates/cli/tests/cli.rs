use std::fs;
use std::process::Command;

const CONFIG: &str = r#"
experiment = "transport-check"
model = "cucker-smale-truncated"
lambda = 1.0
gamma = 0.5
phi_lambda = 0.3
truncation_radius = 1.0
truncation_margin = 1.0
n_particles = 4
t_final = 0.2
dt = 0.01
init = "uniform"
init_lo = [-1.0, -1.0]
init_hi = [1.0, 1.0]
seeds = [7, 8]
"#;

fn mfs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfs"))
}

#[test]
fn models_lists_catalog() {
    let out = mfs().arg("models").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["cucker-smale", "cucker-smale-truncated", "zero", "constant-drift"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}

#[test]
fn run_passes_then_reruns_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out_a = dir.path().join("a");
    let status = mfs().args(["run", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let out_b = dir.path().join("b");
    let status = mfs()
        .env("MFS_THREADS", "4")
        .args(["run", out_a.join("manifest.json").to_str().unwrap(), "--out", out_b.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read(out_a.join("report.json")).unwrap(), fs::read(out_b.join("report.json")).unwrap());
    assert!(out_a.join("run_7.csv").exists() && out_a.join("run_8.csv").exists());
}

#[test]
fn bad_config_exits_one_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, CONFIG.replace("dt = 0.01", "dt = -1.0")).unwrap();
    for sub in ["validate", "run"] {
        let out = mfs().args([sub, cfg.to_str().unwrap()]).current_dir(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{sub}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains("`dt`") && err.contains("line 11"), "{err}");
    }
}

#[test]
fn bad_thread_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = mfs().env("MFS_THREADS", "many").args(["run", cfg.to_str().unwrap()]).current_dir(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("MFS_THREADS"));
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = mfs().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
