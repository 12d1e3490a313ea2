//! On-disk artifacts: trajectory CSVs, `report.json`, `manifest.json`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsReport;
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Provenance of one harness run. Re-running it reproduces `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_sha256: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.config_sha256 != sha256_hex(m.config.as_bytes()) {
            return Err(Error::config("config_sha256", "does not match the embedded config text"));
        }
        if m.seeds.is_empty() {
            return Err(Error::config("seeds", "manifest lists no seeds"));
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_report(text: &str) -> Result<DiagnosticsReport> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `bytes` to `path` via a sibling temp file and a rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Precondition(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// One row per (time, particle): `t,particle,weight,x0,…,x{d-1}`.
pub fn trajectory_csv(record: &TrajectoryRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "particle".to_string(), "weight".to_string()];
    header.extend((0..record.dim).map(|k| format!("x{k}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for (k, &t) in record.times.iter().enumerate() {
        for i in 0..record.n() {
            row.clear();
            row.push(fmt_f64(t));
            row.push(record.ids[i].to_string());
            row.push(fmt_f64(record.weights[i]));
            row.extend(record.particle_state(k, i).iter().map(|&x| fmt_f64(x)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Shortest representation that round-trips exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Inverse of [`trajectory_csv`]: rows grouped by time, the same particles in
/// the same order at every time. The noise path is not stored.
pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<TrajectoryRecord> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let fixed = ["t", "particle", "weight"];
    if header.len() < 4 || header.iter().take(3).ne(fixed) {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with t,particle,weight and name at least one coordinate".into(),
        });
    }
    let dim = header.len() - 3;
    let mut ids: Vec<u64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut slot = 0usize;
    for result in rdr.records() {
        let rec = result.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("`{s}` is not a finite number")))
        };
        let t = num(0)?;
        let id: u64 = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("particle id must be a nonnegative integer".into()))?;
        let w = num(2)?;
        let x: Vec<f64> = (0..dim).map(|k| num(3 + k)).collect::<Result<_>>()?;

        if times.last() != Some(&t) {
            if let Some(&prev) = times.last() {
                if !(t > prev) {
                    return Err(bad(format!("time {t} does not increase past {prev}")));
                }
                if slot != ids.len() {
                    return Err(bad(format!("time {prev} lists {slot} particles, expected {}", ids.len())));
                }
            }
            times.push(t);
            states.push(Vec::with_capacity(ids.len() * dim));
            slot = 0;
        }
        if times.len() == 1 {
            if ids.contains(&id) {
                return Err(bad(format!("particle {id} repeated at time {t}")));
            }
            ids.push(id);
            weights.push(w);
        } else if slot >= ids.len() || ids[slot] != id || weights[slot] != w {
            return Err(bad(format!("particle order or weight changed at time {t}")));
        }
        states.last_mut().expect("pushed above").extend_from_slice(&x);
        slot += 1;
    }
    if times.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no rows".into(),
        });
    }
    if slot != ids.len() {
        return Err(Error::Parse {
            line: 0,
            message: format!("last time lists {slot} particles, expected {}", ids.len()),
        });
    }
    // Validates the weights once for every recorded time.
    EmpiricalMeasure::new(dim, states[0].clone(), weights.clone())?;
    Ok(TrajectoryRecord {
        dim,
        ids,
        weights,
        stride: 1,
        times,
        states,
        noise: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, ParticleEnsemble, SimConfig};
    use crate::kernels::{CuckerSmale, CuckerSmaleParams};

    #[test]
    fn csv_round_trip() {
        let k = CuckerSmale::new(CuckerSmaleParams::flocking(1.0, 0.5)).unwrap().into_set();
        let init = ParticleEnsemble::new(2, vec![0.1, 0.2, -0.3, 0.4, 1.0 / 3.0, -0.7]).unwrap();
        let rec = simulate(&k, &init, &SimConfig::new(3, 2, 0.1, 0.01).with_stride(5)).unwrap();
        let bytes = trajectory_csv(&rec).unwrap();
        let back = read_trajectory_csv(bytes.as_slice()).unwrap();
        assert_eq!(back.times, rec.times);
        assert_eq!(back.states, rec.states);
        assert_eq!(back.ids, rec.ids);
        assert_eq!(back.weights, rec.weights);
    }

    #[test]
    fn csv_rejects_garbage() {
        for text in [
            "",
            "a,b\n1,2\n",
            "t,particle,weight,x0\n",
            "t,particle,weight,x0\n0,0,1,nan\n",
            "t,particle,weight,x0\n0,0,0.5,1\n",
            "t,particle,weight,x0\n0,0,1,1\n0,0,1,2\n",
            "t,particle,weight,x0\n1,0,1,1\n0,0,1,2\n",
            "t,particle,weight,x0\n0,0,0.5,1\n0,1,0.5,1\n1,1,0.5,1\n1,0,0.5,1\n",
            "t,particle,weight,x0\n0,0,1,1,2\n",
        ] {
            assert!(read_trajectory_csv(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn manifest_hash_checked() {
        let config = "experiment = \"simulate\"\n".to_string();
        let mut m = Manifest {
            tool: "mfs".into(),
            version: "0".into(),
            experiment: "simulate".into(),
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            seeds: vec![1],
            threads: 1,
            wall_time_seconds: 0.0,
            outputs: vec![],
        };
        let text = String::from_utf8(to_json_pretty(&m).unwrap()).unwrap();
        assert_eq!(Manifest::parse(&text).unwrap(), m);
        m.config.push(' ');
        let text = String::from_utf8(to_json_pretty(&m).unwrap()).unwrap();
        assert!(Manifest::parse(&text).is_err());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
