//! Files written by the subcommands. Every file is written to a temporary
//! sibling and renamed into place, so a reader never sees half a record.

use std::fs;
use std::path::{Path, PathBuf};

use pendulum_core::{kinetic_energy, PendulumParams, State};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const ERROR_JSON: &str = "error.json";
pub const CERTIFICATE_JSON: &str = "certificate.json";
pub const ORBIT_JSON: &str = "orbit.json";
pub const ORBIT_CSV: &str = "orbit_trajectory.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_POINTS_DIR: &str = "points";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Encode(e.to_string()))?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&text).map_err(|e| CliError::Encode(format!("{}: {e}", path.display())))
}

/// Serializes rows with a header. The header is written even when there
/// are no rows.
pub fn write_csv<R: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<(), CliError> {
    let encode = |e: csv::Error| CliError::Encode(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).map_err(encode)?;
    for row in rows {
        w.serialize(row).map_err(encode)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Encode(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub const TRAJECTORY_HEADER: [&str; 8] = ["t", "x", "y", "z", "vx", "vy", "vz", "F"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl TrajectoryRow {
    pub fn new(s: &State, params: &PendulumParams) -> Self {
        Self {
            t: s.time,
            x: s.position.x,
            y: s.position.y,
            z: s.position.z,
            vx: s.velocity.x,
            vy: s.velocity.y,
            vz: s.velocity.z,
            f: kinetic_energy(s, params),
        }
    }
}

pub fn write_trajectory(
    path: &Path,
    samples: &[State],
    params: &PendulumParams,
) -> Result<(), CliError> {
    write_csv(
        path,
        &TRAJECTORY_HEADER,
        samples.iter().map(|s| TrajectoryRow::new(s, params)),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Encode(e.to_string()))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Encode(format!("{}: {e}", path.display())))
}

/// Contents of `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub time: Option<f64>,
    pub partial_samples: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_has_header() {
        let dir = std::env::temp_dir().join(format!("pendulum-out-{}", std::process::id()));
        ensure_dir(&dir).unwrap();
        let path = dir.join("empty.csv");
        write_trajectory(
            &path,
            &[],
            &PendulumParams::new(1.0, 1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,x,y,z,vx,vy,vz,F\n");
        assert!(read_trajectory(&path).unwrap().is_empty());
        fs::remove_dir_all(dir).unwrap();
    }
}
