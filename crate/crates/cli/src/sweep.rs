//! Orbit search repeated along one parameter axis.
//!
//! Each point is stored as `points/point_NNNN.json` as soon as it is done.
//! A rerun into the same directory reuses every record whose scenario is
//! unchanged, so an interrupted sweep resumes where it stopped.

use std::path::Path;
use std::str::FromStr;

use pendulum_core::{energy_threshold, ChartPoint, PendulumParams, PivotMotion, StepConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::SweepArgs;
use crate::config::Scenario;
use crate::find_orbit::{self, Search};
use crate::output;
use crate::{CliError, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Friction,
    Mass,
    Gravity,
    RodLength,
    /// Largest pivot Fourier coefficient; the pivot shape is kept.
    Amplitude,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s.trim() {
            "friction" | "gamma" => Axis::Friction,
            "mass" => Axis::Mass,
            "gravity" => Axis::Gravity,
            "rod_length" => Axis::RodLength,
            "amplitude" => Axis::Amplitude,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep axis {other:?}; expected friction, mass, gravity, rod_length or amplitude"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

fn number(s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("sweep value {s:?} is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("sweep value {s:?} is not finite")))
    }
}

impl FromStr for AxisSpec {
    type Err = CliError;

    /// `name=start:stop:count` (inclusive, evenly spaced) or `name=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (name, rest) = s.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("sweep axis {s:?} must look like name=values"))
        })?;
        let axis: Axis = name.parse()?;
        let rest = rest.trim();
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            let [a, b, n] = parts.as_slice() else {
                return Err(CliError::Usage(format!(
                    "range {rest:?} must be start:stop:count"
                )));
            };
            let (a, b) = (number(a)?, number(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("range count {n:?} is not an integer")))?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => {
                    let m = (n - 1) as f64;
                    // round to 15 digits so 0.1:1.0:10 yields 0.3, not 0.30000000000000004
                    (0..n)
                        .map(|i| {
                            let v = (a * (m - i as f64) + b * i as f64) / m;
                            format!("{v:.14e}").parse().unwrap_or(v)
                        })
                        .collect()
                }
            }
        } else if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(number).collect::<Result<_, _>>()?
        };
        if values.is_empty() {
            return Err(CliError::Usage(format!("sweep axis {s:?} has no values")));
        }
        Ok(AxisSpec { axis, values })
    }
}

/// Scenario for one sweep point.
pub fn apply(base: &Scenario, axis: Axis, value: f64) -> Result<Scenario, CliError> {
    let mut s = base.clone();
    let p = &base.params;
    match axis {
        Axis::Friction => s.params = (*p).with_friction(value).map_err(CliError::usage)?,
        Axis::Mass => s.params = (*p).with_mass(value).map_err(CliError::usage)?,
        Axis::Gravity => s.params = (*p).with_gravity(value).map_err(CliError::usage)?,
        Axis::RodLength => s.params = (*p).with_rod_length(value).map_err(CliError::usage)?,
        Axis::Amplitude => {
            let top = base.pivot.max_abs_coefficient();
            s.pivot = if value == 0.0 {
                PivotMotion::stationary(base.pivot.period()).map_err(CliError::usage)?
            } else if top == 0.0 {
                return Err(CliError::Usage(
                    "amplitude sweep needs a pivot with a nonzero coefficient".into(),
                ));
            } else {
                base.pivot.scaled(value / top).map_err(CliError::usage)?
            };
        }
    }
    s.validate()?;
    Ok(s)
}

/// One sweep point, as stored in `points/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub axis: Axis,
    pub value: f64,
    pub c_star: f64,
    pub converged: bool,
    pub falling_free: bool,
    pub block_certified: bool,
    pub residual: Option<f64>,
    pub min_z: Option<f64>,
    pub fixed_point: Option<ChartPoint>,
    pub note: Option<String>,
    pub params: PendulumParams,
    pub pivot: PivotMotion,
    pub step: StepConfig,
}

impl SweepRecord {
    fn matches(&self, index: usize, axis: Axis, value: f64, s: &Scenario) -> bool {
        self.index == index
            && self.axis == axis
            && self.value.to_bits() == value.to_bits()
            && self.params == s.params
            && self.pivot == s.pivot
            && self.step == s.step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub c_star: f64,
    pub converged: bool,
    pub falling_free: bool,
    pub residual: Option<f64>,
    pub min_z: Option<f64>,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "value",
    "c_star",
    "converged",
    "falling_free",
    "residual",
    "min_z",
];

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        Self {
            value: r.value,
            c_star: r.c_star,
            converged: r.converged,
            falling_free: r.falling_free,
            residual: r.residual,
            min_z: r.min_z,
        }
    }
}

fn compute(index: usize, axis: Axis, value: f64, s: &Scenario) -> Result<SweepRecord, CliError> {
    let mut rec = SweepRecord {
        index,
        axis,
        value,
        c_star: energy_threshold(&s.params, &s.pivot),
        converged: false,
        falling_free: false,
        block_certified: false,
        residual: None,
        min_z: None,
        fixed_point: None,
        note: None,
        params: s.params,
        pivot: s.pivot.clone(),
        step: s.step,
    };
    match find_orbit::search(s) {
        Ok(Search::Found(_, report)) => {
            rec.converged = report.converged;
            rec.falling_free = report.passed();
            rec.block_certified = report.block_certified;
            rec.residual = Some(report.residual);
            rec.min_z = Some(report.falling_free.map_or(report.min_z, |f| f.min_z));
            rec.fixed_point = Some(report.fixed_point);
        }
        Ok(Search::Exhausted(msg)) => rec.note = Some(format!("search exhausted: {msg}")),
        Err(CliError::Core(e)) => rec.note = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(rec)
}

fn point_path(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join(format!("point_{index:04}.json"))
}

pub fn run_sweep(
    base: &Scenario,
    spec: &AxisSpec,
    out: &Path,
) -> Result<Vec<SweepRecord>, CliError> {
    // reject bad values before any work is done
    let scenarios: Vec<Scenario> = spec
        .values
        .iter()
        .map(|&v| apply(base, spec.axis, v))
        .collect::<Result<_, _>>()?;
    let dir = out.join(output::SWEEP_POINTS_DIR);
    output::ensure_dir(&dir)?;
    let records: Vec<SweepRecord> = scenarios
        .par_iter()
        .zip(spec.values.par_iter())
        .enumerate()
        .map(|(i, (s, &v))| {
            let path = point_path(&dir, i);
            if let Ok(old) = output::read_json::<SweepRecord>(&path) {
                if old.matches(i, spec.axis, v, s) {
                    return Ok(old);
                }
            }
            let rec = compute(i, spec.axis, v, s)?;
            output::write_json(&path, &rec)?;
            Ok(rec)
        })
        .collect::<Result<_, CliError>>()?;
    output::write_csv(
        &out.join(output::SWEEP_CSV),
        &SWEEP_HEADER,
        records.iter().map(SweepRow::from),
    )?;
    Ok(records)
}

pub fn run(args: &SweepArgs) -> Result<Outcome, CliError> {
    let spec: AxisSpec = args.axis.parse()?;
    let base = args.common.scenario()?;
    output::ensure_dir(&args.common.out)?;
    let records = run_sweep(&base, &spec, &args.common.out)?;
    for r in &records {
        println!(
            "sweep: {:?} = {} c* = {:.6e} converged {} falling-free {}",
            r.axis, r.value, r.c_star, r.converged, r.falling_free
        );
    }
    Ok(Outcome::from_pass(
        records.iter().all(|r| r.converged && r.falling_free),
    ))
}
