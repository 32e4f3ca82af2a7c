use pendulum_core::dynamics::mechanical_energy;
use pendulum_core::{integrate, kinetic_energy, Error};
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::output::{self, ErrorReport};
use crate::{CliError, Outcome};

pub const DEFAULT_PERIODS: f64 = 10.0;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub samples: usize,
    pub min_z: f64,
    pub max_constraint_drift: f64,
    pub max_kinetic_energy: f64,
    pub final_kinetic_energy: f64,
    pub final_mechanical_energy: f64,
}

pub fn run(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let scenario = args.common.scenario()?;
    let periods = args
        .periods
        .or(scenario.simulate.periods)
        .unwrap_or(DEFAULT_PERIODS);
    if !(periods.is_finite() && periods >= 0.0) {
        return Err(CliError::Usage(format!(
            "--periods must be non-negative, got {periods}"
        )));
    }
    let start = scenario.initial_state()?;
    let (params, pivot) = (&scenario.params, &scenario.pivot);
    let t1 = start.time + periods * pivot.period();
    let out = &args.common.out;
    output::ensure_dir(out)?;

    match integrate(&start, [start.time, t1], &scenario.step, params, pivot) {
        Ok(traj) => {
            output::write_trajectory(&out.join(output::TRAJECTORY_CSV), &traj.samples, params)?;
            let last = traj.last().expect("trajectory holds its start");
            let summary = SimulationSummary {
                t0: start.time,
                t1,
                dt: traj.dt,
                samples: traj.len(),
                min_z: traj.min_z,
                max_constraint_drift: traj.max_constraint_drift,
                max_kinetic_energy: traj.max_energy,
                final_kinetic_energy: kinetic_energy(last, params),
                final_mechanical_energy: mechanical_energy(last, params),
            };
            output::write_json(&out.join(output::SUMMARY_JSON), &summary)?;
            println!(
                "simulate: {} samples, min z {:.6e}, constraint drift {:.3e}",
                summary.samples, summary.min_z, summary.max_constraint_drift
            );
            Ok(Outcome::Pass)
        }
        Err(Error::Divergence { time, partial }) => {
            let samples = partial.as_ref().map_or(&[][..], |p| &p.samples[..]);
            output::write_trajectory(&out.join(output::TRAJECTORY_CSV), samples, params)?;
            let report = ErrorReport {
                kind: "divergence".into(),
                message: format!("integration diverged at t = {time}"),
                time: Some(time),
                partial_samples: Some(samples.len()),
            };
            output::write_json(&out.join(output::ERROR_JSON), &report)?;
            eprintln!("simulate: {}", report.message);
            Ok(Outcome::Fail)
        }
        Err(e) => Err(e.into()),
    }
}
