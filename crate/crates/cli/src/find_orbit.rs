use pendulum_core::orbit::{FallingFree, SearchDiagnostics};
use pendulum_core::{
    certify_block, find_periodic_orbit, verify_falling_free, ChartPoint, Error, PendulumParams,
    PeriodicOrbit, PivotMotion, StepConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::CommonArgs;
use crate::config::Scenario;
use crate::output::{self, ErrorReport};
use crate::{CliError, Outcome};

/// Contents of `orbit.json`. The trajectory itself goes to the CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub converged: bool,
    /// Recomputed at a quarter of the step; absent when the search did
    /// not converge.
    pub falling_free: Option<FallingFree>,
    /// Verdict of the sampled block certificate for the same scenario.
    pub block_certified: bool,
    pub fixed_point: ChartPoint,
    pub t0: f64,
    pub residual: f64,
    pub min_z: f64,
    pub return_map_spectrum: Vec<[f64; 2]>,
    pub params: PendulumParams,
    pub pivot: PivotMotion,
    pub step: StepConfig,
    pub diagnostics: SearchDiagnostics,
}

impl OrbitReport {
    pub fn passed(&self) -> bool {
        self.converged && self.falling_free.is_some_and(|f| f.verdict)
    }
}

pub enum Search {
    Found(Box<PeriodicOrbit>, Box<OrbitReport>),
    Exhausted(String),
}

/// Certificate, orbit search and falling-free check for one scenario.
pub fn search(s: &Scenario) -> Result<Search, CliError> {
    let certified = certify_block(&s.params, &s.pivot, s.c, &s.sampling)?.verdict;
    if !certified {
        eprintln!("warning: block certificate failed; the orbit search runs without its guarantee");
    }
    let orbit = match find_periodic_orbit(&s.params, &s.pivot, &s.step, &s.orbit) {
        Ok(o) => o,
        Err(Error::SearchExhausted(msg)) => return Ok(Search::Exhausted(msg)),
        Err(e) => return Err(e.into()),
    };
    let falling_free = if orbit.converged {
        Some(verify_falling_free(&orbit)?)
    } else {
        None
    };
    let report = OrbitReport {
        converged: orbit.converged,
        falling_free,
        block_certified: certified,
        fixed_point: orbit.fixed_point,
        t0: orbit.t0,
        residual: orbit.residual,
        min_z: orbit.min_z,
        return_map_spectrum: orbit.return_map_spectrum.clone(),
        params: orbit.params,
        pivot: orbit.pivot.clone(),
        step: orbit.step,
        diagnostics: orbit.diagnostics.clone(),
    };
    Ok(Search::Found(Box::new(orbit), Box::new(report)))
}

pub fn run(args: &CommonArgs) -> Result<Outcome, CliError> {
    let scenario = args.scenario()?;
    let result = search(&scenario)?;
    output::ensure_dir(&args.out)?;
    match result {
        Search::Found(orbit, report) => {
            output::write_trajectory(
                &args.out.join(output::ORBIT_CSV),
                &orbit.trajectory.samples,
                &orbit.params,
            )?;
            output::write_json(&args.out.join(output::ORBIT_JSON), &report)?;
            let u = report.fixed_point.0;
            println!(
                "find-orbit: {} (residual {:.3e}, min z {:.6}, fixed point [{:.12e}, {:.12e}, {:.12e}, {:.12e}])",
                if report.passed() { "PASS" } else { "FAIL" },
                report.residual,
                report.min_z,
                u[0],
                u[1],
                u[2],
                u[3]
            );
            Ok(Outcome::from_pass(report.passed()))
        }
        Search::Exhausted(msg) => {
            let report = ErrorReport {
                kind: "search_exhausted".into(),
                message: msg,
                time: None,
                partial_samples: None,
            };
            output::write_json(&args.out.join(output::ERROR_JSON), &report)?;
            eprintln!("find-orbit: search exhausted: {}", report.message);
            Ok(Outcome::Fail)
        }
    }
}
