//! Scenario files.
//!
//! One TOML document per scenario. Only `[params]` is required, and
//! within it `mass`, `gravity` and `friction`. Defaults:
//!
//! | key                    | default              |
//! |------------------------|----------------------|
//! | `params.rod_length`    | 1                    |
//! | `pivot.period`         | 2π                   |
//! | pivot coefficients     | none (pivot at rest) |
//! | `step.dt`              | period / 2048        |
//! | `step.projection_every`| 1                    |
//! | `certify.c`            | 2 c*                 |
//! | `sampling.*`           | 64 × 512 × 16 shell grid, see `SamplingConfig` |
//! | `orbit.*`              | 5 × 5 start grid, see `OrbitSearchConfig` |
//! | `simulate.periods`     | 10                   |
//! | `simulate` start       | apex at rest         |
//!
//! Pivot coefficient arrays are indexed by harmonic: entry `k` multiplies
//! `cos` or `sin` of `2π(k+1)t/T`. Unknown keys are rejected.

use std::path::Path;

use pendulum_core::{
    chart_embed, ChartPoint, OrbitSearchConfig, PendulumParams, PivotMotion, SamplingConfig, State,
    StepConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub dt: Option<f64>,
    pub projection_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub periods: Option<f64>,
    /// Start as chart coordinates `[x, y, vx, vy]`.
    pub chart: Option<[f64; 4]>,
    pub position: Option<[f64; 3]>,
    pub velocity: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    params: PendulumParams,
    #[serde(default = "stationary")]
    pivot: PivotMotion,
    #[serde(default)]
    step: StepSection,
    #[serde(default)]
    certify: CertifySection,
    #[serde(default)]
    sampling: SamplingConfig,
    #[serde(default)]
    orbit: OrbitSearchConfig,
    #[serde(default)]
    simulate: SimulateSection,
}

fn stationary() -> PivotMotion {
    PivotMotion::stationary(std::f64::consts::TAU).expect("2π is a valid period")
}

/// A validated scenario with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: PendulumParams,
    pub pivot: PivotMotion,
    pub step: StepConfig,
    pub c: Option<f64>,
    pub sampling: SamplingConfig,
    pub orbit: OrbitSearchConfig,
    pub simulate: SimulateSection,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut step = StepConfig::default_for(&file.pivot);
        if let Some(dt) = file.step.dt {
            step = step.with_dt(dt).map_err(CliError::usage)?;
        }
        if let Some(every) = file.step.projection_every {
            step = StepConfig::new(step.dt, every).map_err(CliError::usage)?;
        }
        let scenario = Scenario {
            params: file.params,
            pivot: file.pivot,
            step,
            c: file.certify.c,
            sampling: file.sampling,
            orbit: file.orbit,
            simulate: file.simulate,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.step
            .validate_for(&self.pivot)
            .map_err(CliError::usage)?;
        self.sampling.validate().map_err(CliError::usage)?;
        self.orbit.validate().map_err(CliError::usage)?;
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(CliError::Usage(format!(
                    "certify.c must be positive, got {c}"
                )));
            }
        }
        if let Some(p) = self.simulate.periods {
            if !(p.is_finite() && p >= 0.0) {
                return Err(CliError::Usage(format!(
                    "simulate.periods must be non-negative, got {p}"
                )));
            }
        }
        self.initial_state()?;
        Ok(())
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self, CliError> {
        self.step = self.step.with_dt(dt).map_err(CliError::usage)?;
        self.step
            .validate_for(&self.pivot)
            .map_err(CliError::usage)?;
        Ok(self)
    }

    /// Start for `simulate`: chart point, explicit state, or apex at rest.
    pub fn initial_state(&self) -> Result<State, CliError> {
        let ell = self.params.rod_length();
        let sim = &self.simulate;
        match (sim.chart, sim.position, sim.velocity) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(CliError::Usage(
                "simulate: give either `chart` or `position`/`velocity`, not both".into(),
            )),
            (Some([x, y, vx, vy]), None, None) => {
                chart_embed(&ChartPoint::new(x, y, vx, vy), ell, 0.0).map_err(CliError::usage)
            }
            (None, Some(p), v) => {
                let s = State::new(0.0, p.into(), v.unwrap_or([0.0; 3]).into());
                s.check(ell, pendulum_core::dynamics::DEFAULT_TOL_CONSTRAINT)
                    .map_err(CliError::usage)?;
                Ok(s)
            }
            (None, None, Some(_)) => Err(CliError::Usage(
                "simulate.velocity needs simulate.position".into(),
            )),
            (None, None, None) => Ok(State::apex(0.0, ell)),
        }
    }
}
