//! Fixed-step RK4 with projection back onto the constraint manifold.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{kinetic_energy, vector_field, PendulumParams, PivotMotion, State};
use crate::error::{Error, Result};

/// Steps per forcing period used when no step size is configured.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;

/// Coarsest admissible resolution: at least this many steps per period.
pub const MIN_STEPS_PER_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    #[default]
    Rk4Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub dt: f64,
    #[serde(default = "default_projection_every")]
    pub projection_every: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

fn default_projection_every() -> usize {
    1
}

impl StepConfig {
    pub fn new(dt: f64, projection_every: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                reason: "must be finite and strictly positive",
            });
        }
        if projection_every == 0 {
            return Err(Error::Config("projection_every must be at least 1".into()));
        }
        Ok(Self {
            dt,
            projection_every,
            scheme: Scheme::Rk4Projected,
        })
    }

    /// `dt = T / 2048`, projection after every step.
    pub fn default_for(pivot: &PivotMotion) -> Self {
        Self {
            dt: pivot.period() / DEFAULT_STEPS_PER_PERIOD as f64,
            projection_every: 1,
            scheme: Scheme::Rk4Projected,
        }
    }

    /// Rejects step sizes coarser than `T / 64`.
    pub fn validate_for(&self, pivot: &PivotMotion) -> Result<()> {
        Self::new(self.dt, self.projection_every)?;
        let max_dt = pivot.period() / MIN_STEPS_PER_PERIOD as f64;
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} exceeds T/{MIN_STEPS_PER_PERIOD} = {max_dt}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn with_dt(self, dt: f64) -> Result<Self> {
        Self::new(dt, self.projection_every)
    }
}

/// Uniformly sampled solution together with drift and range diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<State>,
    pub max_constraint_drift: f64,
    pub min_z: f64,
    pub max_energy: f64,
}

impl Trajectory {
    fn empty(dt: f64) -> Self {
        Self {
            dt,
            samples: Vec::new(),
            max_constraint_drift: 0.0,
            min_z: f64::INFINITY,
            max_energy: 0.0,
        }
    }

    fn push(&mut self, state: State, params: &PendulumParams) {
        let (radial, tangency) = state.constraint_residuals(params.rod_length());
        self.max_constraint_drift = self.max_constraint_drift.max(radial).max(tangency);
        self.min_z = self.min_z.min(state.z());
        self.max_energy = self.max_energy.max(kinetic_energy(&state, params));
        self.samples.push(state);
    }

    pub fn first(&self) -> Option<&State> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&State> {
        self.samples.last()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Rescales the position onto the sphere and removes the radial velocity.
pub fn project(state: &State, rod_length: f64) -> Result<State> {
    let norm = state.position.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateState(
            "cannot project a zero or non-finite position",
        ));
    }
    let n = state.position / norm;
    let velocity = state.velocity - n * n.dot(&state.velocity);
    Ok(State::new(state.time, n * rod_length, velocity))
}

/// One classical Runge-Kutta step of size `h`, without projection.
pub fn rk4_step(
    t: f64,
    state: &State,
    h: f64,
    params: &PendulumParams,
    pivot: &PivotMotion,
) -> State {
    let at = |dt: f64, dp: Vector3<f64>, dv: Vector3<f64>| {
        State::new(t + dt, state.position + dp, state.velocity + dv)
    };
    let k1 = vector_field(t, state, params, pivot);
    let s2 = at(0.5 * h, k1.dposition * (0.5 * h), k1.dvelocity * (0.5 * h));
    let k2 = vector_field(t + 0.5 * h, &s2, params, pivot);
    let s3 = at(0.5 * h, k2.dposition * (0.5 * h), k2.dvelocity * (0.5 * h));
    let k3 = vector_field(t + 0.5 * h, &s3, params, pivot);
    let s4 = at(h, k3.dposition * h, k3.dvelocity * h);
    let k4 = vector_field(t + h, &s4, params, pivot);
    let w = h / 6.0;
    State::new(
        t + h,
        state.position + (k1.dposition + (k2.dposition + k3.dposition) * 2.0 + k4.dposition) * w,
        state.velocity + (k1.dvelocity + (k2.dvelocity + k3.dvelocity) * 2.0 + k4.dvelocity) * w,
    )
}

/// One RK4 step of size `config.dt` from time `t`, followed by projection.
pub fn step(
    t: f64,
    state: &State,
    config: &StepConfig,
    params: &PendulumParams,
    pivot: &PivotMotion,
) -> Result<State> {
    let next = rk4_step(t, state, config.dt, params, pivot);
    if !next.is_finite() {
        return Err(Error::Divergence {
            time: t,
            partial: None,
        });
    }
    project(&next, params.rod_length())
}

/// Number of steps covering `span`: all of size `dt` except a shortened
/// last one. Spans that are an integer multiple of `dt` up to roundoff get
/// no sliver step.
fn step_count(span: f64, dt: f64) -> usize {
    let ratio = span / dt;
    ((ratio - 1e-9).ceil() as usize).max(1)
}

/// Advances `state0` from `t0` to `t1`, calling `visit` on the initial
/// state and every subsequent sample. Returns the final state.
pub(crate) fn propagate<V>(
    state0: &State,
    t0: f64,
    t1: f64,
    config: &StepConfig,
    params: &PendulumParams,
    pivot: &PivotMotion,
    mut visit: V,
) -> Result<State>
where
    V: FnMut(&State) -> Result<()>,
{
    let mut state = State::new(t0, state0.position, state0.velocity);
    visit(&state)?;
    if t1 == t0 {
        return Ok(state);
    }
    let n = step_count(t1 - t0, config.dt);
    let ell = params.rod_length();
    for i in 0..n {
        let t = t0 + i as f64 * config.dt;
        let (h, t_next) = if i + 1 == n {
            (t1 - t, t1)
        } else {
            (config.dt, t0 + (i + 1) as f64 * config.dt)
        };
        let mut next = rk4_step(t, &state, h, params, pivot);
        if !next.is_finite() {
            return Err(Error::Divergence {
                time: t,
                partial: None,
            });
        }
        next.time = t_next;
        if (i + 1) % config.projection_every == 0 || i + 1 == n {
            next = project(&next, ell)?;
        }
        state = next;
        visit(&state)?;
    }
    Ok(state)
}

/// Integrates over `[t0, t1]` and records every sample.
pub fn integrate(
    state0: &State,
    t_span: [f64; 2],
    config: &StepConfig,
    params: &PendulumParams,
    pivot: &PivotMotion,
) -> Result<Trajectory> {
    let [t0, t1] = t_span;
    if !(t1 >= t0) {
        return Err(Error::Contract(format!(
            "t_span must satisfy t1 >= t0, got [{t0}, {t1}]"
        )));
    }
    let mut traj = Trajectory::empty(config.dt);
    let outcome = propagate(state0, t0, t1, config, params, pivot, |s| {
        traj.push(*s, params);
        Ok(())
    });
    match outcome {
        Ok(_) => Ok(traj),
        Err(Error::Divergence { time, .. }) => Err(Error::Divergence {
            time,
            partial: Some(Box::new(traj)),
        }),
        Err(e) => Err(e),
    }
}

/// Final state after integrating over `[t0, t1]`, without storing samples.
pub fn flow(
    state0: &State,
    t_span: [f64; 2],
    config: &StepConfig,
    params: &PendulumParams,
    pivot: &PivotMotion,
) -> Result<State> {
    propagate(state0, t_span[0], t_span[1], config, params, pivot, |_| {
        Ok(())
    })
}
