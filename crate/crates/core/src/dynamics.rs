//! Physical model of the inverted spherical pendulum whose pivot moves
//! periodically in the horizontal plane.
//!
//! Everything is written in the frame attached to the pivot (axes parallel
//! to a fixed frame, `z` pointing against gravity). The mass sits on the
//! sphere of radius `rod_length` around the pivot; the rod force acts along
//! the radius vector and is a signed multiplier, so the rod may push or pull.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on the sphere and tangency constraints.
pub const DEFAULT_TOL_CONSTRAINT: f64 = 1e-10;

/// Physical constants of the pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct PendulumParams {
    mass: f64,
    gravity: f64,
    friction: f64,
    rod_length: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    mass: f64,
    gravity: f64,
    friction: f64,
    #[serde(default = "default_rod_length")]
    rod_length: f64,
}

fn default_rod_length() -> f64 {
    1.0
}

impl TryFrom<RawParams> for PendulumParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Self::new(raw.mass, raw.gravity, raw.friction, raw.rod_length)
    }
}

impl From<PendulumParams> for RawParams {
    fn from(p: PendulumParams) -> Self {
        RawParams {
            mass: p.mass,
            gravity: p.gravity,
            friction: p.friction,
            rod_length: p.rod_length,
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        });
    }
    if value <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be strictly positive",
        });
    }
    Ok(value)
}

impl PendulumParams {
    pub fn new(mass: f64, gravity: f64, friction: f64, rod_length: f64) -> Result<Self> {
        Ok(Self {
            mass: require_positive("mass", mass)?,
            gravity: require_positive("gravity", gravity)?,
            friction: require_positive("friction", friction)?,
            rod_length: require_positive("rod_length", rod_length)?,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    pub fn rod_length(&self) -> f64 {
        self.rod_length
    }

    pub fn with_mass(self, mass: f64) -> Result<Self> {
        Self::new(mass, self.gravity, self.friction, self.rod_length)
    }

    pub fn with_gravity(self, gravity: f64) -> Result<Self> {
        Self::new(self.mass, gravity, self.friction, self.rod_length)
    }

    pub fn with_friction(self, friction: f64) -> Result<Self> {
        Self::new(self.mass, self.gravity, friction, self.rod_length)
    }

    pub fn with_rod_length(self, rod_length: f64) -> Result<Self> {
        Self::new(self.mass, self.gravity, self.friction, rod_length)
    }
}

/// Horizontal pivot displacement `(xi(t), eta(t), 0)` given as truncated
/// Fourier series.
///
/// Entry `k` of each coefficient list multiplies harmonic `k + 1`, i.e.
/// `cos(2π(k+1)t/T)` or `sin(2π(k+1)t/T)`. There is no constant term: a
/// constant offset of the pivot does not enter the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPivot", into = "RawPivot")]
pub struct PivotMotion {
    period: f64,
    xi_cos: Vec<f64>,
    xi_sin: Vec<f64>,
    eta_cos: Vec<f64>,
    eta_sin: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPivot {
    #[serde(default = "default_period")]
    period: f64,
    #[serde(default)]
    xi_cos: Vec<f64>,
    #[serde(default)]
    xi_sin: Vec<f64>,
    #[serde(default)]
    eta_cos: Vec<f64>,
    #[serde(default)]
    eta_sin: Vec<f64>,
}

fn default_period() -> f64 {
    TAU
}

impl TryFrom<RawPivot> for PivotMotion {
    type Error = Error;

    fn try_from(raw: RawPivot) -> Result<Self> {
        Self::new(raw.period, raw.xi_cos, raw.xi_sin, raw.eta_cos, raw.eta_sin)
    }
}

impl From<PivotMotion> for RawPivot {
    fn from(p: PivotMotion) -> Self {
        RawPivot {
            period: p.period,
            xi_cos: p.xi_cos,
            xi_sin: p.xi_sin,
            eta_cos: p.eta_cos,
            eta_sin: p.eta_sin,
        }
    }
}

/// Value and first two derivatives of `Σ a_k cos(ω_k t) + b_k sin(ω_k t)`.
fn series(cos: &[f64], sin: &[f64], omega: f64, t: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    let n = cos.len().max(sin.len());
    for k in 0..n {
        let w = omega * (k + 1) as f64;
        let a = cos.get(k).copied().unwrap_or(0.0);
        let b = sin.get(k).copied().unwrap_or(0.0);
        let (s, c) = (w * t).sin_cos();
        out[0] += a * c + b * s;
        out[1] += w * (b * c - a * s);
        out[2] -= w * w * (a * c + b * s);
    }
    out
}

impl PivotMotion {
    pub fn new(
        period: f64,
        xi_cos: Vec<f64>,
        xi_sin: Vec<f64>,
        eta_cos: Vec<f64>,
        eta_sin: Vec<f64>,
    ) -> Result<Self> {
        require_positive("period", period)?;
        for (name, list) in [
            ("xi_cos", &xi_cos),
            ("xi_sin", &xi_sin),
            ("eta_cos", &eta_cos),
            ("eta_sin", &eta_sin),
        ] {
            if let Some(&bad) = list.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: bad,
                    reason: "coefficients must be finite",
                });
            }
        }
        Ok(Self {
            period,
            xi_cos,
            xi_sin,
            eta_cos,
            eta_sin,
        })
    }

    /// Pivot at rest.
    pub fn stationary(period: f64) -> Result<Self> {
        Self::new(period, vec![], vec![], vec![], vec![])
    }

    /// Circular motion `xi = a cos(2πt/T)`, `eta = a sin(2πt/T)`.
    pub fn circular(amplitude: f64, period: f64) -> Result<Self> {
        Self::new(period, vec![amplitude], vec![], vec![], vec![amplitude])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn xi_cos(&self) -> &[f64] {
        &self.xi_cos
    }

    pub fn xi_sin(&self) -> &[f64] {
        &self.xi_sin
    }

    pub fn eta_cos(&self) -> &[f64] {
        &self.eta_cos
    }

    pub fn eta_sin(&self) -> &[f64] {
        &self.eta_sin
    }

    /// Angular frequency of the fundamental harmonic.
    pub fn omega(&self) -> f64 {
        TAU / self.period
    }

    pub fn is_stationary(&self) -> bool {
        self.coefficients().all(|c| c == 0.0)
    }

    fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.xi_cos
            .iter()
            .chain(&self.xi_sin)
            .chain(&self.eta_cos)
            .chain(&self.eta_sin)
            .copied()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `[xi, xi', xi'']` at time `t`.
    pub fn xi(&self, t: f64) -> [f64; 3] {
        series(&self.xi_cos, &self.xi_sin, self.omega(), t)
    }

    /// `[eta, eta', eta'']` at time `t`.
    pub fn eta(&self, t: f64) -> [f64; 3] {
        series(&self.eta_cos, &self.eta_sin, self.omega(), t)
    }

    pub fn displacement(&self, t: f64) -> Vector3<f64> {
        Vector3::new(self.xi(t)[0], self.eta(t)[0], 0.0)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        Vector3::new(self.xi(t)[1], self.eta(t)[1], 0.0)
    }

    /// Pivot acceleration; the vertical component is exactly zero.
    pub fn accel(&self, t: f64) -> Vector3<f64> {
        Vector3::new(self.xi(t)[2], self.eta(t)[2], 0.0)
    }

    /// The motion `t -> rho(t + shift)`.
    pub fn phase_shifted(&self, shift: f64) -> Self {
        let omega = self.omega();
        let rotate = |cos: &[f64], sin: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let n = cos.len().max(sin.len());
            (0..n)
                .map(|k| {
                    let a = cos.get(k).copied().unwrap_or(0.0);
                    let b = sin.get(k).copied().unwrap_or(0.0);
                    let (s, c) = (omega * (k + 1) as f64 * shift).sin_cos();
                    (a * c + b * s, b * c - a * s)
                })
                .unzip()
        };
        let (xi_cos, xi_sin) = rotate(&self.xi_cos, &self.xi_sin);
        let (eta_cos, eta_sin) = rotate(&self.eta_cos, &self.eta_sin);
        Self {
            period: self.period,
            xi_cos,
            xi_sin,
            eta_cos,
            eta_sin,
        }
    }

    /// All coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let s = |v: &[f64]| v.iter().map(|c| c * factor).collect::<Vec<_>>();
        Self::new(
            self.period,
            s(&self.xi_cos),
            s(&self.xi_sin),
            s(&self.eta_cos),
            s(&self.eta_sin),
        )
    }
}

/// Point of the constrained phase space, expressed in the pivot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl State {
    pub fn new(time: f64, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            time,
            position,
            velocity,
        }
    }

    /// Mass at the top of the sphere, at rest.
    pub fn apex(time: f64, rod_length: f64) -> Self {
        Self::new(time, Vector3::new(0.0, 0.0, rod_length), Vector3::zeros())
    }

    pub fn z(&self) -> f64 {
        self.position.z
    }

    pub fn zdot(&self) -> f64 {
        self.velocity.z
    }

    /// `(| |r| - l |, |r . v|)`.
    pub fn constraint_residuals(&self, rod_length: f64) -> (f64, f64) {
        (
            (self.position.norm() - rod_length).abs(),
            self.position.dot(&self.velocity).abs(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
    }

    /// Checks the sphere and tangency constraints at tolerance `tol`.
    pub fn check(&self, rod_length: f64, tol: f64) -> Result<()> {
        let (radial, tangency) = self.constraint_residuals(rod_length);
        if !(radial <= tol) {
            return Err(Error::Contract(format!(
                "state off the sphere: | |r| - l | = {radial:e} > {tol:e}"
            )));
        }
        let scale = tol * rod_length * self.velocity.norm().max(1.0);
        if !(tangency <= scale) {
            return Err(Error::Contract(format!(
                "velocity not tangent: |r . v| = {tangency:e} > {scale:e}"
            )));
        }
        Ok(())
    }
}

/// Right-hand side of the first-order system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub dposition: Vector3<f64>,
    pub dvelocity: Vector3<f64>,
}

fn multiplier_at(t: f64, state: &State, params: &PendulumParams, pivot: &PivotMotion) -> f64 {
    let m = params.mass;
    let r = &state.position;
    let acc = pivot.accel(t);
    m * (params.gravity * r.z + acc.dot(r) - state.velocity.norm_squared()) / params.rod_length
}

/// Signed magnitude of the rod force at `state.time`.
///
/// Obtained by differentiating `r . r = l^2` twice; positive when the rod
/// pushes the mass outward.
pub fn constraint_multiplier(state: &State, params: &PendulumParams, pivot: &PivotMotion) -> f64 {
    multiplier_at(state.time, state, params, pivot)
}

pub fn vector_field(
    t: f64,
    state: &State,
    params: &PendulumParams,
    pivot: &PivotMotion,
) -> Derivative {
    let m = params.mass;
    let lambda = multiplier_at(t, state, params, pivot);
    let r = &state.position;
    let v = &state.velocity;
    let dvelocity = r * (lambda / (m * params.rod_length))
        - Vector3::new(0.0, 0.0, params.gravity)
        - pivot.accel(t)
        - v * (params.friction / m);
    Derivative {
        dposition: *v,
        dvelocity,
    }
}

/// `F = (m/2) |v|^2`, kinetic energy in the pivot frame.
pub fn kinetic_energy(state: &State, params: &PendulumParams) -> f64 {
    0.5 * params.mass * state.velocity.norm_squared()
}

/// `(m/2)|v|^2 + m g z`. Non-increasing for a stationary pivot.
pub fn mechanical_energy(state: &State, params: &PendulumParams) -> f64 {
    kinetic_energy(state, params) + params.mass * params.gravity * state.position.z
}

/// Time derivative of the kinetic energy along the flow.
pub fn energy_rate(t: f64, state: &State, params: &PendulumParams, pivot: &PivotMotion) -> f64 {
    let d = vector_field(t, state, params, pivot);
    params.mass * d.dvelocity.dot(&state.velocity)
}

/// `z''` on the horizontal face `z = 0, z' = 0`, where it equals `-g`.
///
/// Fails with a contract error unless `|z| <= tol` and `|z'| <= tol`.
pub fn vertical_acceleration_at_horizontal(
    t: f64,
    state: &State,
    params: &PendulumParams,
    pivot: &PivotMotion,
    tol: f64,
) -> Result<f64> {
    if state.z().abs() > tol || state.zdot().abs() > tol {
        return Err(Error::Contract(format!(
            "horizontal-face value requested away from the face (z = {:e}, z' = {:e}, tol = {tol:e})",
            state.z(),
            state.zdot()
        )));
    }
    Ok(vector_field(t, state, params, pivot).dvelocity.z)
}
