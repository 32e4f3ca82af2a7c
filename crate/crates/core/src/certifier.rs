//! Sampling certificate for the periodic block `W = {F <= c, z >= 0}`.
//!
//! The block's boundary has two faces: the energy shell `F = c` and the
//! horizontal face `z = 0`. For `c` above the threshold `c*` the flow points
//! into the block across the whole shell, so trajectories leave only through
//! the horizontal face, and there exactly where `z' <= 0`. The certificate
//! evaluates these claims on dense grids with an explicit margin and then
//! reports the fixed-point index of the time-period map that they imply.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    energy_rate, kinetic_energy, vertical_acceleration_at_horizontal, PendulumParams, PivotMotion,
    State,
};
use crate::error::{Error, Result};

/// Margin required by every strict inequality in the certificate.
pub const DEFAULT_MARGIN_MIN: f64 = 1e-8;

/// Grid size for the sampled maximum of the pivot acceleration.
pub const PIVOT_ACCEL_GRID: usize = 4096;

const MAX_RECORDED_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub time_samples: usize,
    pub position_samples: usize,
    pub direction_samples: usize,
    /// Points on the equator used for the horizontal face.
    pub face_positions: usize,
    /// Nonzero speed levels on the face; the top level lies on the shell.
    pub face_speeds: usize,
    pub face_directions: usize,
    pub boundary_tol: f64,
    pub margin_min: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            time_samples: 64,
            position_samples: 512,
            direction_samples: 16,
            face_positions: 64,
            face_speeds: 8,
            face_directions: 16,
            boundary_tol: 1e-9,
            margin_min: DEFAULT_MARGIN_MIN,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("time_samples", self.time_samples),
            ("position_samples", self.position_samples),
            ("direction_samples", self.direction_samples),
            ("face_positions", self.face_positions),
            ("face_speeds", self.face_speeds),
            ("face_directions", self.face_directions),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!(
                "sampling budget `{name}` must be positive"
            )));
        }
        if !(self.boundary_tol >= 0.0 && self.margin_min >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Candidate block `{F <= c, z >= 0}` over one forcing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub c: f64,
    pub params: PendulumParams,
    pub pivot: PivotMotion,
}

impl BlockSpec {
    /// Any positive level `c`; use [`make_block`] to enforce `c >= c*`.
    pub fn new(c: f64, params: PendulumParams, pivot: PivotMotion) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c,
                reason: "energy level must be finite and positive",
            });
        }
        Ok(Self { c, params, pivot })
    }

    /// Speed on the energy shell, `sqrt(2c/m)`.
    pub fn shell_speed(&self) -> f64 {
        (2.0 * self.c / self.params.mass()).sqrt()
    }
}

/// Block at level `c` (default `2 c*`). Fails if `c < c*`.
pub fn make_block(
    params: &PendulumParams,
    pivot: &PivotMotion,
    c: Option<f64>,
) -> Result<BlockSpec> {
    let c_star = energy_threshold(params, pivot);
    let c = c.unwrap_or(2.0 * c_star);
    if c < c_star {
        return Err(Error::Contract(format!(
            "block level c = {c} is below the threshold c* = {c_star}"
        )));
    }
    BlockSpec::new(c, *params, pivot.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryClass {
    /// `z = 0`, `z' <= 0`: the trajectory leaves the block immediately.
    EssentialExit,
    /// `z = 0`, `z' > 0`: the trajectory enters the interior.
    NonExitHorizontal,
    /// `F = c` with `F' < 0`.
    InflowEnergyShell,
    /// `z = 0` and `F = c` together; exit is decided by the sign of `z'`.
    Corner,
    /// `F = c` with `F' >= 0`. Never present in a valid block.
    OutflowEnergyShell,
}

/// Upper bound on `sup_t |rho''(t)|` from the Fourier coefficients, and the
/// maximum over a uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotAccelBound {
    pub bound: f64,
    pub sampled_max: f64,
}

pub fn sup_pivot_accel(pivot: &PivotMotion) -> PivotAccelBound {
    let omega = pivot.omega();
    let axis_bound = |cos: &[f64], sin: &[f64]| -> f64 {
        (0..cos.len().max(sin.len()))
            .map(|k| {
                let w = omega * (k + 1) as f64;
                let a = cos.get(k).map_or(0.0, |v| v.abs());
                let b = sin.get(k).map_or(0.0, |v| v.abs());
                w * w * (a + b)
            })
            .sum()
    };
    let bx = axis_bound(pivot.xi_cos(), pivot.xi_sin());
    let by = axis_bound(pivot.eta_cos(), pivot.eta_sin());
    let sampled_max = (0..PIVOT_ACCEL_GRID)
        .map(|i| {
            pivot
                .accel(pivot.period() * i as f64 / PIVOT_ACCEL_GRID as f64)
                .norm()
        })
        .fold(0.0, f64::max);
    PivotAccelBound {
        bound: bx.hypot(by),
        sampled_max,
    }
}

/// Upper bound on `F'` over the shell `F = c`:
/// `sqrt(2cm) (g + A) - 2 c gamma / m`.
pub fn shell_rate_bound(c: f64, mass: f64, gravity: f64, friction: f64, accel_bound: f64) -> f64 {
    (2.0 * c * mass).sqrt() * (gravity + accel_bound) - 2.0 * c * friction / mass
}

/// Zero of [`shell_rate_bound`] in `c`: `m^3 (g + A)^2 / (2 gamma^2)`.
pub fn threshold_from(mass: f64, gravity: f64, friction: f64, accel_bound: f64) -> f64 {
    mass.powi(3) * (gravity + accel_bound).powi(2) / (2.0 * friction * friction)
}

/// Energy level `c*` above which the shell bound is strictly negative.
pub fn energy_threshold(params: &PendulumParams, pivot: &PivotMotion) -> f64 {
    threshold_from(
        params.mass(),
        params.gravity(),
        params.friction(),
        sup_pivot_accel(pivot).bound,
    )
}

/// Near-uniform points on the open upper hemisphere of radius `rod_length`.
pub fn fibonacci_hemisphere(n: usize, rod_length: f64) -> Vec<Vector3<f64>> {
    let golden = TAU * (1.0 - 1.0 / ((1.0 + 5f64.sqrt()) / 2.0));
    (0..n)
        .map(|i| {
            let z = (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            Vector3::new(rho * c, rho * s, z) * rod_length
        })
        .collect()
}

/// Orthonormal basis of the tangent plane at `p`.
fn tangent_basis(p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = p.normalize();
    let e1 = if n.x.hypot(n.y) > 1e-8 {
        Vector3::z().cross(&n).normalize()
    } else {
        Vector3::x()
    };
    (e1, n.cross(&e1))
}

/// `(cos, sin)` of `2 pi j / n`, exact at multiples of a quarter turn.
fn unit_circle(j: usize, n: usize) -> (f64, f64) {
    if (4 * j).is_multiple_of(n) {
        match (4 * j / n) % 4 {
            0 => return (1.0, 0.0),
            1 => return (0.0, 1.0),
            2 => return (-1.0, 0.0),
            _ => return (0.0, -1.0),
        }
    }
    let (s, c) = (TAU * j as f64 / n as f64).sin_cos();
    (c, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub class: BoundaryClass,
    /// `F'` for shell and corner samples, `z''` for face samples with
    /// `z' = 0`, `z'` for misclassified face samples.
    pub value: f64,
}

impl SampleRecord {
    fn new(state: &State, class: BoundaryClass, value: f64) -> Self {
        Self {
            t: state.time,
            position: state.position,
            velocity: state.velocity,
            class,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellCheck {
    pub max_fdot: f64,
    pub samples: usize,
    pub worst: Option<SampleRecord>,
}

/// Maximum of `F'` over shell states `F = c`, `z > 0`, on a grid of
/// `n_time` phases, `n_positions` Fibonacci points and `n_directions`
/// tangent directions.
pub fn check_energy_shell(
    block: &BlockSpec,
    n_time: usize,
    n_positions: usize,
    n_directions: usize,
) -> Result<ShellCheck> {
    if n_time == 0 || n_positions == 0 || n_directions == 0 {
        return Err(Error::Config(
            "shell sampling budget must be positive".into(),
        ));
    }
    let ell = block.params.rod_length();
    let speed = block.shell_speed();
    let frames: Vec<_> = fibonacci_hemisphere(n_positions, ell)
        .into_iter()
        .map(|p| (p, tangent_basis(&p)))
        .collect();
    let period = block.pivot.period();
    let per_time: Vec<(f64, Option<SampleRecord>)> = (0..n_time)
        .into_par_iter()
        .map(|i| {
            let t = period * i as f64 / n_time as f64;
            let mut best = (f64::NEG_INFINITY, None);
            for (p, (e1, e2)) in &frames {
                for j in 0..n_directions {
                    let (c, s) = unit_circle(j, n_directions);
                    let state = State::new(t, *p, (e1 * c + e2 * s) * speed);
                    let fdot = energy_rate(t, &state, &block.params, &block.pivot);
                    if fdot > best.0 {
                        let class = if fdot < 0.0 {
                            BoundaryClass::InflowEnergyShell
                        } else {
                            BoundaryClass::OutflowEnergyShell
                        };
                        best = (fdot, Some(SampleRecord::new(&state, class, fdot)));
                    }
                }
            }
            best
        })
        .collect();
    let (max_fdot, worst) =
        per_time.into_iter().fold(
            (f64::NEG_INFINITY, None),
            |acc, x| if x.0 > acc.0 { x } else { acc },
        );
    Ok(ShellCheck {
        max_fdot,
        samples: n_time * n_positions * n_directions,
        worst,
    })
}

/// Classifies a point of the block boundary.
///
/// A point is on the horizontal face when `z <= tol` and on the shell when
/// `|F - c| <= tol c`. Points on both are corners.
pub fn classify_boundary_point(
    t: f64,
    state: &State,
    block: &BlockSpec,
    tol: f64,
) -> Result<BoundaryClass> {
    let on_face = state.z() <= tol;
    let on_shell = (kinetic_energy(state, &block.params) - block.c).abs() <= tol * block.c;
    match (on_face, on_shell) {
        (true, true) => Ok(BoundaryClass::Corner),
        (true, false) if state.zdot() <= 0.0 => Ok(BoundaryClass::EssentialExit),
        (true, false) => Ok(BoundaryClass::NonExitHorizontal),
        (false, true) => {
            if energy_rate(t, state, &block.params, &block.pivot) < 0.0 {
                Ok(BoundaryClass::InflowEnergyShell)
            } else {
                Ok(BoundaryClass::OutflowEnergyShell)
            }
        }
        (false, false) => Err(Error::Contract(format!(
            "point is not on the block boundary (z = {:e}, F - c = {:e})",
            state.z(),
            kinetic_energy(state, &block.params) - block.c
        ))),
    }
}

/// Model spaces whose Euler characteristics enter the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Disk2,
    Circle1,
}

impl Space {
    pub fn euler_characteristic(self) -> i64 {
        match self {
            Space::Disk2 => 1,
            Space::Circle1 => 0,
        }
    }
}

/// Homotopy type of the block section `W_0`.
pub const SECTION_TYPE: Space = Space::Disk2;
/// Homotopy type of the essential exit set of the section.
pub const EXIT_SET_TYPE: Space = Space::Circle1;

/// `Lambda(m) - Lambda(m restricted to the exit set)` with monodromy `m = id`,
/// so each Lefschetz number reduces to an Euler characteristic.
pub fn fixed_point_index(_block: &BlockSpec) -> i64 {
    SECTION_TYPE.euler_characteristic() - EXIT_SET_TYPE.euler_characteristic()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub struct ClassHistogram {
    pub essential_exit: usize,
    pub non_exit_horizontal: usize,
    pub inflow_energy_shell: usize,
    pub corner: usize,
    pub outflow_energy_shell: usize,
}

impl ClassHistogram {
    fn add(&mut self, class: BoundaryClass) {
        match class {
            BoundaryClass::EssentialExit => self.essential_exit += 1,
            BoundaryClass::NonExitHorizontal => self.non_exit_horizontal += 1,
            BoundaryClass::InflowEnergyShell => self.inflow_energy_shell += 1,
            BoundaryClass::Corner => self.corner += 1,
            BoundaryClass::OutflowEnergyShell => self.outflow_energy_shell += 1,
        }
    }

    fn merge(&mut self, other: &ClassHistogram) {
        self.essential_exit += other.essential_exit;
        self.non_exit_horizontal += other.non_exit_horizontal;
        self.inflow_energy_shell += other.inflow_energy_shell;
        self.corner += other.corner;
        self.outflow_energy_shell += other.outflow_energy_shell;
    }

    pub fn total(&self) -> usize {
        self.essential_exit
            + self.non_exit_horizontal
            + self.inflow_energy_shell
            + self.corner
            + self.outflow_energy_shell
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub c_star: f64,
    pub c_used: f64,
    pub margin_min: f64,
    pub pivot_accel_bound: f64,
    pub pivot_accel_sampled_max: f64,
    pub shell_samples: usize,
    pub shell_max_fdot: f64,
    pub face_samples: usize,
    /// Largest `z''` over face samples with `z' = 0`; equals `-g`.
    pub face_min_neg_zddot: f64,
    /// Largest `|z'' + g|` over the same samples.
    pub face_zddot_error: f64,
    pub corner_samples: usize,
    pub corner_max_fdot: f64,
    pub exit_classification_histogram: ClassHistogram,
    /// Face samples whose class disagrees with the sign of `z'`.
    pub misclassified: usize,
    pub index: i64,
    pub monodromy: String,
    pub verdict: bool,
    #[serde(default)]
    pub offending_samples: Vec<SampleRecord>,
}

#[derive(Default)]
struct FaceTally {
    samples: usize,
    max_zddot: f64,
    zddot_error: f64,
    corners: usize,
    corner_max_fdot: f64,
    histogram: ClassHistogram,
    misclassified: usize,
    offending: Vec<SampleRecord>,
}

impl FaceTally {
    fn new() -> Self {
        Self {
            max_zddot: f64::NEG_INFINITY,
            corner_max_fdot: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    fn record(&mut self, sample: SampleRecord) {
        if self.offending.len() < MAX_RECORDED_SAMPLES {
            self.offending.push(sample);
        }
    }

    fn merge(mut self, other: FaceTally) -> Self {
        self.samples += other.samples;
        self.max_zddot = self.max_zddot.max(other.max_zddot);
        self.zddot_error = self.zddot_error.max(other.zddot_error);
        self.corners += other.corners;
        self.corner_max_fdot = self.corner_max_fdot.max(other.corner_max_fdot);
        self.histogram.merge(&other.histogram);
        self.misclassified += other.misclassified;
        for s in other.offending {
            self.record(s);
        }
        self
    }
}

/// Samples the horizontal face at one phase: rest states and velocities
/// `s (cos a e_t + sin a e_z)` at speed levels up to the shell speed.
fn face_at_phase(t: f64, block: &BlockSpec, cfg: &SamplingConfig) -> Result<FaceTally> {
    let ell = block.params.rod_length();
    let g = block.params.gravity();
    let top = block.shell_speed();
    let mut tally = FaceTally::new();
    for i in 0..cfg.face_positions {
        let (c, s) = unit_circle(i, cfg.face_positions);
        let position = Vector3::new(c, s, 0.0) * ell;
        let e_t = Vector3::new(-s, c, 0.0);
        let mut velocities = vec![Vector3::zeros()];
        for k in 1..=cfg.face_speeds {
            let speed = top * k as f64 / cfg.face_speeds as f64;
            for j in 0..cfg.face_directions {
                let (ca, sa) = unit_circle(j, cfg.face_directions);
                velocities.push((e_t * ca + Vector3::z() * sa) * speed);
            }
        }
        for velocity in velocities {
            let state = State::new(t, position, velocity);
            let class = classify_boundary_point(t, &state, block, cfg.boundary_tol)?;
            tally.samples += 1;
            tally.histogram.add(class);
            if state.zdot() == 0.0 {
                let zdd = vertical_acceleration_at_horizontal(
                    t,
                    &state,
                    &block.params,
                    &block.pivot,
                    cfg.boundary_tol,
                )?;
                tally.max_zddot = tally.max_zddot.max(zdd);
                tally.zddot_error = tally.zddot_error.max((zdd + g).abs());
                if !(zdd < -cfg.margin_min) {
                    tally.record(SampleRecord::new(&state, class, zdd));
                }
            }
            if class == BoundaryClass::Corner {
                tally.corners += 1;
                let fdot = energy_rate(t, &state, &block.params, &block.pivot);
                tally.corner_max_fdot = tally.corner_max_fdot.max(fdot);
                if !(fdot < -cfg.margin_min) {
                    tally.record(SampleRecord::new(&state, class, fdot));
                }
            } else {
                let expected = if state.zdot() <= 0.0 {
                    BoundaryClass::EssentialExit
                } else {
                    BoundaryClass::NonExitHorizontal
                };
                if class != expected {
                    tally.misclassified += 1;
                    tally.record(SampleRecord::new(&state, class, state.zdot()));
                }
            }
        }
    }
    Ok(tally)
}

/// Runs every check on the block at level `c` (default `2 c*`).
///
/// Failed checks give `verdict = false` with the offending samples
/// attached; only invalid configuration is reported as an error.
pub fn certify_block(
    params: &PendulumParams,
    pivot: &PivotMotion,
    c: Option<f64>,
    sampling: &SamplingConfig,
) -> Result<CertificateReport> {
    sampling.validate()?;
    let accel = sup_pivot_accel(pivot);
    let c_star = energy_threshold(params, pivot);
    let block = BlockSpec::new(c.unwrap_or(2.0 * c_star), *params, pivot.clone())?;

    let shell = check_energy_shell(
        &block,
        sampling.time_samples,
        sampling.position_samples,
        sampling.direction_samples,
    )?;

    let period = pivot.period();
    let tallies: Vec<FaceTally> = (0..sampling.time_samples)
        .into_par_iter()
        .map(|i| {
            face_at_phase(
                period * i as f64 / sampling.time_samples as f64,
                &block,
                sampling,
            )
        })
        .collect::<Result<_>>()?;
    let face = tallies.into_iter().fold(FaceTally::new(), FaceTally::merge);

    let mut histogram = face.histogram;
    let shell_ok = shell.max_fdot < -sampling.margin_min;
    if shell_ok {
        histogram.inflow_energy_shell += shell.samples;
    } else {
        // only the worst sample is classified individually
        histogram.outflow_energy_shell += 1;
        histogram.inflow_energy_shell += shell.samples - 1;
    }

    let mut offending = Vec::new();
    if let Some(worst) = shell.worst.filter(|_| !shell_ok) {
        offending.push(worst);
    }
    offending.extend(face.offending);
    offending.truncate(MAX_RECORDED_SAMPLES);

    let index = fixed_point_index(&block);
    let g = params.gravity();
    let face_ok = face.max_zddot < -sampling.margin_min
        && face.zddot_error <= 1e-12 * g.max(1.0)
        && face.misclassified == 0;
    let corner_ok = face.corner_max_fdot < -sampling.margin_min;
    let verdict = shell_ok && face_ok && corner_ok && index != 0;

    Ok(CertificateReport {
        c_star,
        c_used: block.c,
        margin_min: sampling.margin_min,
        pivot_accel_bound: accel.bound,
        pivot_accel_sampled_max: accel.sampled_max,
        shell_samples: shell.samples,
        shell_max_fdot: shell.max_fdot,
        face_samples: face.samples,
        face_min_neg_zddot: face.max_zddot,
        face_zddot_error: face.zddot_error,
        corner_samples: face.corners,
        corner_max_fdot: face.corner_max_fdot,
        exit_classification_histogram: histogram,
        misclassified: face.misclassified,
        index,
        monodromy: "identity".into(),
        verdict,
        offending_samples: offending,
    })
}
