//! Search for the falling-free periodic solution as a fixed point of the
//! period map.
//!
//! Near the upright position the period map is a saddle: the orbit repels
//! along two directions with multipliers in the hundreds for light damping.
//! A single shot over a whole period from a rough guess therefore falls over
//! long before it returns. The search solves the periodicity conditions by
//! multiple shooting over `segments` sub-intervals, where growth per segment
//! stays moderate, and then polishes the result with Newton on the single
//! period map so that the reported residual is that of the one-period map.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PendulumParams, PivotMotion, State};
use crate::error::{Error, Result};
use crate::integrator::{integrate, propagate, StepConfig, Trajectory};

/// Chart coordinates `(x, y, vx, vy)` on the open upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartPoint(pub Vector4<f64>);

impl ChartPoint {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self(Vector4::new(x, y, vx, vy))
    }

    pub fn origin() -> Self {
        Self(Vector4::zeros())
    }

    /// Rotation by `angle` about the vertical axis.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let u = &self.0;
        Self::new(
            c * u[0] - s * u[1],
            s * u[0] + c * u[1],
            c * u[2] - s * u[3],
            s * u[2] + c * u[3],
        )
    }

    pub fn distance(&self, other: &ChartPoint) -> f64 {
        (self.0 - other.0).norm()
    }
}

/// State at time `t` for the chart point `u`, with `z > 0` and the vertical
/// velocity fixed by tangency.
pub fn chart_embed(u: &ChartPoint, rod_length: f64, t: f64) -> Result<State> {
    let [x, y, vx, vy] = [u.0[0], u.0[1], u.0[2], u.0[3]];
    let rho2 = x * x + y * y;
    let z2 = rod_length * rod_length - rho2;
    if !(z2 > 0.0) || !u.0.iter().all(|v| v.is_finite()) {
        return Err(Error::ChartDomain(format!(
            "x^2 + y^2 = {rho2} is not below l^2 = {}",
            rod_length * rod_length
        )));
    }
    let z = z2.sqrt();
    let vz = -(x * vx + y * vy) / z;
    Ok(State::new(
        t,
        nalgebra::Vector3::new(x, y, z),
        nalgebra::Vector3::new(vx, vy, vz),
    ))
}

pub fn chart_project(state: &State, _rod_length: f64) -> Result<ChartPoint> {
    if !(state.z() > 0.0) {
        return Err(Error::ChartDomain(format!(
            "state with z = {} is outside the upper hemisphere",
            state.z()
        )));
    }
    Ok(ChartPoint::new(
        state.position.x,
        state.position.y,
        state.velocity.x,
        state.velocity.y,
    ))
}

/// Flow from phase `ta` to `tb` in chart coordinates. Any sample with
/// `z <= z_floor` aborts with [`Error::LeftBlock`].
fn chart_flow(
    u: &ChartPoint,
    ta: f64,
    tb: f64,
    params: &PendulumParams,
    pivot: &PivotMotion,
    step: &StepConfig,
    z_floor: f64,
) -> Result<ChartPoint> {
    let ell = params.rod_length();
    let s0 = chart_embed(u, ell, ta)?;
    let end = propagate(&s0, ta, tb, step, params, pivot, |s| {
        if s.z() <= z_floor {
            Err(Error::LeftBlock {
                time: s.time,
                z: s.z(),
                floor: z_floor,
            })
        } else {
            Ok(())
        }
    })?;
    chart_project(&end, ell)
}

/// Period map from phase `t0`; `z_floor` is absolute (length units).
pub fn return_map(
    u: &ChartPoint,
    t0: f64,
    params: &PendulumParams,
    pivot: &PivotMotion,
    step: &StepConfig,
    z_floor: f64,
) -> Result<ChartPoint> {
    chart_flow(u, t0, t0 + pivot.period(), params, pivot, step, z_floor)
}

/// Forward-difference Jacobian of the period map.
pub fn return_map_jacobian(
    u: &ChartPoint,
    t0: f64,
    params: &PendulumParams,
    pivot: &PivotMotion,
    step: &StepConfig,
    z_floor: f64,
    fd_step: f64,
) -> Result<Matrix4<f64>> {
    let base = return_map(u, t0, params, pivot, step, z_floor)?;
    let mut jac = Matrix4::zeros();
    for j in 0..4 {
        let mut p = *u;
        p.0[j] += fd_step;
        let col = (return_map(&p, t0, params, pivot, step, z_floor)?.0 - base.0) / fd_step;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSearchConfig {
    /// Phase at which the fixed point is sought.
    pub t0: f64,
    pub grid_x: usize,
    pub grid_y: usize,
    /// Half width of the start grid, as a fraction of the rod length.
    pub grid_half_width: f64,
    /// Guard height, as a fraction of the rod length.
    pub z_floor: f64,
    pub segments: usize,
    /// Best-ranked starts handed to Newton.
    pub newton_starts: usize,
    pub max_newton_iterations: usize,
    pub max_polish_iterations: usize,
    pub fd_step: f64,
    pub tol_orbit: f64,
    /// Multiple-shooting stopping tolerance on the max-norm of the residual.
    pub tol_shooting: f64,
    pub armijo: f64,
    pub min_damping: f64,
    /// Converged points closer than this are the same fixed point.
    pub dedup_tol: f64,
}

impl Default for OrbitSearchConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            grid_x: 5,
            grid_y: 5,
            grid_half_width: 0.3,
            z_floor: 0.05,
            segments: 8,
            newton_starts: 5,
            max_newton_iterations: 50,
            max_polish_iterations: 8,
            fd_step: 1e-6,
            tol_orbit: 1e-10,
            tol_shooting: 1e-12,
            armijo: 1e-4,
            min_damping: 1.0 / 1024.0,
            dedup_tol: 1e-6,
        }
    }
}

impl OrbitSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_x == 0 || self.grid_y == 0 || self.segments == 0 || self.newton_starts == 0 {
            return Err(Error::Config(
                "orbit search grid, segments and starts must be positive".into(),
            ));
        }
        if !(self.grid_half_width >= 0.0 && self.grid_half_width < 1.0) {
            return Err(Error::Config("grid_half_width must lie in [0, 1)".into()));
        }
        if !(self.z_floor > 0.0 && self.z_floor < 1.0) {
            return Err(Error::Config("z_floor must lie in (0, 1)".into()));
        }
        if !(self.fd_step > 0.0 && self.tol_orbit > 0.0 && self.min_damping > 0.0) {
            return Err(Error::Config(
                "fd_step, tol_orbit and min_damping must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Start points in the documented order: `x` index outer, `y` inner.
    pub fn start_grid(&self, rod_length: f64) -> Vec<ChartPoint> {
        let axis = |n: usize| -> Vec<f64> {
            let w = self.grid_half_width * rod_length;
            if n == 1 {
                vec![0.0]
            } else {
                (0..n)
                    .map(|i| -w + 2.0 * w * i as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        let ys = axis(self.grid_y);
        axis(self.grid_x)
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| ChartPoint::new(x, y, 0.0, 0.0)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub starts: usize,
    /// Starts whose shooting residual could be evaluated without leaving
    /// the block.
    pub admissible_starts: usize,
    pub newton_attempts: usize,
    pub converged_attempts: usize,
    pub newton_iterations: usize,
    pub shooting_residual: f64,
    /// Further distinct fixed points, in selection order.
    pub other_fixed_points: Vec<ChartPoint>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub fixed_point: ChartPoint,
    pub t0: f64,
    /// `|P(u) - u|` for the period map `P`.
    pub residual: f64,
    pub trajectory: Trajectory,
    pub min_z: f64,
    /// Eigenvalues of the finite-difference Jacobian of `P`, as
    /// `[re, im]`, sorted by decreasing modulus.
    pub return_map_spectrum: Vec<[f64; 2]>,
    pub converged: bool,
    pub params: PendulumParams,
    pub pivot: PivotMotion,
    pub step: StepConfig,
    pub diagnostics: SearchDiagnostics,
}

struct Shooting<'a> {
    params: &'a PendulumParams,
    pivot: &'a PivotMotion,
    step: &'a StepConfig,
    cfg: &'a OrbitSearchConfig,
    z_floor: f64,
}

struct Attempt {
    point: ChartPoint,
    shooting_residual: f64,
    iterations: usize,
}

impl Shooting<'_> {
    fn n(&self) -> usize {
        self.cfg.segments
    }

    fn node_time(&self, k: usize) -> f64 {
        self.cfg.t0 + self.pivot.period() * k as f64 / self.n() as f64
    }

    fn segment(&self, k: usize, u: &ChartPoint) -> Result<ChartPoint> {
        chart_flow(
            u,
            self.node_time(k),
            self.node_time(k + 1),
            self.params,
            self.pivot,
            self.step,
            self.z_floor,
        )
    }

    fn node(x: &DVector<f64>, k: usize) -> ChartPoint {
        ChartPoint(x.fixed_rows::<4>(4 * k).into_owned())
    }

    /// Mismatch `phi_k(u_k) - u_{k+1}` stacked over all segments, with
    /// the segment images.
    fn residual(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<ChartPoint>)> {
        let n = self.n();
        let mut r = DVector::zeros(4 * n);
        let mut images = Vec::with_capacity(n);
        for k in 0..n {
            let img = self.segment(k, &Self::node(x, k))?;
            let next = Self::node(x, (k + 1) % n);
            r.fixed_rows_mut::<4>(4 * k).copy_from(&(img.0 - next.0));
            images.push(img);
        }
        Ok((r, images))
    }

    fn jacobian(&self, x: &DVector<f64>, images: &[ChartPoint]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let h = self.cfg.fd_step;
        let mut jac = DMatrix::zeros(4 * n, 4 * n);
        for k in 0..n {
            let u = Self::node(x, k);
            for j in 0..4 {
                let mut p = u;
                p.0[j] += h;
                let col = (self.segment(k, &p)?.0 - images[k].0) / h;
                jac.view_mut((4 * k, 4 * k + j), (4, 1)).copy_from(&col);
            }
            let next = (k + 1) % n;
            for j in 0..4 {
                jac[(4 * k + j, 4 * next + j)] -= 1.0;
            }
        }
        Ok(jac)
    }

    fn constant_guess(&self, u: &ChartPoint) -> DVector<f64> {
        DVector::from_iterator(
            4 * self.n(),
            (0..self.n()).flat_map(|_| u.0.iter().copied()),
        )
    }

    /// Damped Newton with Armijo backtracking on the multiple-shooting system.
    fn solve(&self, seed: &ChartPoint) -> Result<Attempt> {
        let mut x = self.constant_guess(seed);
        let (mut r, mut images) = self.residual(&x)?;
        let mut norm = r.norm();
        let mut iterations = 0;
        while r.amax() > self.cfg.tol_shooting && iterations < self.cfg.max_newton_iterations {
            iterations += 1;
            let jac = self.jacobian(&x, &images)?;
            let delta = jac
                .lu()
                .solve(&(-&r))
                .ok_or(Error::Singular("multiple-shooting Jacobian"))?;
            let mut alpha = 1.0;
            let accepted = loop {
                let trial = &x + &delta * alpha;
                if let Ok((rt, it)) = self.residual(&trial) {
                    let nt = rt.norm();
                    if nt <= (1.0 - self.cfg.armijo * alpha) * norm {
                        break Some((trial, rt, it, nt));
                    }
                }
                alpha *= 0.5;
                if alpha < self.cfg.min_damping {
                    break None;
                }
            };
            match accepted {
                Some((xt, rt, it, nt)) => {
                    x = xt;
                    r = rt;
                    images = it;
                    norm = nt;
                }
                // roundoff floor or a genuine stall; the caller judges by the residual
                None => break,
            }
        }
        Ok(Attempt {
            point: Self::node(&x, 0),
            shooting_residual: r.amax(),
            iterations,
        })
    }

    /// Newton on `P(u) - u` from a multiple-shooting solution.
    fn polish(&self, u: &ChartPoint) -> Result<(ChartPoint, f64)> {
        let pm = |p: &ChartPoint| {
            return_map(
                p,
                self.cfg.t0,
                self.params,
                self.pivot,
                self.step,
                self.z_floor,
            )
        };
        let mut best = *u;
        let mut best_res = (pm(&best)?.0 - best.0).norm();
        for _ in 0..self.cfg.max_polish_iterations {
            if best_res <= 1e-3 * self.cfg.tol_orbit {
                break;
            }
            let r = pm(&best)?.0 - best.0;
            let jac = return_map_jacobian(
                &best,
                self.cfg.t0,
                self.params,
                self.pivot,
                self.step,
                self.z_floor,
                self.cfg.fd_step,
            )? - Matrix4::identity();
            let Some(delta) = jac.lu().solve(&(-r)) else {
                break;
            };
            let trial = ChartPoint(best.0 + delta);
            let Ok(img) = pm(&trial) else { break };
            let res = (img.0 - trial.0).norm();
            if res < best_res {
                best = trial;
                best_res = res;
            } else {
                break;
            }
        }
        Ok((best, best_res))
    }
}

struct Candidate {
    point: ChartPoint,
    residual: f64,
    shooting_residual: f64,
    iterations: usize,
    trajectory: Trajectory,
}

/// Locates a fixed point of the period map from phase `search.t0`.
///
/// Starts from a grid in the chart with zero velocity, ranks them by the
/// initial periodicity mismatch, runs damped multiple-shooting Newton from
/// the best `newton_starts`, and picks among the distinct converged fixed
/// points the one with the largest `min_z`.
pub fn find_periodic_orbit(
    params: &PendulumParams,
    pivot: &PivotMotion,
    step: &StepConfig,
    search: &OrbitSearchConfig,
) -> Result<PeriodicOrbit> {
    search.validate()?;
    step.validate_for(pivot)?;
    let ell = params.rod_length();
    let shooting = Shooting {
        params,
        pivot,
        step,
        cfg: search,
        z_floor: search.z_floor * ell,
    };

    let starts = search.start_grid(ell);
    let mut ranked: Vec<(usize, f64)> = starts
        .par_iter()
        .enumerate()
        .filter_map(|(i, u)| {
            shooting
                .residual(&shooting.constant_guess(u))
                .ok()
                .map(|(r, _)| (i, r.norm()))
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::SearchExhausted(format!(
            "all {} starts leave the block (z floor {}) within one segment",
            starts.len(),
            shooting.z_floor
        )));
    }
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let admissible = ranked.len();
    ranked.truncate(search.newton_starts);

    let attempts: Vec<Result<Attempt>> = ranked
        .par_iter()
        .map(|&(i, _)| shooting.solve(&starts[i]))
        .collect();
    let mut notes = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut fallback: Option<Attempt> = None;
    for (&(i, _), outcome) in ranked.iter().zip(attempts) {
        let attempt = match outcome {
            Ok(a) => a,
            Err(e) => {
                notes.push(format!("start {i}: {e}"));
                continue;
            }
        };
        let polished = shooting.polish(&attempt.point);
        match polished {
            Ok((point, residual)) if residual <= search.tol_orbit => {
                let trajectory = orbit_trajectory(&point, search.t0, params, pivot, step)?;
                candidates.push(Candidate {
                    point,
                    residual,
                    shooting_residual: attempt.shooting_residual,
                    iterations: attempt.iterations,
                    trajectory,
                });
            }
            Ok((_, residual)) => {
                notes.push(format!(
                    "start {i}: Newton stalled at period-map residual {residual:e}"
                ));
                if fallback
                    .as_ref()
                    .is_none_or(|f| attempt.shooting_residual < f.shooting_residual)
                {
                    fallback = Some(attempt);
                }
            }
            Err(e) => {
                notes.push(format!("start {i}: {e}"));
                if fallback
                    .as_ref()
                    .is_none_or(|f| attempt.shooting_residual < f.shooting_residual)
                {
                    fallback = Some(attempt);
                }
            }
        }
    }
    let attempts_made = ranked.len();
    let converged_attempts = candidates.len();

    // largest min_z first, then smallest residual, then start order
    candidates.sort_by(|a, b| {
        b.trajectory
            .min_z
            .total_cmp(&a.trajectory.min_z)
            .then(a.residual.total_cmp(&b.residual))
    });
    let mut distinct: Vec<Candidate> = Vec::new();
    for c in candidates {
        if distinct
            .iter()
            .all(|d| d.point.distance(&c.point) > search.dedup_tol)
        {
            distinct.push(c);
        }
    }

    let mut diagnostics = SearchDiagnostics {
        starts: starts.len(),
        admissible_starts: admissible,
        newton_attempts: attempts_made,
        converged_attempts,
        newton_iterations: 0,
        shooting_residual: 0.0,
        other_fixed_points: Vec::new(),
        notes,
    };

    let mut distinct = distinct.into_iter();
    let Some(best) = distinct.next() else {
        // nothing converged: report the closest attempt
        let (point, shooting_residual, iterations) = match fallback {
            Some(a) => (a.point, a.shooting_residual, a.iterations),
            None => (starts[ranked[0].0], ranked[0].1, 0),
        };
        diagnostics.newton_iterations = iterations;
        diagnostics.shooting_residual = shooting_residual;
        let trajectory = orbit_trajectory(&point, search.t0, params, pivot, step)
            .or_else(|_| orbit_trajectory(&ChartPoint::origin(), search.t0, params, pivot, step))?;
        let residual = return_map(&point, search.t0, params, pivot, step, f64::NEG_INFINITY)
            .map(|img| (img.0 - point.0).norm())
            .unwrap_or(shooting_residual);
        return Ok(PeriodicOrbit {
            fixed_point: point,
            t0: search.t0,
            residual,
            min_z: trajectory.min_z,
            trajectory,
            return_map_spectrum: Vec::new(),
            converged: false,
            params: *params,
            pivot: pivot.clone(),
            step: *step,
            diagnostics,
        });
    };
    diagnostics.other_fixed_points = distinct.map(|c| c.point).collect();
    diagnostics.newton_iterations = best.iterations;
    diagnostics.shooting_residual = best.shooting_residual;

    let jac = return_map_jacobian(
        &best.point,
        search.t0,
        params,
        pivot,
        step,
        shooting.z_floor,
        search.fd_step,
    )?;
    let spectrum = sorted_spectrum(&jac);
    let min_z = best.trajectory.min_z;
    Ok(PeriodicOrbit {
        fixed_point: best.point,
        t0: search.t0,
        residual: best.residual,
        trajectory: best.trajectory,
        min_z,
        return_map_spectrum: spectrum,
        converged: min_z > 0.0,
        params: *params,
        pivot: pivot.clone(),
        step: *step,
        diagnostics,
    })
}

/// Eigenvalues as `[re, im]`, sorted by decreasing modulus.
pub fn sorted_spectrum(jac: &Matrix4<f64>) -> Vec<[f64; 2]> {
    let mut eig: Vec<[f64; 2]> = jac
        .complex_eigenvalues()
        .iter()
        .map(|z| [z.re, z.im])
        .collect();
    eig.sort_by(|a, b| {
        b[0].hypot(b[1])
            .total_cmp(&a[0].hypot(a[1]))
            .then(b[1].total_cmp(&a[1]))
    });
    eig
}

/// One period of the solution through the chart point `u` at phase `t0`.
pub fn orbit_trajectory(
    u: &ChartPoint,
    t0: f64,
    params: &PendulumParams,
    pivot: &PivotMotion,
    step: &StepConfig,
) -> Result<Trajectory> {
    let s0 = chart_embed(u, params.rod_length(), t0)?;
    integrate(&s0, [t0, t0 + pivot.period()], step, params, pivot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallingFree {
    pub min_z: f64,
    pub margin: f64,
    pub verdict: bool,
}

/// Margin required above the horizontal plane, relative to the rod length.
pub const FALLING_FREE_MARGIN: f64 = 1e-6;

/// Recomputes the orbit at a quarter of its step size and checks that it
/// stays above the horizontal plane by at least `1e-6 l`.
pub fn verify_falling_free(orbit: &PeriodicOrbit) -> Result<FallingFree> {
    let fine = orbit.step.with_dt(orbit.step.dt / 4.0)?;
    let traj = orbit_trajectory(
        &orbit.fixed_point,
        orbit.t0,
        &orbit.params,
        &orbit.pivot,
        &fine,
    )?;
    let margin = FALLING_FREE_MARGIN * orbit.params.rod_length();
    Ok(FallingFree {
        min_z: traj.min_z,
        margin,
        verdict: traj.min_z >= margin,
    })
}
