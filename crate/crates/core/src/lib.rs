//! Inverted spherical pendulum with viscous friction and a periodically
//! moving pivot.
//!
//! - [`dynamics`]: the constrained vector field and its scalar observables.
//! - [`integrator`]: projected RK4 time stepping.
//! - [`certifier`]: sampled checks of the block `{F <= c, z >= 0}` and its
//!   fixed-point index.
//! - [`orbit`]: search for the falling-free periodic solution.

// `!(x < y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod orbit;

pub use certifier::{
    certify_block, check_energy_shell, classify_boundary_point, energy_threshold,
    fixed_point_index, make_block, sup_pivot_accel, BlockSpec, BoundaryClass, CertificateReport,
    SamplingConfig,
};
pub use dynamics::{
    constraint_multiplier, energy_rate, kinetic_energy, vector_field,
    vertical_acceleration_at_horizontal, Derivative, PendulumParams, PivotMotion, State,
};
pub use error::{Error, Result};
pub use integrator::{integrate, project, step, StepConfig, Trajectory};
pub use orbit::{
    chart_embed, chart_project, find_periodic_orbit, return_map, verify_falling_free, ChartPoint,
    OrbitSearchConfig, PeriodicOrbit,
};
