use thiserror::Error;

use crate::integrator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate state: {0}")]
    DegenerateState(&'static str),

    /// Non-finite values appeared during time stepping. The samples
    /// accumulated before the failure are kept when available.
    #[error("integration diverged at t = {time}")]
    Divergence {
        time: f64,
        partial: Option<Box<Trajectory>>,
    },

    /// A chart point outside the open upper hemisphere.
    #[error("chart domain violated: {0}")]
    ChartDomain(String),

    /// The trajectory dipped below the z floor guarding the orbit search.
    #[error("trajectory left the block at t = {time} (z = {z}, floor = {floor})")]
    LeftBlock { time: f64, z: f64, floor: f64 },

    #[error("orbit search exhausted: {0}")]
    SearchExhausted(String),

    #[error("linear algebra failure: {0}")]
    Singular(&'static str),
}
