//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scene data (non-SPD shape matrix, overlapping obstacles, ...).
    #[error("invalid scene: {0}")]
    Scene(String),

    /// A precondition on an operation's arguments was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory hit a boundary tangentially (cos phi below threshold).
    #[error("degenerate trajectory: tangential hit with cos_phi = {cos_phi:.3e}")]
    DegenerateTrajectory { cos_phi: f64 },

    /// A finite-difference stencil crossed a discontinuity or left the
    /// domain of the sampled map.
    #[error("finite-difference stencil error: {0}")]
    Stencil(String),

    /// An iterative solver failed to converge.
    #[error("solver failure: {context} (iterations {iterations}, residual {residual:.3e})")]
    Solver {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// A curvature front became degenerate (I + dB singular).
    #[error("degenerate front: {0}")]
    DegenerateFront(String),

    /// Independent evaluation routes disagreed beyond tolerance.
    #[error("verification failure: {0}")]
    Verification(String),

    /// A counting query exceeded the completeness horizon of an orbit table.
    #[error("orbit table incomplete for length {requested:.6} (horizon {horizon:.6})")]
    Horizon { requested: f64, horizon: f64 },

    /// A zeta-product factor was evaluated too close to a pole.
    #[error("zeta factor within {0:.3e} of a pole")]
    PoleProximity(f64),

    /// Scene file or report (de)serialization failed.
    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
