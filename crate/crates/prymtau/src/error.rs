//! Error taxonomy. Variants map onto the CLI exit codes: schema and input
//! problems exit 2, check failures exit 1, numerical breakdowns exit 3.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PrymError>;

#[derive(Debug, Error)]
pub enum PrymError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("input schema: {0}")]
    Schema(String),

    #[error("quadrature failed to converge: last estimates {last:?} (requested rel tol {tol:e})")]
    QuadratureFailure { last: [f64; 2], tol: f64 },

    #[error("sheet tracking became ambiguous near x = {near}")]
    TrackingAmbiguity { near: String },

    #[error("linear system ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("rank deficiency: {0}")]
    RankDeficiency(String),

    #[error("homology lattice obstruction: elementary divisors {divisors:?}")]
    LatticeObstruction { divisors: Vec<i64> },

    #[error("theta characteristic selection failed: {0}")]
    SingularCharacteristic(String),

    #[error("theta series truncation would need {0} lattice points")]
    LatticeBlowup(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl PrymError {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PrymError::CheckFailed(_) => 1,
            PrymError::DegenerateInput(_) | PrymError::Schema(_) | PrymError::Json(_) => 2,
            _ => 3,
        }
    }
}
