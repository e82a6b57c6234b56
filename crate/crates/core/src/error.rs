use thiserror::Error;

/// Errors surfaced by the braking laboratory.
#[derive(Debug, Error)]
pub enum AbsError {
    #[error("slip ratio undefined for non-positive body speed U = {0}")]
    NonPositiveSpeed(f64),

    #[error("singular body mass matrix (det = {0:e})")]
    SingularMassMatrix(f64),

    #[error("non-finite plant state after step at t = {t:.4} s: {state}")]
    NonFiniteState { t: f64, state: String },

    #[error("non-finite estimate at t = {t:.4} s")]
    NonFiniteEstimate { t: f64 },

    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(String),

    #[error("invalid tyre parameters: {0}")]
    InvalidTyre(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown road surface preset `{0}` (expected dry, wet or snow)")]
    UnknownSurface(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AbsError {
    /// Configuration problems are distinguished from runtime aborts by the CLI exit code.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            AbsError::Config(_)
                | AbsError::UnknownSurface(_)
                | AbsError::InvalidVehicle(_)
                | AbsError::InvalidTyre(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, AbsError>;
