use thiserror::Error;

/// Everything that can go wrong when setting up or running an experiment.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("Feller index nu = {nu:.6} must exceed 1/2 for {operation}")]
    FellerTooSmall { nu: f64, operation: &'static str },

    #[error("correlation rho = {rho} violates |rho| != 1, required for {operation}")]
    DegenerateCorrelation { rho: f64, operation: &'static str },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid with {coarse} steps does not nest in grid with {fine} steps")]
    NotNested { coarse: usize, fine: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{what}: need at least {required}, got {actual}")]
    TooFew {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// Errors caused by malformed or out-of-range input rather than by a
    /// parameter regime the requested operation cannot handle.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            LabError::InvalidParameter { .. }
                | LabError::InvalidGrid(_)
                | LabError::NotNested { .. }
                | LabError::TooFew { .. }
                | LabError::Config(_)
        )
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
