use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0} cells vs {1} cells")]
    GridMismatch(usize, usize),

    #[error("invalid field: {0}")]
    Field(String),

    #[error("invalid coupling: {0}")]
    Coupling(String),

    #[error("invalid noise tree: {0}")]
    Tree(String),

    #[error("CFL condition violated: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("signed measure is not centered (total mass {0:.3e})")]
    NotCentered(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("density became negative (min {0:.3e})")]
    NegativeDensity(f64),
}

pub type Result<T, E = MfgError> = std::result::Result<T, E>;
