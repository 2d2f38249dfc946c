use thiserror::Error;

/// Errors raised by the solvers, the optimizer and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive diffusion coefficient {value} at node ({i}, {j}), level {level}")]
    NonPositiveCoefficient { i: usize, j: usize, level: usize, value: f64 },

    #[error("linear solve failed at time level {level}: {reason}")]
    LinearSolve { level: usize, reason: String },

    #[error("Picard iteration did not reach tolerance {theta_bar:e} in {iterations} iterations")]
    PicardNotConverged {
        theta_bar: f64,
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("Picard iteration diverging: residual grew for 3 consecutive iterations")]
    PicardDiverging { residual_history: Vec<f64> },

    #[error("degenerate step-size system: R2^2 - R1*R4 = {det:e}")]
    DegenerateStep { det: f64 },

    #[error("vanishing previous gradient; conjugate coefficient undefined")]
    VanishedGradient,

    #[error("flux outside admissible bounds: {0}")]
    Inadmissible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
