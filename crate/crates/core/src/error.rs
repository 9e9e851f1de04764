use thiserror::Error;

/// Errors raised by the transformation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid particle parameters: {0}")]
    InvalidParams(String),

    #[error("config error{}: {message}", at_line(*line))]
    Config { line: usize, message: String },

    #[error("invalid field configuration: {0}")]
    InvalidField(String),

    #[error("field is not stationary; {0} requires a stationary field")]
    NonStationary(&'static str),

    #[error("spectrum below floor: minimum eigenvalue {min} <= floor {floor}")]
    Singular { min: f64, floor: f64 },

    #[error("matrix is not self-adjoint (relative residual {residual:.3e}) and its spectrum is not real-positive")]
    NotHermitian { residual: f64 },

    #[error("eigendecomposition failed to converge")]
    Eigen,

    #[error("commutation precondition violated: |[M,O]| = {m_o:.3e}, |[E,O]| = {e_o:.3e} (tolerance {tol:.1e})")]
    CommutationViolated { m_o: f64, e_o: f64, tol: f64 },

    #[error("pseudo-norm drift {drift:.3e} exceeded {threshold:.1e} at step {step}")]
    NormDrift { step: usize, drift: f64, threshold: f64 },

    #[error("massless particle: {0}")]
    Massless(&'static str),

    #[error("integration unstable at t = {t}: {reason}")]
    Unstable { t: f64, reason: String },

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}
