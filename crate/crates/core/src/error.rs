use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation (e.g. `t > 1`).
    #[error("out of domain: {0}")]
    Domain(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible scene: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Gradient descent blew up; carries the objective trace up to the failing step.
    #[error("descent diverged at step {step}: objective {objective} exceeds 10x the initial value")]
    Diverged {
        step: usize,
        objective: f64,
        trace: Vec<f64>,
    },
}

impl Error {
    /// Failures caused by floating point behaviour rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Diverged { .. })
    }
}
