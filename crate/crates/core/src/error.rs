use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element} is degenerate (signed volume {volume:e})")]
    DegenerateElement { element: usize, volume: f64 },

    #[error("refinement closure exceeded {limit} bisections; mesh is pathological")]
    RefinementGuard { limit: usize },

    #[error("no quadrature rule of degree {degree} on the {dim}-simplex")]
    UnsupportedQuadrature { dim: usize, degree: usize },

    #[error("integrand returned a non-finite value on element {element}")]
    NonFinite { element: usize },

    #[error("linear system is singular or ill-conditioned: {0}")]
    Singular(String),

    #[error("{solver} did not converge after {iterations} iterations (last residuals: {history:?})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("active set iteration did not settle after {iterations} outer iterations")]
    ActiveSetCycling { iterations: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("adaptive iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for solver breakdowns (Newton, active set, linear solve).
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NotConverged { .. } | Error::ActiveSetCycling { .. } | Error::Singular(_) => true,
            Error::AtIteration { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
