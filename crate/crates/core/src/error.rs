use thiserror::Error;

/// Location of a grid point, reported by positivity failures.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLocation {
    pub index: usize,
    pub coords: Vec<f64>,
}

impl std::fmt::Display for PointLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{} at x = [", self.index)?;
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:.6}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("form degree overflow: ({p},{q}) exceeds n = {n}")]
    DegreeOverflow { p: usize, q: usize, n: usize },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("positivity lost at point {location}: min eigenvalue {min_eig:.6e}")]
    PositivityLoss { location: PointLocation, min_eig: f64 },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("eigenvalues outside the admissible cone: mu = {mu:?}")]
    OutsideCone { mu: Vec<f64> },

    #[error("non-positive field value {value:.3e} at point {location}")]
    NonPositiveField { location: PointLocation, value: f64 },

    #[error("time step underflow: dt = {dt:.3e} < dt_min = {dt_min:.3e} at t = {t:.6}")]
    DtUnderflow { dt: f64, dt_min: f64, t: f64 },

    #[error("not enough samples: {0}")]
    InsufficientSamples(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("field dump error: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
