use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("function `{name}` at byte {offset} takes 1 argument, got {got}")]
    Arity {
        offset: usize,
        name: String,
        got: usize,
    },

    #[error("domain error: {function} of {argument:e} in `{expr}` at x = {point:?}")]
    Domain {
        function: &'static str,
        argument: f64,
        expr: String,
        point: Vec<f64>,
    },

    #[error("metric is not invertible at x = {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("energy {energy} does not exceed the potential {potential} at x = {point:?}")]
    EnergyBelowPotential {
        energy: f64,
        potential: f64,
        point: Vec<f64>,
    },

    #[error("phase point has energy {found}, expected {expected}")]
    EnergyMismatch { expected: f64, found: f64 },

    #[error("point {point:?} is not on the boundary sphere")]
    NotOnBoundary { point: Vec<f64> },

    #[error("vector is not tangent to the boundary (normal component {normal_component:e})")]
    NotTangent { normal_component: f64 },

    #[error("vector points outward (normal component {normal_component:e})")]
    NotInward { normal_component: f64 },

    #[error("vectors do not span a 2-plane")]
    DegeneratePlane,

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("no boundary exit before t_max = {t_max}; the ray is possibly trapped and the system not simple")]
    Trapped { t_max: f64 },

    #[error("geodesic left the domain at fraction {fraction} of the requested parameter")]
    LeftDomain { fraction: f64 },

    #[error("shooting did not converge after {iterations} iterations (best miss {miss:e}); the system may not be simple")]
    ShootingFailed { iterations: usize, miss: f64 },

    #[error("perturbed metric is not positive definite at step {step}")]
    NotPositiveDefinite { step: f64 },

    #[error("gauge map Jacobian is singular at x = {point:?}")]
    SingularGauge { point: Vec<f64> },

    #[error("invalid gauge data: {0}")]
    InvalidGauge(String),

    #[error("empty quadrature: {0}")]
    EmptyGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Failures of the numerical machinery itself (non-convergence, trapped rays),
    /// as opposed to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::Trapped { .. }
                | Error::ShootingFailed { .. }
                | Error::LeftDomain { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
