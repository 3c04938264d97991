use thiserror::Error;

use crate::quadrature::QuadratureError;

/// Errors raised anywhere in the library.
///
/// Each variant maps onto one of the CLI exit codes via [`DoscError::exit_code`].
#[derive(Debug, Error)]
pub enum DoscError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    /// The Hamiltonian is not bounded below for this coupling.
    #[error(
        "positivity violated: integral of V^2/omega = {integral:.12e} >= omega0 = {omega0:.12e} \
         (margin {margin:.3e}); reduce the coupling strength"
    )]
    Positivity {
        integral: f64,
        omega0: f64,
        margin: f64,
    },

    /// A finite bath whose stiffness matrix is not positive definite.
    #[error("discrete positivity violated: margin {margin:.3e}; {advice}")]
    DiscretePositivity { margin: f64, advice: String },

    #[error("omega = {omega} lies outside the coupling support (V(omega) = 0)")]
    OutsideSupport { omega: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical procedure exhausted its budget before meeting its tolerance.
    #[error("did not converge: {message}")]
    NonConvergence { message: String },

    /// Requested times exceed what the frequency grid can resolve.
    #[error(
        "time {t_max} exceeds the anti-aliasing bound {allowed:.6} of the frequency grid \
         (resolution {resolution:.3e}); refine the grid for this time window"
    )]
    AntiAliasing {
        t_max: f64,
        allowed: f64,
        resolution: f64,
    },

    /// An identity that must hold by construction failed.
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl DoscError {
    /// Process exit code: 1 usage/config, 2 physics rejection, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            DoscError::Positivity { .. } | DoscError::DiscretePositivity { .. } => 2,
            DoscError::Quadrature(_)
            | DoscError::NonConvergence { .. }
            | DoscError::AntiAliasing { .. }
            | DoscError::InvariantViolation(_)
            | DoscError::FitFailure(_) => 3,
            DoscError::OutsideSupport { .. }
            | DoscError::InvalidSpectrum(_)
            | DoscError::InvalidArgument(_)
            | DoscError::Config(_)
            | DoscError::Io(_)
            | DoscError::Csv(_)
            | DoscError::Json(_) => 1,
        }
    }

    /// Short machine-readable tag used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            DoscError::Quadrature(_) => "quadrature",
            DoscError::Positivity { .. } => "positivity",
            DoscError::DiscretePositivity { .. } => "discrete_positivity",
            DoscError::OutsideSupport { .. } => "outside_support",
            DoscError::InvalidSpectrum(_) => "invalid_spectrum",
            DoscError::InvalidArgument(_) => "invalid_argument",
            DoscError::NonConvergence { .. } => "non_convergence",
            DoscError::AntiAliasing { .. } => "anti_aliasing",
            DoscError::InvariantViolation(_) => "invariant_violation",
            DoscError::FitFailure(_) => "fit_failure",
            DoscError::Config(_) => "config",
            DoscError::Io(_) => "io",
            DoscError::Csv(_) => "csv",
            DoscError::Json(_) => "json",
        }
    }
}

pub type Result<T, E = DoscError> = std::result::Result<T, E>;
