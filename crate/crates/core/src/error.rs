use num_complex::Complex64;
use thiserror::Error;

/// Failures raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidSpec(String),
    #[error("closed form needs a pure delta-shell potential with l = 0")]
    NotDeltaShellFamily,
    #[error("k must be nonzero")]
    KIsZero,
    #[error("grid has no node at shell radius {0}")]
    GridMissingShellNode(f64),
    #[error("Wronskian drifts across nodes: relative spread {spread:e}")]
    WronskianDrift { value: Complex64, spread: f64 },
    #[error("Cauchy circle of radius {radius} around {k} touches k = 0")]
    CircleTouchesOrigin { k: Complex64, radius: f64 },
    #[error("winding number {value} is not an integer")]
    WindingNotInteger { value: f64 },
    #[error("subdivision depth exhausted in box [{lo}, {hi}]")]
    DepthExhausted { lo: Complex64, hi: Complex64 },
    #[error("Newton stalled near k = {k} with |f| = {residual:e}")]
    NewtonStalled { k: Complex64, residual: f64 },
    #[error("k = {0} is a zero of the Jost function")]
    AtPole(Complex64),
    #[error("multiple zero on the positive imaginary axis at k = {0}")]
    BoundDegeneracyImpossible(Complex64),
    #[error("no convergence after {iterations} iterations: {diagnostic}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        diagnostic: String,
    },
    #[error("second k-derivative vanishes at the double zero (|f''| = {0:e})")]
    SecondDerivativeVanishes(f64),
    #[error("zero lost while tracking at step {step}")]
    LostZero { step: usize },
    #[error("extrapolation in the regulator is unstable (residual {residual:e})")]
    ExtrapolationUnstable { residual: f64 },
    #[error("tail term with q = 0 cannot be regulated")]
    TailDivergence,
    #[error("Gaussian regulator does not apply to tail wave number {0}")]
    RegulatorInapplicable(Complex64),
    #[error("expected multiplicity {expected}, got {found}")]
    MultiplicityMismatch { expected: u32, found: u32 },
    #[error("finite-difference noise {noise:e} exceeds tolerance {tol:e}")]
    TooCoarse { noise: f64, tol: f64 },
    #[error("pole {0} lies too close to the integration contour")]
    ContourPoleClash(Complex64),
    #[error("energy {0} coincides with a basis eigenvalue")]
    AtEigenvalue(Complex64),
    #[error("background quadrature not converged (estimate {estimate:e})")]
    BackgroundNotConverged { estimate: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported schema version {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::NotDeltaShellFamily => "NotDeltaShellFamily",
            Error::KIsZero => "KIsZero",
            Error::GridMissingShellNode(_) => "GridMissingShellNode",
            Error::WronskianDrift { .. } => "WronskianDrift",
            Error::CircleTouchesOrigin { .. } => "CircleTouchesOrigin",
            Error::WindingNotInteger { .. } => "WindingNotInteger",
            Error::DepthExhausted { .. } => "DepthExhausted",
            Error::NewtonStalled { .. } => "NewtonStalled",
            Error::AtPole(_) => "AtPole",
            Error::BoundDegeneracyImpossible(_) => "BoundDegeneracyImpossible",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SecondDerivativeVanishes(_) => "SecondDerivativeVanishes",
            Error::LostZero { .. } => "LostZero",
            Error::ExtrapolationUnstable { .. } => "ExtrapolationUnstable",
            Error::TailDivergence => "TailDivergence",
            Error::RegulatorInapplicable(_) => "RegulatorInapplicable",
            Error::MultiplicityMismatch { .. } => "MultiplicityMismatch",
            Error::TooCoarse { .. } => "TooCoarse",
            Error::ContourPoleClash(_) => "ContourPoleClash",
            Error::AtEigenvalue(_) => "AtEigenvalue",
            Error::BackgroundNotConverged { .. } => "BackgroundNotConverged",
            Error::Config(_) => "Config",
            Error::Schema(_) => "Schema",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
