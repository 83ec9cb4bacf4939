use crate::symbolkit::SymbolError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("{module}: divisor at mode {mode:?} (order {order}) is below the floor: {source}")]
    Divisor {
        module: &'static str,
        order: usize,
        mode: [i32; 2],
        source: SymbolError,
    },
    #[error(
        "eiconal iteration is not contracting: ratio {ratio:.3} over {steps} steps \
         (expected scale ε/ε̃ + ε̃ = {expected:.3})"
    )]
    NonContraction { ratio: f64, steps: usize, expected: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("trajectory left the validity box |ξ| ≤ {bound} at t = {t:.6}")]
    FlowEscape { bound: f64, t: f64 },
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("no return to the initial x₁ section within t = {0:.3}")]
    PeriodNotFound(f64),
    #[error("k-box {k_box} too small: lattice point {k:?} inside the rectangle touches its boundary")]
    KBoxTooSmall { k_box: i32, k: [i32; 2] },
    #[error("quantization window: {0}")]
    Window(String),
    #[error("eigensolver did not converge")]
    EigenNoConvergence,
    #[error("untrusted window: margin {margin:.3e} at h = {h}")]
    Untrusted { h: f64, margin: f64 },
    #[error("checks failed: {0}")]
    Checks(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure is caused by the input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid(_) | Error::Json(_) | Error::Io(_) | Error::KBoxTooSmall { .. } => true,
            Error::Window(_) => true,
            Error::Symbol(e) => matches!(e, SymbolError::Json(_) | SymbolError::BoundViolation(_)),
            _ => false,
        }
    }
}
