//! Truncated Fourier–Taylor symbol algebra on `T*T²`.

mod algebra;
mod grid;
mod hseries;
mod json;
pub(crate) mod poly;
mod symbol;

pub use algebra::{
    bidifferential, bidifferential_skipping, classical_lie_series, commutator_over_h, multiply, poisson_bracket,
    star_product, taylor_reciprocal, taylor_reciprocal_with_floor, DIVISOR_FLOOR,
};
pub use hseries::{moyal_conjugation_step, HSeries};
pub use json::SymbolJson;
pub use poly::MAX_XI_DEGREE;
pub use symbol::{Caps, FourierTaylorSymbol, Mode, MultiIndex, Truncation, DROP_THRESHOLD};

#[derive(Debug, thiserror::Error)]
pub enum SymbolError {
    #[error("vanishing divisor: |f(0)| = {value:.3e} is below the floor {floor:.1e}")]
    VanishingDivisor { value: f64, floor: f64 },
    #[error("{0} needs an x-independent symbol")]
    NotXIndependent(&'static str),
    #[error("symbol bounds violated: {0}")]
    BoundViolation(String),
    #[error("Lie series did not converge after {terms} terms (last term norm {last_norm:.3e})")]
    LieSeriesDiverged { terms: usize, last_norm: f64 },
    #[error("invalid symbol JSON: {0}")]
    Json(String),
}
