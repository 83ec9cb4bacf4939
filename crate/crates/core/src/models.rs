//! Built-in models.

use num_complex::Complex64;

use crate::geomflow::FlowModel;
use crate::symbolkit::{multiply, Caps, FourierTaylorSymbol};

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `p = ξ₁ + 0.3ξ₁²`.
pub fn benchmark1_p() -> FourierTaylorSymbol {
    FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::monomial([0, 0], [2, 0], r(1.0)), r(0.3))
}

/// `q = ξ₂ + 0.15ξ₁ξ₂ + 0.2cos(x₁)(1+ξ₂) + 0.1sin(x₁+x₂)`.
pub fn benchmark1_q() -> FourierTaylorSymbol {
    let one_plus_xi2 = FourierTaylorSymbol::constant(r(1.0)).add(&FourierTaylorSymbol::xi(2));
    FourierTaylorSymbol::xi(2)
        .add_scaled(&FourierTaylorSymbol::monomial([0, 0], [1, 1], r(1.0)), r(0.15))
        .add_scaled(
            &multiply(&FourierTaylorSymbol::cos_mode([1, 0]), &one_plus_xi2, Caps::default()),
            r(0.2),
        )
        .add_scaled(&FourierTaylorSymbol::sin_mode([1, 1]), r(0.1))
}

pub fn benchmark1(epsilon: f64) -> FlowModel {
    FlowModel::new(benchmark1_p(), benchmark1_q(), epsilon).expect("benchmark1 is nondegenerate")
}

/// `benchmark1` with `q` replaced by its trajectory average `ξ₂ + 0.15ξ₁ξ₂`.
pub fn averaged1(epsilon: f64) -> FlowModel {
    let q = FourierTaylorSymbol::xi(2).add_scaled(&FourierTaylorSymbol::monomial([0, 0], [1, 1], r(1.0)), r(0.15));
    FlowModel::new(benchmark1_p(), q, epsilon).expect("averaged1 is nondegenerate")
}
