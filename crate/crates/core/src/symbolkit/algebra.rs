//! Products, brackets and Moyal calculus for [`FourierTaylorSymbol`].
//!
//! Everything here is built on one bidifferential operator,
//!
//! ```text
//! T_n(a, b) = Σ_{|γ|+|δ|=n} (−1)^{|δ|} / (γ! δ!) · (∂_ξ^γ ∂_x^δ a)(∂_x^γ ∂_ξ^δ b),
//! ```
//!
//! so that `T_0` is the pointwise product, `T_1` the Poisson bracket
//! `{a,b} = ∂_ξa·∂_xb − ∂_xa·∂_ξb`, and the Weyl product reads
//! `a # b = Σ_n (h/2i)^n T_n(a, b)`. This is the product for which
//! `Op(ξ) = hD_x` and `Op(a)Op(b) = Op(a # b)` on the torus.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::poly::{self, factorial, n_monomials, ZERO};
use super::symbol::{mode_factor, Caps, FourierTaylorSymbol, Mode, MultiIndex, Truncation};
use super::SymbolError;

/// Mode-pair count above which products are evaluated on an FFT grid.
const GRID_PAIRS: usize = 2500;

/// Divisors smaller than this at `ξ = 0` are treated as vanishing.
pub const DIVISOR_FLOOR: f64 = 1e-10;

fn multi_indices(order: u32) -> Vec<MultiIndex> {
    (0..=order).map(|a2| [order - a2, a2]).collect()
}

fn inv_factorial(m: MultiIndex) -> f64 {
    1.0 / (factorial(m[0]) * factorial(m[1]))
}

/// `T_n(a, b)` truncated to `caps`.
pub fn bidifferential(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    n: u32,
    caps: Caps,
) -> FourierTaylorSymbol {
    bidifferential_skipping(a, b, n, caps, 0.0)
}

/// [`bidifferential`], skipping every pair of modes whose contribution is
/// bounded by `skip` in ℓ¹. The skipped mass is recorded as pruned.
pub fn bidifferential_skipping(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    n: u32,
    caps: Caps,
    skip: f64,
) -> FourierTaylorSymbol {
    bidifferential_impl(a, b, n, caps, skip, true)
}

fn grid_combos(n: u32) -> Vec<(MultiIndex, MultiIndex, f64)> {
    (0..=n)
        .flat_map(|g| {
            let d = n - g;
            multi_indices(g).into_iter().flat_map(move |gamma| {
                multi_indices(d).into_iter().map(move |delta| {
                    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                    (gamma, delta, sign * inv_factorial(gamma) * inv_factorial(delta))
                })
            })
        })
        .collect()
}

fn bidifferential_impl(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    n: u32,
    caps: Caps,
    skip: f64,
    allow_grid: bool,
) -> FourierTaylorSymbol {
    let da = a.xi_degree_bound();
    let db = b.xi_degree_bound();
    let k_res = (a.x_degree_bound() + b.x_degree_bound()).min(caps.k);
    if n > da + db {
        let mut z = FourierTaylorSymbol::zero(k_res, 0);
        z.set_truncation(a.truncation().merge(b.truncation()));
        return z;
    }
    let pairs = a.modes().count() * b.modes().count();
    if allow_grid && pairs >= GRID_PAIRS && a.x_degree_bound() > 0 && b.x_degree_bound() > 0 {
        return super::grid::bidifferential_grid(a, b, n, caps, &grid_combos(n));
    }
    let d_res = (da + db - n).min(caps.d);
    let len = n_monomials(d_res);

    // ∂_ξ^γ of every mode of `a`, for |γ| ≤ n, and ∂_ξ^δ of every mode of `b`.
    let gammas: Vec<Vec<MultiIndex>> = (0..=n).map(multi_indices).collect();
    let a_der: Vec<(Mode, Vec<Vec<Vec<Complex64>>>)> = a
        .modes()
        .map(|(m, p)| {
            let per_order = gammas
                .iter()
                .map(|gs| gs.iter().map(|g| poly::derivative(p, *g)).collect())
                .collect();
            (*m, per_order)
        })
        .collect();
    let b_der: Vec<(Mode, Vec<Vec<Vec<Complex64>>>)> = b
        .modes()
        .map(|(m, p)| {
            let per_order = gammas
                .iter()
                .map(|gs| gs.iter().map(|g| poly::derivative(p, *g)).collect())
                .collect();
            (*m, per_order)
        })
        .collect();

    let mut out: BTreeMap<Mode, Vec<Complex64>> = BTreeMap::new();
    let mut trunc = a.truncation().merge(b.truncation());
    let mut q = vec![ZERO; n_monomials(db)];
    let na: Vec<f64> = a.modes().map(|(_, p)| p.iter().map(|c| c.norm()).sum()).collect();
    let nb: Vec<f64> = b.modes().map(|(_, p)| p.iter().map(|c| c.norm()).sum()).collect();
    let mut skipped = 0.0;

    for ((ma, a_ders), na) in a_der.iter().zip(&na) {
        for ((mb, b_ders), nb) in b_der.iter().zip(&nb) {
            if skip > 0.0 {
                let reach = (ma[0].abs() + ma[1].abs() + mb[0].abs() + mb[1].abs()) as f64
                    + (da + db) as f64;
                let bound = na * nb * reach.powi(n as i32);
                if bound < skip {
                    skipped += bound;
                    continue;
                }
            }
            let m = [ma[0] + mb[0], ma[1] + mb[1]];
            let overflow = m[0].abs().max(m[1].abs()) > k_res;
            for g_ord in 0..=n {
                let d_ord = n - g_ord;
                // (i·mb)^γ vanishes for mb = 0 unless γ = 0, likewise for ma.
                if (g_ord > 0 && *mb == [0, 0]) || (d_ord > 0 && *ma == [0, 0]) {
                    continue;
                }
                // Q = Σ_{|δ| = d_ord} (−1)^{|δ|}/δ! (i·ma)^δ ∂_ξ^δ b_mb
                let deltas = &gammas[d_ord as usize];
                let sign = if d_ord % 2 == 0 { 1.0 } else { -1.0 };
                let qlen = b_ders[d_ord as usize]
                    .iter()
                    .map(|v| v.len())
                    .max()
                    .unwrap_or(0);
                if qlen == 0 {
                    continue;
                }
                q[..qlen].iter_mut().for_each(|v| *v = ZERO);
                let mut q_any = false;
                for (di, delta) in deltas.iter().enumerate() {
                    let f = mode_factor(*ma, *delta) * (sign * inv_factorial(*delta));
                    if f == ZERO {
                        continue;
                    }
                    for (qv, bv) in q.iter_mut().zip(b_ders[d_ord as usize][di].iter()) {
                        *qv += f * bv;
                    }
                    q_any = true;
                }
                if !q_any {
                    continue;
                }
                for (gi, gamma) in gammas[g_ord as usize].iter().enumerate() {
                    let pa = &a_ders[g_ord as usize][gi];
                    if pa.is_empty() {
                        continue;
                    }
                    let f = mode_factor(*mb, *gamma) * inv_factorial(*gamma);
                    if f == ZERO {
                        continue;
                    }
                    if overflow {
                        let bound = poly::degree_norms(pa).iter().sum::<f64>()
                            * poly::degree_norms(&q[..qlen]).iter().sum::<f64>()
                            * f.norm();
                        trunc.x_overflow = trunc.x_overflow.max(bound);
                        continue;
                    }
                    let acc = out.entry(m).or_insert_with(|| vec![ZERO; len]);
                    let lost = poly::mul_acc(pa, &q[..qlen], d_res, f, acc);
                    if lost > 0.0 {
                        trunc.xi_overflow = trunc.xi_overflow.max(lost);
                    }
                }
            }
        }
    }
    if skipped > 0.0 {
        trunc.pruned = trunc.pruned.max(skipped);
    }
    FourierTaylorSymbol::from_mode_map(k_res, d_res, out, trunc)
}

/// Pointwise product, truncated to `(K_a+K_b, D_a+D_b)` capped by `caps`.
pub fn multiply(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    caps: Caps,
) -> FourierTaylorSymbol {
    bidifferential(a, b, 0, caps)
}

/// `{a, b} = ∂_ξa·∂_xb − ∂_xa·∂_ξb`.
pub fn poisson_bracket(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    caps: Caps,
) -> FourierTaylorSymbol {
    bidifferential(a, b, 1, caps)
}

/// Coefficients of `h^0 … h^order` in the Weyl product `a # b`.
pub fn star_product(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    order: u32,
    caps: Caps,
) -> Vec<FourierTaylorSymbol> {
    let c = Complex64::new(0.0, -0.5); // 1/(2i)
    (0..=order)
        .map(|n| bidifferential(a, b, n, caps).scale(c.powu(n)))
        .collect()
}

/// Coefficients of `h^0 … h^order` in the symbol of `(1/h)[Op(a), Op(b)]`.
///
/// Only even powers of `h` occur; the leading one is `(1/i){a, b}`.
pub fn commutator_over_h(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    order: u32,
    caps: Caps,
) -> Vec<FourierTaylorSymbol> {
    let c = Complex64::new(0.0, -0.5);
    let mut out = vec![FourierTaylorSymbol::zero(0, 0); order as usize + 1];
    let mut n = 1;
    while n - 1 <= order {
        out[(n - 1) as usize] = bidifferential(a, b, n, caps).scale(c.powu(n) * 2.0);
        n += 2;
    }
    out
}

/// Power-series reciprocal of an x-independent symbol up to ξ-degree `degree`.
pub fn taylor_reciprocal(
    f: &FourierTaylorSymbol,
    degree: u32,
) -> Result<FourierTaylorSymbol, SymbolError> {
    taylor_reciprocal_with_floor(f, degree, DIVISOR_FLOOR)
}

pub fn taylor_reciprocal_with_floor(
    f: &FourierTaylorSymbol,
    degree: u32,
    floor: f64,
) -> Result<FourierTaylorSymbol, SymbolError> {
    if !f.is_x_independent() {
        return Err(SymbolError::NotXIndependent("taylor_reciprocal"));
    }
    let p = f.mode_poly([0, 0]).unwrap_or(&[]);
    let f0 = p.first().copied().unwrap_or(ZERO);
    if f0.norm() < floor {
        return Err(SymbolError::VanishingDivisor {
            value: f0.norm(),
            floor,
        });
    }
    let g = poly::reciprocal(p, degree);
    let mut modes = BTreeMap::new();
    modes.insert([0, 0], g);
    Ok(FourierTaylorSymbol::from_mode_map(
        0,
        degree,
        modes,
        Truncation::default(),
    ))
}

/// Classical Lie series `Σ_k t^k/k! {g, ·}^k f`, i.e. `f ∘ exp(t H_g)`.
pub fn classical_lie_series(
    f: &FourierTaylorSymbol,
    g: &FourierTaylorSymbol,
    t: Complex64,
    caps: Caps,
) -> Result<FourierTaylorSymbol, SymbolError> {
    let mut result = f.clone();
    let mut term = f.clone();
    for k in 1..=LIE_MAX_TERMS {
        let floor = LIE_PRUNE * result.l1_norm();
        term = bidifferential_skipping(g, &term, 1, caps, floor * k as f64 / t.norm())
            .scale(t / k as f64);
        term.prune(floor);
        result.axpy(&term, Complex64::new(1.0, 0.0));
        let tn = term.l1_norm();
        if tn == 0.0 || tn <= LIE_TOLERANCE * result.l1_norm().max(1.0) {
            return Ok(result);
        }
    }
    Err(SymbolError::LieSeriesDiverged {
        terms: LIE_MAX_TERMS,
        last_norm: term.l1_norm(),
    })
}

pub(crate) const LIE_MAX_TERMS: usize = 120;
pub(crate) const LIE_TOLERANCE: f64 = 1e-19;
/// Coefficients of a Lie-series term below this fraction of the running
/// sum's ℓ¹ norm are dropped.
pub(crate) const LIE_PRUNE: f64 = 1e-20;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn symbol_strategy(k: i32, d: u32) -> impl Strategy<Value = FourierTaylorSymbol> {
        let term = (-k..=k, -k..=k, 0..=d, 0..=d, -1.0..1.0f64, -1.0..1.0f64);
        proptest::collection::vec(term, 1..12).prop_map(move |ts| {
            let mut s = FourierTaylorSymbol::zero(k, d);
            for (m1, m2, a1, a2, re, im) in ts {
                if a1 + a2 <= d {
                    s.add_term([m1, m2], [a1, a2], c(re, im));
                }
            }
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn grid_matches_direct(
            a in symbol_strategy(3, 3),
            b in symbol_strategy(3, 3),
            n in 0u32..4,
        ) {
            let caps = Caps { k: 8, d: 8 };
            let direct = bidifferential_impl(&a, &b, n, caps, 0.0, false);
            let grid = super::super::grid::bidifferential_grid(&a, &b, n, caps, &grid_combos(n));
            let scale = a.l1_norm() * b.l1_norm() * 6f64.powi(n as i32);
            prop_assert!(direct.max_abs_diff(&grid) <= 1e-13 * scale.max(1.0));
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn xi1_times_xi2() {
        let p = multiply(
            &FourierTaylorSymbol::xi(1),
            &FourierTaylorSymbol::xi(2),
            Caps::default(),
        );
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coeff([0, 0], [1, 1]), c(1.0, 0.0));
    }

    #[test]
    fn inverse_modes_cancel() {
        let p = multiply(
            &FourierTaylorSymbol::exp_mode([1, 0]),
            &FourierTaylorSymbol::exp_mode([-1, 0]),
            Caps::default(),
        );
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coeff([0, 0], [0, 0]), c(1.0, 0.0));
    }

    #[test]
    fn product_truncation_is_flagged() {
        let one = FourierTaylorSymbol::constant(c(1.0, 0.0));
        let a = one.add(&FourierTaylorSymbol::xi(1));
        let b = one.sub(&FourierTaylorSymbol::xi(1));
        let p = multiply(&a, &b, Caps { k: 8, d: 1 });
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coeff([0, 0], [0, 0]), c(1.0, 0.0));
        assert!(p.truncation().xi_overflow >= 1.0);
        assert_eq!(p.truncation().x_overflow, 0.0);
    }

    #[test]
    fn bracket_xi1_with_mode() {
        let b = poisson_bracket(
            &FourierTaylorSymbol::xi(1),
            &FourierTaylorSymbol::exp_mode([1, 0]),
            Caps::default(),
        );
        assert!((b.coeff([1, 0], [0, 0]) - c(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(b.num_terms(), 1);
    }

    #[test]
    fn bracket_with_damped_transport() {
        // {ξ₁ + iεξ₂, e^{i(x₁+x₂)}} = (i − ε) e^{i(x₁+x₂)} at ε = 0.1
        let eps = 0.1;
        let a = FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), c(0.0, eps));
        let b = poisson_bracket(&a, &FourierTaylorSymbol::exp_mode([1, 1]), Caps::default());
        assert!((b.coeff([1, 1], [0, 0]) - c(-0.1, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn reciprocal_examples() {
        let two = FourierTaylorSymbol::constant(c(2.0, 0.0));
        let g = taylor_reciprocal(&two, 3).unwrap();
        assert_eq!(g.coeff([0, 0], [0, 0]), c(0.5, 0.0));
        assert_eq!(g.num_terms(), 1);

        let f = FourierTaylorSymbol::constant(c(-0.1, 1.0));
        let g = taylor_reciprocal(&f, 2).unwrap();
        let expect = c(-0.1, -1.0) / 1.01;
        assert!((g.coeff([0, 0], [0, 0]) - expect).norm() < 1e-15);

        let one_plus = FourierTaylorSymbol::constant(c(1.0, 0.0)).add(&FourierTaylorSymbol::xi(1));
        let g = taylor_reciprocal(&one_plus, 2).unwrap();
        assert_eq!(g.coeff([0, 0], [0, 0]), c(1.0, 0.0));
        assert_eq!(g.coeff([0, 0], [1, 0]), c(-1.0, 0.0));
        assert_eq!(g.coeff([0, 0], [2, 0]), c(1.0, 0.0));
    }

    #[test]
    fn reciprocal_rejects_vanishing_and_x_dependent() {
        assert!(matches!(
            taylor_reciprocal(&FourierTaylorSymbol::xi(1), 2),
            Err(SymbolError::VanishingDivisor { .. })
        ));
        assert!(matches!(
            taylor_reciprocal(&FourierTaylorSymbol::exp_mode([1, 0]), 2),
            Err(SymbolError::NotXIndependent(_))
        ));
    }

    #[test]
    fn star_leading_orders() {
        // ξ₁ # e^{ix₁} = ξ₁e^{ix₁} + (h/2i)·{ξ₁, e^{ix₁}} = ξ₁e^{ix₁} + (h/2)e^{ix₁}
        let s = star_product(
            &FourierTaylorSymbol::xi(1),
            &FourierTaylorSymbol::exp_mode([1, 0]),
            2,
            Caps::default(),
        );
        assert_eq!(s[0].coeff([1, 0], [1, 0]), c(1.0, 0.0));
        assert!((s[1].coeff([1, 0], [0, 0]) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(s[2].is_zero());
    }
}
