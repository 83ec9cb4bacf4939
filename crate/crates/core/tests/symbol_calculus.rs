mod common;

use common::{c, symbol};
use pfs_core::symbolkit::{
    moyal_conjugation_step, multiply, poisson_bracket, star_product, taylor_reciprocal, Caps, FourierTaylorSymbol,
    HSeries,
};
use proptest::prelude::*;

const BIG: Caps = Caps { k: 16, d: 16 };

fn close(a: &FourierTaylorSymbol, b: &FourierTaylorSymbol, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

/// Coefficients of `A # B` for series `A`, `B` in `h`, up to `h^order`.
fn series_star(a: &[FourierTaylorSymbol], b: &[FourierTaylorSymbol], order: usize) -> Vec<FourierTaylorSymbol> {
    let mut out = vec![FourierTaylorSymbol::zero(0, 0); order + 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if i + j > order {
                continue;
            }
            for (n, t) in star_product(ai, bj, (order - i - j) as u32, BIG).iter().enumerate() {
                out[i + j + n] = out[i + j + n].add(t);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_bilinear(a in symbol(2, 3), b in symbol(2, 3), d in symbol(2, 3), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let s = c(re, im);
        let lhs = poisson_bracket(&a.add_scaled(&b, s), &d, BIG);
        let rhs = poisson_bracket(&a, &d, BIG).add_scaled(&poisson_bracket(&b, &d, BIG), s);
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn bracket_is_antisymmetric(a in symbol(2, 3), b in symbol(2, 3)) {
        let ab = poisson_bracket(&a, &b, BIG);
        let ba = poisson_bracket(&b, &a, BIG);
        prop_assert!(ab.add(&ba).max_abs() <= 1e-13);
    }

    #[test]
    fn jacobi_identity(a in symbol(2, 2), b in symbol(2, 2), d in symbol(2, 2)) {
        let j = poisson_bracket(&a, &poisson_bracket(&b, &d, BIG), BIG)
            .add(&poisson_bracket(&b, &poisson_bracket(&d, &a, BIG), BIG))
            .add(&poisson_bracket(&d, &poisson_bracket(&a, &b, BIG), BIG));
        prop_assert!(j.max_abs() <= 1e-11);
    }

    #[test]
    fn leibniz_rule(a in symbol(2, 2), b in symbol(2, 2), d in symbol(2, 2)) {
        let lhs = poisson_bracket(&a, &multiply(&b, &d, BIG), BIG);
        let rhs = multiply(&poisson_bracket(&a, &b, BIG), &d, BIG).add(&multiply(&b, &poisson_bracket(&a, &d, BIG), BIG));
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn star_leading_terms(a in symbol(2, 3), b in symbol(2, 3)) {
        let s = star_product(&a, &b, 1, BIG);
        prop_assert!(close(&s[0], &multiply(&a, &b, BIG), 1e-13));
        prop_assert!(close(&s[1], &poisson_bracket(&a, &b, BIG).scale(c(0.0, -0.5)), 1e-13));
    }

    #[test]
    fn star_is_associative(a in symbol(1, 2), b in symbol(1, 2), d in symbol(1, 2)) {
        let order = 3;
        let ab = series_star(&[a.clone()], &[b.clone()], order);
        let bd = series_star(&[b], &[d.clone()], order);
        let left = series_star(&ab, &[d], order);
        let right = series_star(&[a], &bd, order);
        for (l, r) in left.iter().zip(&right) {
            prop_assert!(close(l, r, 1e-11));
        }
    }

    #[test]
    fn star_of_xi_symbols_commutes(a in symbol(0, 4), b in symbol(0, 4)) {
        let s = star_product(&a, &b, 4, BIG);
        prop_assert!(close(&s[0], &multiply(&a, &b, BIG), 1e-13));
        for t in &s[1..] {
            prop_assert!(t.max_abs() <= 1e-13);
        }
    }

    #[test]
    fn reciprocal_inverts(f in symbol(0, 3), d in 0u32..8) {
        let f = f.add(&FourierTaylorSymbol::constant(c(2.0, 0.0)));
        let g = taylor_reciprocal(&f, d).unwrap();
        let mut fg = multiply(&f, &g, Caps { k: 0, d });
        fg.set_xi_bound(d);
        prop_assert!(close(&fg, &FourierTaylorSymbol::constant(c(1.0, 0.0)), 1e-10));
    }

    #[test]
    fn conjugation_is_inverted_by_negated_generator(p in symbol(1, 2), a in symbol(1, 2), j in 0i32..2) {
        let order = 3;
        let s = HSeries::principal(p, order);
        let there = moyal_conjugation_step(&s, &a, j, order, BIG).unwrap();
        let back = moyal_conjugation_step(&there, &a.scale(c(-1.0, 0.0)), j, order, BIG).unwrap();
        prop_assert!(back.max_abs_diff(&s) <= 1e-10 * (1.0 + there.l1_norm()));
    }

    #[test]
    fn json_round_trip(a in symbol(3, 4)) {
        let text = serde_json::to_string(&a).unwrap();
        let back = FourierTaylorSymbol::from_json_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn conjugation_generator_at_h_minus_one_matches_lie_series() {
    // e^{ad_{h⁻¹a}} at h⁰ is the classical flow of a, i.e. the Lie series with t = 2/2i·... = −i
    let p = FourierTaylorSymbol::xi(1).add(&FourierTaylorSymbol::xi(2).scale(c(0.0, 0.1)));
    let a = FourierTaylorSymbol::cos_mode([1, 0]).scale(c(0.01, 0.0));
    let s = HSeries::principal(p.clone(), 0);
    let q = moyal_conjugation_step(&s, &a, -1, 0, BIG).unwrap();
    let lie = pfs_core::symbolkit::classical_lie_series(&p, &a, c(0.0, -1.0), BIG).unwrap();
    assert!(q.terms[0].max_abs_diff(&lie) < 1e-14);
}
