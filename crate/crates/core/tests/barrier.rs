use num_complex::Complex64;
use pfs_core::barriertop::{
    common_frequency, harmonic_average, harmonic_flow, period, quadrature_average, rescale, unscale, PhasePoly,
    ResonantSaddle,
};
use proptest::prelude::*;

fn poly(max_deg: u32) -> impl Strategy<Value = PhasePoly> {
    let term = (0..=max_deg, 0..=max_deg, 0..=max_deg, 0..=max_deg, -1.0..1.0f64);
    proptest::collection::vec(term, 1..8).prop_map(move |ts| {
        let mut p = PhasePoly::zero();
        for (a, b, c, d, v) in ts {
            if a + b + c + d <= max_deg {
                p.add_term([a, b, c, d], v);
            }
        }
        p
    })
}

fn point() -> impl Strategy<Value = [f64; 4]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

fn lambdas() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![Just([1.0, 1.0]), Just([1.0, 2.0]), Just([2.0, 3.0]), Just([0.5, 1.5]), Just([1.0, 3.0])]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn averaging_is_idempotent(p in poly(4), l in lambdas()) {
        let a = harmonic_average(&p, l).unwrap();
        let aa = harmonic_average(&a, l).unwrap();
        prop_assert!(a.max_abs_diff(&aa) <= 1e-13);
    }

    #[test]
    fn average_is_flow_invariant(p in poly(4), l in lambdas(), rho in point(), t in 0.0..7.0f64) {
        let a = harmonic_average(&p, l).unwrap();
        let moved = harmonic_flow(l, rho, t);
        prop_assert!((a.eval(rho) - a.eval(moved)).abs() <= 1e-12);
    }

    #[test]
    fn odd_degrees_average_to_zero_at_equal_frequencies(p in poly(5)) {
        let mut odd = PhasePoly::zero();
        for (e, v) in p.terms() {
            if e.iter().sum::<u32>() % 2 == 1 {
                odd.add_term(*e, *v);
            }
        }
        prop_assert!(harmonic_average(&odd, [1.0, 1.0]).unwrap().is_zero());
    }

    #[test]
    fn rescale_round_trips(e in 0.05..0.9f64, h_exp in 4i32..20, l in lambdas(), e0 in -2.0..2.0f64) {
        let h = 2f64.powi(-h_exp);
        let saddle = ResonantSaddle { lambdas: l, k_res: None, p3: PhasePoly::monomial([3, 0, 0, 0], 1.0), e0 };
        let r = rescale(&saddle, e, h).unwrap();
        let (back, e2, h2) = unscale(&r);
        prop_assert_eq!(back, saddle);
        prop_assert!((e2 - e).abs() <= 2.0 * f64::EPSILON * e);
        prop_assert!((h2 - h).abs() <= 4.0 * f64::EPSILON * h);
    }
}

/// Twenty fixed random points; the symbolic average against Gauss–Legendre
/// quadrature over one period.
#[test]
fn quadrature_agrees_with_symbolic_average() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut p = PhasePoly::zero();
    for e in [[3, 0, 0, 0], [2, 1, 0, 0], [1, 0, 2, 0], [0, 2, 0, 1], [2, 2, 0, 0], [0, 0, 1, 3], [1, 1, 1, 1]] {
        p.add_term(e, rng.random_range(-1.0..1.0));
    }
    for l in [[1.0, 1.0], [1.0, 2.0], [2.0, 3.0]] {
        let a = harmonic_average(&p, l).unwrap();
        for _ in 0..20 {
            let rho = [0; 4].map(|_: i32| rng.random_range(-1.0..1.0));
            let q = quadrature_average(&p, l, rho).unwrap();
            assert!((a.eval(rho) - q).abs() <= 1e-10, "λ = {l:?}: {} vs {q}", a.eval(rho));
        }
    }
}

#[test]
fn one_two_resonance_of_x1_squared_x2() {
    let a = harmonic_average(&PhasePoly::monomial([2, 1, 0, 0], 1.0), [1.0, 2.0]).unwrap();
    for rho in [[0.3, -0.7, 0.2, 0.9], [1.0, 0.5, -0.5, 0.25], [-0.4, 0.1, 0.8, -0.6]] {
        let z1 = Complex64::new(rho[0], rho[2]);
        let z2 = Complex64::new(rho[1], rho[3]);
        let expect = (z1 * z1 * z2.conj()).re / 4.0;
        assert!((a.eval(rho) - expect).abs() <= 1e-15);
    }
}

#[test]
fn periods_and_frequencies() {
    assert_eq!(common_frequency([1.0, 2.0]).unwrap(), (1.0, [1, 2]));
    assert_eq!(common_frequency([2.0, 3.0]).unwrap(), (1.0, [2, 3]));
    assert!((period([0.5, 1.5]).unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-14);
    assert!(common_frequency([1.0, std::f64::consts::SQRT_2]).is_err());
}

#[test]
fn reduced_perturbation_factor() {
    let saddle = ResonantSaddle {
        lambdas: [1.0, 2.0],
        k_res: Some([2, -1]),
        p3: PhasePoly::monomial([2, 1, 0, 0], 1.0),
        e0: 0.0,
    };
    let r = rescale(&saddle, 0.1, 1e-3).unwrap();
    let f = Complex64::new(0.0, 0.1) * Complex64::from_polar(1.0, 0.75 * std::f64::consts::PI);
    assert!((r.perturbation_factor - f).norm() < 1e-17);
    // h^{1/4} ≈ 0.178 exceeds ε here
    assert!(!r.regime_ok);
    let direct = 1e-3 / (0.1 * 0.1);
    assert!((r.h_tilde - 0.1).abs() <= 2.0 * f64::EPSILON * 0.1);
    assert_eq!(r.h_tilde, direct);
}

#[test]
fn dyadic_h_tilde_is_exact() {
    let saddle = ResonantSaddle { lambdas: [1.0, 1.0], k_res: None, p3: PhasePoly::zero(), e0: 0.0 };
    let r = rescale(&saddle, 0.25, 1.0 / 1024.0).unwrap();
    assert_eq!(r.h_tilde, 1.0 / 64.0);
}
