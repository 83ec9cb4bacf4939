use num_complex::Complex64;
use pfs_core::eiconal::{
    compute_actions, iterate_schema, realify_actions, solve_family, solve_linearized, weighted_norm, EiconalProblem,
};
use pfs_core::models;
use pfs_core::symbolkit::{Caps, FourierTaylorSymbol};
use proptest::prelude::*;

const CAPS: Caps = Caps { k: 8, d: 10 };

fn unwrap(i: usize, n: usize) -> f64 {
    if i > n / 2 {
        i as f64 - n as f64
    } else {
        i as f64
    }
}

/// `sup ⟨k⟩^s |v̂(k)|`.
fn sobolev_sup(v: &[Complex64], n: usize, s: f64) -> f64 {
    let mut out = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (unwrap(i, n), unwrap(j, n));
            out = out.max((1.0 + k1 * k1 + k2 * k2).powf(s / 2.0) * v[i * n + j].norm());
        }
    }
    out
}

fn rhs(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(|v| {
        let mut v: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        v[0] = Complex64::new(0.0, 0.0);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linearized_inverse_gains_one_over_eps(v in rhs(8), eps in 0.01..0.5f64, s in 0.0..3.0f64) {
        let n = 8;
        let u = solve_linearized(&v, n, eps).unwrap();
        prop_assert!(eps * weighted_norm(&u, n, eps, s) <= (1.0 + 1e-12) * sobolev_sup(&v, n, s));
        for i in 0..n {
            for j in 0..n {
                let (k1, k2) = (unwrap(i, n), unwrap(j, n));
                let back = u[i * n + j] * Complex64::new(0.0, 1.0) * Complex64::new(k1, eps * k2);
                prop_assert!((back - v[i * n + j]).norm() <= 1e-13);
            }
        }
    }
}

#[test]
fn single_mode_divisor() {
    let n = 8;
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    v[1] = Complex64::new(1.0, 0.0);
    let u = solve_linearized(&v, n, 0.1).unwrap();
    assert!((u[1] - Complex64::new(-10.0, 0.0)).norm() < 1e-14);
}

#[test]
fn benchmark_solution_and_actions() {
    let eps = 0.1;
    let p = EiconalProblem::from_model(&models::benchmark1(eps), None, None, 32, CAPS).unwrap();
    assert!((p.epsilon_tilde - eps.sqrt()).abs() < 1e-15);
    let s = iterate_schema(&p, Complex64::new(0.0, 0.0)).unwrap();
    assert!(s.residual <= 1e-10, "{}", s.residual);
    assert!(s.contraction <= p.contraction_scale(), "{} vs {}", s.contraction, p.contraction_scale());
    let act = compute_actions(&s, &p).unwrap();
    assert!(act.mismatch <= 1e-8);

    let r = realify_actions(&p).unwrap();
    assert!(r.actions.i1.im.abs() <= 1e-10 && r.actions.i2.im.abs() <= 1e-10);
    assert!(r.solution.residual <= 1e-10);
    assert!(r.scaled_a < 0.1, "{}", r.scaled_a);
}

#[test]
fn realified_a_moves_linearly_with_the_remainder() {
    let eps = 0.1;
    let model = models::benchmark1(eps);
    let r = FourierTaylorSymbol::cos_mode([0, 1])
        .add(&FourierTaylorSymbol::monomial([1, 0], [1, 0], Complex64::new(0.5, 0.0)))
        .scale(Complex64::new(eps * eps, 0.0));
    let a_star = |r: Option<&FourierTaylorSymbol>| {
        let p = EiconalProblem::from_model(&model, r, None, 32, CAPS).unwrap();
        realify_actions(&p).unwrap().a_star
    };
    let a0 = a_star(None);
    let a1 = a_star(Some(&r));
    let a2 = a_star(Some(&r.scale(Complex64::new(1.1, 0.0))));
    let ratio = (a2 - a1).norm() / (a1 - a0).norm();
    assert!((0.05..0.2).contains(&ratio), "{ratio}");
    let et = eps.sqrt();
    assert!((a2 - a1).norm() * et <= 0.1 * eps / et, "{}", (a2 - a1).norm());
}

#[test]
fn family_point_at_origin() {
    let eps = 0.1;
    let p = EiconalProblem::from_model(&models::benchmark1(eps), None, None, 32, CAPS).unwrap();
    let f = solve_family(&p, &[[0.0, 0.0]]).pop().unwrap().unwrap();
    assert_eq!(f.leading, Complex64::new(0.0, 0.0));
    let d = (f.p_tilde - f.leading).norm();
    assert!(d <= 0.1 * eps * eps, "{d}");
    assert!(f.xi_shift[0] <= 1.0 * eps && f.xi_shift[1] <= 1.0 * eps, "{:?}", f.xi_shift);
}
