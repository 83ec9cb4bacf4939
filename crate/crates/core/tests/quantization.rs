mod common;

use common::{c, symbol, xi_symbol};
use num_complex::Complex64;
use pfs_core::birkhoff::normal_form;
use pfs_core::lattice::{default_k_box, quasi_eigenvalues, FloquetData, SpectralRectangle};
use pfs_core::models;
use pfs_core::speccompare::least_squares_slope;
use pfs_core::symbolkit::{star_product, Caps, FourierTaylorSymbol, HSeries};
use pfs_core::torusquant::{eigs, sort_spectrum, weyl_matrix, QuantizationWindow};
use proptest::prelude::*;

fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
    sort_spectrum(&mut v);
    v
}

fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn spectrum(p: &FourierTaylorSymbol, w: &QuantizationWindow) -> Vec<Complex64> {
    eigs(&weyl_matrix(&HSeries::principal(p.clone(), 0), w).unwrap()).unwrap()
}

/// `max |(AB − C)_{lk}|` over rows and columns at least `margin` inside the window.
fn interior_defect(
    a: &faer::Mat<Complex64>,
    b: &faer::Mat<Complex64>,
    c: &faer::Mat<Complex64>,
    w: &QuantizationWindow,
    margin: i32,
) -> f64 {
    let ab = a * b;
    let inner = |i: usize| {
        let k = w.mode(i);
        k[0].abs() <= w.m - margin && k[1].abs() <= w.m - margin
    };
    let n = w.dimension();
    let mut worst = 0.0f64;
    for j in (0..n).filter(|j| inner(*j)) {
        for i in (0..n).filter(|i| inner(*i)) {
            worst = worst.max((ab[(i, j)] - c[(i, j)]).norm());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn x_independent_symbols_reproduce_the_lattice(p in xi_symbol(3), s1 in -1.0..1.0f64, a0 in -3i32..4) {
        let h = 1.0 / 8.0;
        let fl = FloquetData { s: [s1, 0.0], alpha0: [a0, 1] };
        let w = QuantizationWindow::new(6, h, &fl);
        let t = w.theta;
        let lattice: Vec<Complex64> = (0..w.dimension())
            .map(|i| {
                let k = w.mode(i);
                p.eval_real([0.0, 0.0], [h * (k[0] as f64 + t[0]), h * (k[1] as f64 + t[1])])
            })
            .collect();
        prop_assert!(max_dist(&spectrum(&p, &w), &sorted(lattice)) <= 1e-12);
    }

    #[test]
    fn real_symbols_have_real_spectra(p in symbol(2, 2)) {
        // p + p̄ is real-valued, so Op is Hermitian
        let mut conj = FourierTaylorSymbol::zero(2, 2);
        for (m, a, v) in p.terms() {
            conj.add_term([-m[0], -m[1]], a, v.conj());
        }
        let real = p.add(&conj);
        let w = QuantizationWindow::new(5, 0.1, &FloquetData::default());
        let im = spectrum(&real, &w).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        prop_assert!(im <= 1e-12 * (1.0 + real.l1_norm()));
    }

    #[test]
    fn lattice_lies_in_rectangle_in_order(eps in 0.05..0.3f64, inv_h in 8u32..40) {
        let h = 1.0 / inv_h as f64;
        let nf = normal_form(&HSeries::principal(models::averaged1(eps).principal_symbol(), 0), 0, eps, Caps::default()).unwrap();
        let fl = FloquetData::default();
        let rect = SpectralRectangle::new(0.15, 0.0, 0.15).unwrap();
        let kb = default_k_box(&nf, h, &fl, &rect).unwrap();
        let pts = quasi_eigenvalues(&nf, h, &fl, &rect, kb).unwrap();
        prop_assert!(pts.windows(2).all(|w| w[0].k < w[1].k));
        for p in &pts {
            prop_assert!(rect.contains(p.z, eps));
            prop_assert!(p.k[0].abs() < kb && p.k[1].abs() < kb);
        }
        // a larger box finds the same points
        let more = quasi_eigenvalues(&nf, h, &fl, &rect, 2 * kb).unwrap();
        prop_assert_eq!(more, pts);
    }
}

#[test]
fn transport_lattice_is_h_k_plus_theta() {
    let eps = 0.1;
    let p0 = FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), c(0.0, eps));
    let nf = normal_form(&HSeries::principal(p0, 0), 0, eps, Caps::default()).unwrap();
    let h = 1.0 / 16.0;
    let fl = FloquetData { s: [0.0, 0.0], alpha0: [1, 2] };
    let rect = SpectralRectangle::new(0.15, 0.0, 0.15).unwrap();
    let kb = default_k_box(&nf, h, &fl, &rect).unwrap();
    let t = fl.theta(h);
    for p in quasi_eigenvalues(&nf, h, &fl, &rect, kb).unwrap() {
        let expect = c(h * (p.k[0] as f64 + t[0]), eps * h * (p.k[1] as f64 + t[1]));
        assert_eq!(p.z, expect);
    }
}

#[test]
fn integer_theta_shift_leaves_the_spectrum() {
    let h = 1.0 / 16.0;
    let p = models::benchmark1(0.1).principal_symbol();
    let base = FloquetData { s: [0.3, -0.2], alpha0: [1, 0] };
    let a = spectrum(&p, &QuantizationWindow::new(8, h, &base));
    for shifted in [
        FloquetData { s: base.s, alpha0: [5, -4] },
        FloquetData { s: [0.3 + std::f64::consts::TAU * h, -0.2], alpha0: [1, 0] },
    ] {
        let b = spectrum(&p, &QuantizationWindow::new(8, h, &shifted));
        assert!(max_dist(&a, &b) <= 1e-12, "{}", max_dist(&a, &b));
    }
}

#[test]
fn benchmark_at_eps_zero_is_hermitian() {
    let m = models::benchmark1(0.1);
    let real = m.p.add(&m.q.scale(c(0.1, 0.0)));
    let w = QuantizationWindow::new(12, 1.0 / 24.0, &FloquetData::default());
    let im = spectrum(&real, &w).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    assert!(im <= 1e-12, "{im}");
}

fn composition_defect(a: &FourierTaylorSymbol, b: &FourierTaylorSymbol, order: usize, h: f64) -> f64 {
    let caps = Caps { k: 8, d: 12 };
    let w = QuantizationWindow::new(10, h, &FloquetData { s: [0.0, 0.0], alpha0: [1, 1] });
    let opa = weyl_matrix(&HSeries::principal(a.clone(), 0), &w).unwrap();
    let opb = weyl_matrix(&HSeries::principal(b.clone(), 0), &w).unwrap();
    let ab = HSeries::from_terms(star_product(a, b, order as u32, caps));
    let opab = weyl_matrix(&ab, &w).unwrap();
    interior_defect(&opa, &opb, &opab, &w, 4)
}

fn composition_pair() -> (FourierTaylorSymbol, FourierTaylorSymbol) {
    let a = FourierTaylorSymbol::cos_mode([1, 0])
        .add(&FourierTaylorSymbol::monomial([0, 1], [2, 0], c(0.5, 0.2)))
        .add(&FourierTaylorSymbol::xi(1));
    let b = FourierTaylorSymbol::sin_mode([1, 1])
        .add(&FourierTaylorSymbol::monomial([-1, 0], [1, 1], c(0.3, 0.0)))
        .add(&FourierTaylorSymbol::monomial([0, 0], [0, 2], c(1.0, 0.0)));
    (a, b)
}

#[test]
fn composition_defect_has_order_n_plus_one() {
    let (a, b) = composition_pair();
    let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    for order in [0usize, 1, 2] {
        let d: Vec<f64> = hs.iter().map(|h| composition_defect(&a, &b, order, *h)).collect();
        let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        let slope = least_squares_slope(&x, &y);
        assert!(slope >= order as f64 + 0.5, "N = {order}: slope {slope}, defects {d:?}");
    }
}

#[test]
fn composition_is_exact_at_full_order() {
    let (a, b) = composition_pair();
    let d = composition_defect(&a, &b, 4, 1.0 / 16.0);
    assert!(d <= 1e-12, "{d}");
}
