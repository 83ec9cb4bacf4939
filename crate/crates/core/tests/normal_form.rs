use num_complex::Complex64;
use pfs_core::birkhoff::{normal_form, normal_form_full, NormalFormResult, PrincipalOptions};
use pfs_core::eiconal::{solve_family, EiconalProblem};
use pfs_core::models;
use pfs_core::symbolkit::{Caps, FourierTaylorSymbol, HSeries};

const CAPS: Caps = Caps { k: 8, d: 10 };

fn benchmark_nf(eps: f64, order: usize) -> NormalFormResult {
    let p = HSeries::principal(models::benchmark1(eps).principal_symbol(), order);
    normal_form_full(&p, order, eps, CAPS, PrincipalOptions::default()).unwrap()
}

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[test]
fn principal_term_agrees_with_the_eiconal_family() {
    let etas = [[0.0, 0.0], [0.05, -0.03], [-0.1, 0.1], [0.08, 0.06]];
    for eps in [0.05, 0.1, 0.2] {
        let nf = benchmark_nf(eps, 0);
        let problem = EiconalProblem::from_model(&models::benchmark1(eps), None, None, 32, CAPS).unwrap();
        for (eta, f) in etas.iter().zip(solve_family(&problem, &etas)) {
            let f = f.unwrap();
            let z = nf.p_tilde[0].eval_xi([r(eta[0]), r(eta[1])]);
            assert!((z - f.p_tilde).norm() <= 1e-12, "ε = {eps}, η = {eta:?}: {z} vs {}", f.p_tilde);
        }
    }
}

#[test]
fn benchmark_defects_and_odd_orders() {
    let nf = benchmark_nf(0.1, 3);
    assert_eq!(nf.p_tilde.len(), 4);
    for d in &nf.defects {
        assert!(*d <= 1e-10, "{:?}", nf.defects);
    }
    assert!(nf.p_tilde[1].is_zero());
    assert!(nf.p_tilde[3].is_zero());
    assert!(nf.generators[0].is_zero());
    assert!(nf.p_tilde.iter().all(|p| p.is_x_independent()));
}

#[test]
fn benchmark_frozen_values() {
    let nf = benchmark_nf(0.1, 3);
    let at = |n: usize, xi: [f64; 2]| nf.p_tilde[n].eval_xi([r(xi[0]), r(xi[1])]);
    let frozen = [
        (0, [0.0, 0.0], Complex64::new(-7.47058765170939565e-5, 2.20180307492298614e-6)),
        (0, [0.05, -0.03], Complex64::new(5.06829067808248976e-2, -3.02054262795864751e-3)),
        (2, [0.0, 0.0], Complex64::new(-6.68636647333057651e-6, 3.25163402801958976e-7)),
        (2, [0.05, -0.03], Complex64::new(-5.66171294094878646e-6, 2.69307313479069356e-7)),
    ];
    for (n, xi, v) in frozen {
        assert!((at(n, xi) - v).norm() <= 1e-12 * v.norm().max(1e-3), "p̃{n}({xi:?}) = {}", at(n, xi));
    }
}

#[test]
fn triangular_perturbation_leaves_the_lattice() {
    // Op(e^{ix₂}) shifts k₂ upwards, so ξ₁ + iεξ₂ + h e^{ix₂} is triangular
    // with the unperturbed diagonal; every correction must vanish.
    let eps = 0.1;
    let p0 = FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), Complex64::new(0.0, eps));
    let p = HSeries::from_terms(vec![
        p0.clone(),
        FourierTaylorSymbol::exp_mode([0, 1]),
        FourierTaylorSymbol::zero(0, 0),
        FourierTaylorSymbol::zero(0, 0),
    ]);
    let nf = normal_form(&p, 3, eps, Caps::default()).unwrap();
    assert_eq!(nf.p_tilde[0], p0);
    for t in &nf.p_tilde[1..] {
        assert!(t.max_abs() <= 1e-15);
    }
    let a0 = &nf.generators[0];
    // H_{p0} a₀ = −e^{ix₂} has the divisor i·iε = −ε
    assert!((a0.coeff([0, 1], [0, 0]).norm() - 10.0).abs() <= 1e-12, "{}", a0.coeff([0, 1], [0, 0]));
}
