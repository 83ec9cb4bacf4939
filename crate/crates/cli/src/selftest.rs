//! Quick invariant checks on the configured model.

use num_complex::Complex64;
use pfs_core::barriertop::{harmonic_average, rescale, unscale, PhasePoly, ResonantSaddle};
use pfs_core::eiconal::iterate_schema;
use pfs_core::geomflow::{action_period_check, FlowOptions};
use pfs_core::lattice::FloquetData;
use pfs_core::models;
use pfs_core::scenario::Scenario;
use pfs_core::speccompare::match_points;
use pfs_core::symbolkit::{poisson_bracket, Caps, FourierTaylorSymbol, HSeries};
use pfs_core::torusquant::{eigs, sort_spectrum, weyl_matrix, QuantizationWindow};
use pfs_core::{Error, Result};
use serde::Serialize;

use crate::meta::Output;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
    }
}

fn bracket_checks(s: &Scenario) -> Vec<Check> {
    let caps = Caps { k: 16, d: 12 };
    let a = s.model.p.clone();
    let b = s.model.q.clone();
    let c = FourierTaylorSymbol::sin_mode([1, -1]).add(&FourierTaylorSymbol::xi(1));
    let ab = poisson_bracket(&a, &b, caps);
    let ba = poisson_bracket(&b, &a, caps);
    let anti = ab.add(&ba).max_abs();
    let j = poisson_bracket(&a, &poisson_bracket(&b, &c, caps), caps)
        .add(&poisson_bracket(&b, &poisson_bracket(&c, &a, caps), caps))
        .add(&poisson_bracket(&c, &ab, caps))
        .max_abs();
    vec![check("bracket_antisymmetry", anti, 1e-14), check("jacobi", j, 1e-12)]
}

fn spectrum(sym: FourierTaylorSymbol, w: &QuantizationWindow) -> Result<Vec<Complex64>> {
    let mut ev = eigs(&weyl_matrix(&HSeries::principal(sym, 0), w)?)?;
    sort_spectrum(&mut ev);
    Ok(ev)
}

fn oracle_checks(s: &Scenario) -> Result<Vec<Check>> {
    let h = 1.0 / 16.0;
    let eps = s.config.epsilon;
    let fl = FloquetData::default();
    let w = QuantizationWindow::new(8, h, &fl);

    let avg = models::averaged1(eps);
    let p0 = avg.principal_symbol();
    let ev = spectrum(p0.clone(), &w)?;
    let mut lattice: Vec<Complex64> = (0..w.dimension())
        .map(|i| {
            let k = w.mode(i);
            let xi = fl.xi(h, k);
            p0.eval_real([0.0, 0.0], xi)
        })
        .collect();
    sort_spectrum(&mut lattice);
    let m = match_points(&ev, &lattice);
    let exact = m.pairs.iter().map(|p| p.2).fold(0.0, f64::max)
        + if m.unmatched_a.is_empty() && m.unmatched_b.is_empty() { 0.0 } else { f64::INFINITY };

    let real = s.model.p.add(&s.model.q.scale(Complex64::new(eps, 0.0)));
    let herm = spectrum(real.clone(), &w)?.iter().map(|z| z.im.abs()).fold(0.0, f64::max);

    let shifted = FloquetData {
        s: fl.s,
        alpha0: [fl.alpha0[0] + 4, fl.alpha0[1] - 4],
    };
    let full = s.model.principal_symbol();
    let a = spectrum(full.clone(), &w)?;
    let b = spectrum(full, &QuantizationWindow::new(8, h, &shifted))?;
    let shift = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);

    Ok(vec![
        check("x_independent_lattice", exact, 1e-12),
        check("hermitian_at_eps0", herm, 1e-12),
        check("theta_integer_shift", shift, 1e-12),
    ])
}

fn barrier_checks() -> Result<Vec<Check>> {
    let mut cubic = PhasePoly::zero();
    for e in [[3, 0, 0, 0], [2, 1, 0, 0], [1, 2, 0, 0], [0, 3, 0, 0], [1, 0, 2, 0]] {
        cubic.add_term(e, 1.0);
    }
    let resonant = harmonic_average(&cubic, [1.0, 1.0])?;
    let saddle = ResonantSaddle {
        lambdas: [1.0, 2.0],
        k_res: Some([2, -1]),
        p3: PhasePoly::monomial([2, 1, 0, 0], 1.0),
        e0: 0.5,
    };
    let (eps, h) = (0.5, 1.0 / 1024.0);
    let r = rescale(&saddle, eps, h)?;
    let (back, e2, h2) = unscale(&r);
    let round = if back == saddle { (e2 - eps).abs().max((h2 - h).abs()) } else { f64::INFINITY };
    Ok(vec![
        check("resonant_cubic_average", resonant.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max), 0.0),
        check("rescale_round_trip", round, 0.0),
    ])
}

fn pipeline_checks(s: &Scenario) -> Result<Vec<Check>> {
    let nf = s.normal_form();
    let defect = match &nf {
        Ok(nf) => nf.defects.iter().copied().fold(0.0, f64::max),
        Err(e) => {
            log::warn!("normal form: {e}");
            f64::INFINITY
        }
    };
    let problem = s.eiconal_problem()?;
    let residual = iterate_schema(&problem, Complex64::new(0.0, 0.0))?.residual;
    let energies: Vec<f64> = (0..3).map(|i| 0.1 + 2e-4 * i as f64).collect();
    let rows = action_period_check(&models::benchmark1_p(), &energies, FlowOptions::default())?;
    let period = rows.iter().map(|r| r.defect).fold(0.0, f64::max);
    Ok(vec![
        check("bnf_defect", defect, 1e-10),
        check("eiconal_residual", residual, 1e-10),
        check("action_period", period, 1e-6),
    ])
}

pub fn checks(s: &Scenario) -> Result<Vec<Check>> {
    let mut out = bracket_checks(s);
    out.extend(oracle_checks(s)?);
    out.extend(barrier_checks()?);
    out.extend(pipeline_checks(s)?);
    Ok(out)
}

pub fn run(s: &Scenario, out: &Output) -> Result<()> {
    let checks = checks(s)?;
    out.json("selftest.json", None, &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Checks(failed.join(", ")))
    }
}

