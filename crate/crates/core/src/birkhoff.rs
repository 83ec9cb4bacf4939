//! Quantum Birkhoff normal form on `T*T²`.
//!
//! The operator symbol is conjugated by `e^{A}` with `A = Σ h^j Op(a_j)` so
//! that every retained coefficient in `h` becomes independent of `x`.
//!
//! Two stages are used. When the principal symbol itself depends on `x`
//! (as for `p + iεq`), it is first normalized by generators entering at
//! `h^{-1}`; these act as classical canonical transformations and are found
//! by a Newton iteration, each step solving a cohomological equation for the
//! current average. The lower-order coefficients `h^1 … h^N` are then removed
//! one order at a time with generators `a_n` entering at `h^n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolkit::{
    moyal_conjugation_step, multiply, taylor_reciprocal, Caps, FourierTaylorSymbol, HSeries,
    Truncation,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Solves `H_{p0} a = b − ⟨b⟩` with `⟨a⟩ = 0`, dividing each mode by
/// `i m·∂_ξ p0(ξ)` re-expanded around `ξ = 0` to degree `caps.d`.
pub fn cohomological_solve(
    p0: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    caps: Caps,
) -> Result<FourierTaylorSymbol> {
    if !p0.is_x_independent() {
        return Err(Error::Invalid(
            "cohomological_solve needs an x-independent p0".into(),
        ));
    }
    let grad = [p0.derivative([1, 0], [0, 0]), p0.derivative([0, 1], [0, 0])];
    let k = b.x_degree_bound().min(caps.k);
    let mut out = FourierTaylorSymbol::zero(k, caps.d);
    for (m, bm) in b.modes() {
        if *m == [0, 0] {
            continue;
        }
        let div = grad[0]
            .scale(I * m[0] as f64)
            .add_scaled(&grad[1], I * m[1] as f64);
        let inv = taylor_reciprocal(&div, caps.d).map_err(|e| Error::Divisor {
            module: "birkhoff",
            order: 0,
            mode: *m,
            source: e,
        })?;
        let bsym = crate::geomflow::single_mode(*m, bm);
        out.axpy(&multiply(&bsym, &inv, Caps { k, d: caps.d }), ONE);
    }
    Ok(out)
}

/// Estimated Taylor radius of `1/(i m·∂_ξ p0)` for every mode of `b`.
pub fn divisor_radii(p0: &FourierTaylorSymbol, b: &FourierTaylorSymbol, degree: u32) -> Vec<([i32; 2], f64)> {
    let grad = [p0.derivative([1, 0], [0, 0]), p0.derivative([0, 1], [0, 0])];
    b.modes()
        .filter(|(m, _)| **m != [0, 0])
        .filter_map(|(m, _)| {
            let div = grad[0]
                .scale(I * m[0] as f64)
                .add_scaled(&grad[1], I * m[1] as f64);
            let inv = taylor_reciprocal(&div, degree).ok()?;
            let r = crate::symbolkit::poly::radius_estimate(inv.mode_poly([0, 0])?);
            Some((*m, r))
        })
        .collect()
}

/// Tuning for the principal-symbol Newton iteration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PrincipalOptions {
    /// Stop once the x-dependent part of the principal symbol is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PrincipalOptions {
    fn default() -> Self {
        PrincipalOptions {
            tolerance: 1e-15,
            max_iterations: 40,
        }
    }
}

/// Output of [`normalize_principal`].
#[derive(Clone, Debug)]
pub struct PrincipalNormalization {
    /// The conjugated series; its `h^0` term is x-independent up to `defect`.
    pub series: HSeries,
    /// Generators, each entering at `h^{-1}`, in order of application.
    pub generators: Vec<FourierTaylorSymbol>,
    /// Sup of the x-dependent coefficients of the `h^0` term after each step.
    pub history: Vec<f64>,
    pub defect: f64,
}

/// Conjugates away the x-dependence of the `h^0` coefficient.
pub fn normalize_principal(
    p: &HSeries,
    order: usize,
    caps: Caps,
    opts: PrincipalOptions,
) -> Result<PrincipalNormalization> {
    let mut series = p.with_order(order);
    let mut generators = Vec::new();
    let mut history = vec![series.terms[0].x_dependent_max()];
    for it in 0..opts.max_iterations {
        let p0 = &series.terms[0];
        let osc = p0.oscillating_part();
        let defect = osc.max_abs();
        if defect <= opts.tolerance {
            break;
        }
        if it >= 3 && defect >= history[history.len() - 4] {
            return Err(Error::NoConvergence {
                what: "principal normalization",
                iterations: it,
                residual: defect,
            });
        }
        let w = cohomological_solve(&p0.x_mean(), &osc.scale(I), caps)?;
        series = moyal_conjugation_step(&series, &w, -1, order, caps)?;
        log::debug!(
            "principal normalization step {it}: defect {defect:.3e} -> {:.3e}",
            series.terms[0].x_dependent_max()
        );
        history.push(series.terms[0].x_dependent_max());
        generators.push(w);
    }
    let defect = series.terms[0].x_dependent_max();
    if defect > opts.tolerance {
        return Err(Error::NoConvergence {
            what: "principal normalization",
            iterations: opts.max_iterations,
            residual: defect,
        });
    }
    Ok(PrincipalNormalization {
        series,
        generators,
        history,
        defect,
    })
}

/// `max_j ‖∂_j a‖_{ℓ¹}` over the four phase-space directions.
pub fn gradient_norm(a: &FourierTaylorSymbol) -> f64 {
    [
        a.derivative([0, 0], [1, 0]),
        a.derivative([0, 0], [0, 1]),
        a.derivative([1, 0], [0, 0]),
        a.derivative([0, 1], [0, 0]),
    ]
    .iter()
    .map(|d| d.l1_norm())
    .fold(0.0, f64::max)
}

/// The x-independent coefficients `p̃_n` and the generators that produce them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFormResult {
    pub schema: String,
    pub epsilon: f64,
    pub order: usize,
    pub caps: Caps,
    pub p_tilde: Vec<FourierTaylorSymbol>,
    /// `a_n`, entering at `h^n`, for `n = 0 … N−1`.
    pub generators: Vec<FourierTaylorSymbol>,
    /// Principal-symbol generators entering at `h^{-1}`; empty when the input
    /// principal symbol was already x-independent.
    pub principal_generators: Vec<FourierTaylorSymbol>,
    /// `‖∇a_n‖` for each `n`.
    pub growth_log: Vec<f64>,
    /// Largest x-dependent coefficient of the conjugated series, per order.
    pub defects: Vec<f64>,
    pub truncation: Truncation,
}

impl NormalFormResult {
    /// `Σ_n h^n p̃_n(ξ)`.
    pub fn eval(&self, h: f64, xi: [f64; 2]) -> Complex64 {
        let xi = [Complex64::new(xi[0], 0.0), Complex64::new(xi[1], 0.0)];
        let mut hn = 1.0;
        let mut s = Complex64::new(0.0, 0.0);
        for p in &self.p_tilde {
            s += p.eval_xi(xi) * hn;
            hn *= h;
        }
        s
    }

    /// Keeps only `p̃_0 … p̃_n`.
    pub fn truncated(&self, n: usize) -> NormalFormResult {
        let mut out = self.clone();
        out.p_tilde.truncate(n + 1);
        out.generators.truncate(n);
        out.growth_log.truncate(n);
        out.defects.truncate(n + 1);
        out.order = n.min(self.order);
        out
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let nf: NormalFormResult = serde_json::from_str(s)?;
        if nf.p_tilde.is_empty() {
            return Err(Error::Invalid("normal form without p̃₀".into()));
        }
        if nf.p_tilde.iter().any(|p| !p.is_x_independent()) {
            return Err(Error::Invalid("normal form coefficients must be x-independent".into()));
        }
        Ok(nf)
    }
}

/// Removes the x-dependence of `h^1 … h^N` from a series whose `h^0` term is
/// already x-independent (up to `x_tolerance`).
pub fn normal_form(p: &HSeries, order: usize, epsilon: f64, caps: Caps) -> Result<NormalFormResult> {
    normal_form_with(p, order, epsilon, caps, 1e-12)
}

fn normal_form_with(
    p: &HSeries,
    order: usize,
    epsilon: f64,
    caps: Caps,
    x_tolerance: f64,
) -> Result<NormalFormResult> {
    let lead = p.terms[0].x_dependent_max();
    if lead > x_tolerance {
        return Err(Error::Invalid(format!(
            "normal_form needs an x-independent principal symbol (defect {lead:.3e}); \
             use normal_form_full"
        )));
    }
    let mut series = p.with_order(order);
    series.terms[0] = series.terms[0].x_mean();
    let p0 = series.terms[0].clone();
    let mut generators = Vec::with_capacity(order);
    let mut growth_log = Vec::with_capacity(order);
    for n in 0..order {
        let s = &series.terms[n + 1];
        let a = cohomological_solve(&p0, &s.oscillating_part().scale(I), caps).map_err(|e| match e {
            Error::Divisor { module, mode, source, .. } => Error::Divisor {
                module,
                order: n,
                mode,
                source,
            },
            e => e,
        })?;
        series = moyal_conjugation_step(&series, &a, n as i32, order, caps)?;
        growth_log.push(gradient_norm(&a));
        generators.push(a);
    }
    let defects = series.x_dependent_defects();
    let truncation = series
        .terms
        .iter()
        .fold(Truncation::default(), |t, s| t.merge(s.truncation()));
    let p_tilde = series.terms.iter().map(|t| t.x_mean()).collect();
    Ok(NormalFormResult {
        schema: "v1".into(),
        epsilon,
        order,
        caps,
        p_tilde,
        generators,
        principal_generators: Vec::new(),
        growth_log,
        defects,
        truncation,
    })
}

/// Principal normalization followed by [`normal_form`].
pub fn normal_form_full(
    p: &HSeries,
    order: usize,
    epsilon: f64,
    caps: Caps,
    opts: PrincipalOptions,
) -> Result<NormalFormResult> {
    let pn = normalize_principal(p, order, caps, opts)?;
    let mut nf = normal_form_with(&pn.series, order, epsilon, caps, opts.tolerance.max(1e-12))?;
    nf.defects[0] = nf.defects[0].max(pn.defect);
    nf.principal_generators = pn.generators;
    Ok(nf)
}

/// Re-applies every generator of `nf` to `p` and returns the conjugated series.
pub fn conjugate_by(p: &HSeries, nf: &NormalFormResult) -> Result<HSeries> {
    let mut s = p.with_order(nf.order);
    for w in &nf.principal_generators {
        s = moyal_conjugation_step(&s, w, -1, nf.order, nf.caps)?;
    }
    for (n, a) in nf.generators.iter().enumerate() {
        s = moyal_conjugation_step(&s, a, n as i32, nf.order, nf.caps)?;
    }
    Ok(s)
}

/// One row of [`growth_report`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    /// Least-squares slope of `log ‖∇a_n‖` against `log ε`; `None` for an
    /// exact-zero row.
    pub slope: Option<f64>,
    /// `−(1 + 2n)`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Per-order log–log slopes of `‖∇a_n‖` over a grid of `ε`.
pub fn growth_report(results: &[NormalFormResult]) -> Vec<GrowthRow> {
    let order = results.iter().map(|r| r.growth_log.len()).min().unwrap_or(0);
    let eps: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    (0..order)
        .map(|n| {
            let norms: Vec<f64> = results.iter().map(|r| r.growth_log[n]).collect();
            let bound = -(1.0 + 2.0 * n as f64);
            let scale = norms.iter().copied().fold(0.0, f64::max);
            let slope = if norms.iter().all(|v| *v <= 1e-300) || scale == 0.0 {
                None
            } else if norms.iter().any(|v| *v <= 1e-300) {
                Some(f64::NAN)
            } else {
                let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
                let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
                Some(crate::speccompare::least_squares_slope(&xs, &ys))
            };
            let within_bound = match slope {
                None => true,
                Some(s) => s.is_finite() && s >= bound,
            };
            GrowthRow {
                n,
                epsilons: eps.clone(),
                norms,
                slope,
                bound,
                within_bound,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn transport(eps: f64) -> FourierTaylorSymbol {
        FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), c(0.0, eps))
    }

    #[test]
    fn cohomological_examples() {
        let caps = Caps::default();
        let a = cohomological_solve(&transport(0.1), &FourierTaylorSymbol::exp_mode([0, 1]), caps).unwrap();
        assert!((a.coeff([0, 1], [0, 0]) - c(-10.0, 0.0)).norm() < 1e-12);
        assert_eq!(a.num_terms(), 1);

        let a = cohomological_solve(&transport(0.1), &FourierTaylorSymbol::exp_mode([1, 1]), caps).unwrap();
        assert!((a.coeff([1, 1], [0, 0]) - c(1.0, 0.0) / c(-0.1, 1.0)).norm() < 1e-14);

        let a = cohomological_solve(&transport(0.1), &FourierTaylorSymbol::xi(2), caps).unwrap();
        assert!(a.is_zero());
    }

    #[test]
    fn cohomological_rejects_vanishing_divisor() {
        // p0 = ξ₁ has divisor i m₁, which vanishes on m = (0, 1)
        let r = cohomological_solve(&FourierTaylorSymbol::xi(1), &FourierTaylorSymbol::exp_mode([0, 1]), Caps::default());
        assert!(matches!(r, Err(Error::Divisor { mode: [0, 1], .. })));
    }

    #[test]
    fn x_independent_input_is_fixed() {
        let p = HSeries::principal(transport(0.1), 3);
        let nf = normal_form(&p, 3, 0.1, Caps::default()).unwrap();
        assert_eq!(nf.p_tilde[0], transport(0.1));
        assert!(nf.p_tilde[1..].iter().all(|t| t.is_zero()));
        assert!(nf.generators.iter().all(|a| a.is_zero()));
    }

    #[test]
    fn first_order_term_is_averaged_away() {
        let eps = 0.1;
        let p = HSeries::from_terms(vec![transport(eps), FourierTaylorSymbol::exp_mode([0, 1])]).with_order(2);
        let nf = normal_form(&p, 2, eps, Caps::default()).unwrap();
        assert!(nf.p_tilde[1].is_zero());
        // a₀ = cohomological_solve(p0, i e^{ix₂}) = −(i/ε) e^{ix₂}
        assert!((nf.generators[0].coeff([0, 1], [0, 0]) - c(0.0, -10.0)).norm() < 1e-12);
        assert!(nf.defects.iter().all(|d| *d <= 1e-12));
    }
}
