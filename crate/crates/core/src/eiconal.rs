//! Complex Lagrangian tori `ξ = φ'(x)` on which `p_ε` vanishes.
//!
//! After conjugation by the averaging weight, `p_ε = p + iε⟨q⟩ + r_ε` with
//! `r_ε = O(ε²)`. Writing `φ = ε̃ψ` the eiconal equation becomes
//! `Zψ + G(x, ψ') = 0` with `Z = c₁∂₁ + c₂∂₂` the linear part at the base
//! point. `ψ = ψ_per + aα + bβ` is found by fixed-point iteration, the
//! nonlinearity being collocated on a doubled FFT grid.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{unwrap, wrap, Fft2};
use crate::geomflow::{weight_G, FlowModel};
use crate::symbolkit::poly::{mono_exponent, n_monomials};
use crate::symbolkit::{classical_lie_series, Caps, FourierTaylorSymbol, Truncation};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EiconalOptions {
    /// Stop when the weighted correction falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Sobolev weight `⟨k⟩^s` in the correction norm.
    pub weight_s: f64,
    /// Largest accepted eiconal defect.
    pub residual_tolerance: f64,
}

impl Default for EiconalOptions {
    fn default() -> Self {
        EiconalOptions {
            tolerance: 1e-12,
            max_iterations: 200,
            weight_s: 2.0,
            residual_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EiconalProblem {
    /// Full symbol after averaging, `p + iε⟨q⟩ + r_ε`.
    pub p_eps: FourierTaylorSymbol,
    /// `z(ξ) = p(ξ₁) + iε⟨q⟩(ξ)`.
    pub z_symbol: FourierTaylorSymbol,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    /// FFT points per axis for the unknown; the nonlinearity uses twice as many.
    pub grid: usize,
    /// Offset `ζ` of the shifted problem `p_ε(x, ζ + ξ) − z(ζ) = 0`.
    pub zeta: [Complex64; 2],
    pub options: EiconalOptions,
}

impl EiconalProblem {
    pub fn new(
        p_eps: FourierTaylorSymbol,
        z_symbol: FourierTaylorSymbol,
        epsilon: f64,
        epsilon_tilde: Option<f64>,
        grid: usize,
    ) -> Result<Self> {
        let epsilon_tilde = epsilon_tilde.unwrap_or(epsilon.sqrt());
        if !(epsilon > 0.0 && epsilon < epsilon_tilde && epsilon_tilde < 1.0) {
            return Err(Error::Invalid(format!(
                "need 0 < ε < ε̃ < 1, got ε = {epsilon}, ε̃ = {epsilon_tilde}"
            )));
        }
        if !grid.is_power_of_two() || grid < 8 {
            return Err(Error::Invalid(format!("grid {grid} must be a power of two ≥ 8")));
        }
        if grid < 4 * p_eps.x_degree_bound().max(1) as usize {
            return Err(Error::Invalid(format!(
                "grid {grid} is below 4K = {}",
                4 * p_eps.x_degree_bound()
            )));
        }
        if !z_symbol.is_x_independent() {
            return Err(Error::Invalid("z(ξ) must not depend on x".into()));
        }
        Ok(EiconalProblem {
            p_eps,
            z_symbol,
            epsilon,
            epsilon_tilde,
            grid,
            zeta: [C0, C0],
            options: EiconalOptions::default(),
        })
    }

    /// Conjugates `p + iεq + r_ε` by the averaging weight `G` (`H_p G = q − ⟨q⟩`).
    pub fn from_model(
        model: &FlowModel,
        r_eps: Option<&FourierTaylorSymbol>,
        epsilon_tilde: Option<f64>,
        grid: usize,
        caps: Caps,
    ) -> Result<Self> {
        model.require_transversality()?;
        let g = weight_G(model, caps)?;
        let mut full = model.principal_symbol();
        if let Some(r) = r_eps {
            full = full.add(r);
        }
        let p_eps = classical_lie_series(&full, &g, Complex64::new(0.0, model.epsilon), caps)?;
        let z = model.p.add_scaled(&model.q_average(), Complex64::new(0.0, model.epsilon));
        Self::new(p_eps, z, model.epsilon, epsilon_tilde, grid)
    }

    pub fn with_zeta(&self, zeta: [Complex64; 2]) -> Self {
        EiconalProblem { zeta, ..self.clone() }
    }

    /// `(c₁, c₂) = ∇z(ζ)`.
    pub fn linear_part(&self) -> [Complex64; 2] {
        [
            self.z_symbol.derivative([1, 0], [0, 0]).eval_xi(self.zeta),
            self.z_symbol.derivative([0, 1], [0, 0]).eval_xi(self.zeta),
        ]
    }

    /// `ε/ε̃ + ε̃`.
    pub fn contraction_scale(&self) -> f64 {
        self.epsilon / self.epsilon_tilde + self.epsilon_tilde
    }
}

/// `∇α` and `∇β` for `α = −ic₂x₁ + ic₁x₂`, `β = −ic₂x₁ − ic₁x₂`;
/// `Zα = 0`, `Zβ = −2ic₁c₂`.
fn linear_gradients(c: [Complex64; 2]) -> ([Complex64; 2], [Complex64; 2]) {
    (
        [-I * c[1], I * c[0]],
        [-I * c[1], -I * c[0]],
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EiconalSolution {
    pub grid: usize,
    /// Coefficients of `ψ_per` in FFT order (`grid × grid`); zero mean.
    pub psi_per: Vec<Complex64>,
    pub a: Complex64,
    pub b: Complex64,
    pub zeta: [Complex64; 2],
    pub c: [Complex64; 2],
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    /// Sup of `|Zψ + G(x, ψ')|` on the doubled grid.
    pub residual: f64,
    pub iterations: usize,
    /// Weighted size of each correction.
    pub corrections: Vec<f64>,
    /// Largest ratio of successive corrections.
    pub contraction: f64,
    /// `(|b| + ‖(ε⁻¹∂₁, ∂₂)ψ_per‖) / (ε/ε̃ + ε̃)`.
    pub bound_constant: f64,
}

impl EiconalSolution {
    pub fn psi_coeff(&self, k: [i32; 2]) -> Complex64 {
        let n = self.grid;
        let h = (n / 2) as i32;
        if k[0].abs() >= h || k[1].abs() >= h {
            return C0;
        }
        self.psi_per[wrap(k[0], n) * n + wrap(k[1], n)]
    }

    /// `ξ = ζ + ε̃ψ'(x)` at an arbitrary real point.
    pub fn xi_at(&self, x: [f64; 2]) -> [Complex64; 2] {
        let (ga, gb) = linear_gradients(self.c);
        let n = self.grid;
        let mut d = [C0, C0];
        for i in 0..n {
            for j in 0..n {
                let v = self.psi_per[i * n + j];
                if v == C0 {
                    continue;
                }
                let k = [unwrap(i, n) as f64, unwrap(j, n) as f64];
                let e = Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]) * v * I;
                d[0] += e * k[0];
                d[1] += e * k[1];
            }
        }
        let et = self.epsilon_tilde;
        [
            self.zeta[0] + et * (d[0] + self.a * ga[0] + self.b * gb[0]),
            self.zeta[1] + et * (d[1] + self.a * ga[1] + self.b * gb[1]),
        ]
    }

    /// `ψ_per` as a symbol without `ξ`-dependence.
    pub fn psi_per_symbol(&self) -> FourierTaylorSymbol {
        let n = self.grid;
        let mut s = FourierTaylorSymbol::zero((n / 2 - 1) as i32, 0);
        for i in 0..n {
            for j in 0..n {
                let v = self.psi_per[i * n + j];
                if v != C0 {
                    s.add_term([unwrap(i, n), unwrap(j, n)], [0, 0], v);
                }
            }
        }
        s.set_truncation(Truncation::default());
        s
    }
}

/// `sup_k ⟨k⟩^s max(|k₁|/ε, |k₂|) |û(k)|` over FFT-ordered coefficients.
pub fn weighted_norm(u: &[Complex64], n: usize, epsilon: f64, s: f64) -> f64 {
    let mut out = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = u[i * n + j].norm();
            if v == 0.0 {
                continue;
            }
            let k = [unwrap(i, n) as f64, unwrap(j, n) as f64];
            let w = (1.0 + k[0] * k[0] + k[1] * k[1]).powf(s / 2.0) * (k[0].abs() / epsilon).max(k[1].abs());
            out = out.max(w * v);
        }
    }
    out
}

/// Solves `(∂₁ + iε∂₂)u = v` on FFT-ordered coefficients.
pub fn solve_linearized(v: &[Complex64], n: usize, epsilon: f64) -> Result<Vec<Complex64>> {
    solve_linear(v, n, [Complex64::new(1.0, 0.0), Complex64::new(0.0, epsilon)])
}

fn solve_linear(v: &[Complex64], n: usize, c: [Complex64; 2]) -> Result<Vec<Complex64>> {
    if v.len() != n * n {
        return Err(Error::Invalid(format!("expected {} coefficients, got {}", n * n, v.len())));
    }
    if v[0].norm() > 1e-14 {
        return Err(Error::Invalid(format!("right-hand side has nonzero mean {}", v[0])));
    }
    let mut u = vec![C0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == 0 && j == 0 {
                continue;
            }
            let k = [unwrap(i, n) as f64, unwrap(j, n) as f64];
            let div = I * (c[0] * k[0] + c[1] * k[1]);
            if div.norm() == 0.0 {
                return Err(Error::Degenerate(format!("vanishing divisor at mode {k:?}")));
            }
            u[i * n + j] = v[i * n + j] / div;
        }
    }
    Ok(u)
}

/// Collocation of `G(x, ψ')` on the doubled grid.
struct Collocation {
    n: usize,
    n2: usize,
    fft: Fft2,
    /// `Σ_m p̂_{m,α} e^{im·x}` for each monomial, point-major.
    coeffs: Vec<Complex64>,
    len: usize,
    degree: u32,
}

impl Collocation {
    fn new(p: &FourierTaylorSymbol, n: usize) -> Self {
        let n2 = 2 * n;
        let fft = Fft2::new(n2);
        let degree = p.xi_degree_bound();
        let len = n_monomials(degree);
        let mut coeffs = vec![C0; n2 * n2 * len];
        let mut slice = vec![C0; n2 * n2];
        for c in 0..len {
            slice.iter_mut().for_each(|v| *v = C0);
            let mut any = false;
            for (m, poly) in p.modes() {
                if let Some(v) = poly.get(c) {
                    if *v != C0 {
                        slice[wrap(m[0], n2) * n2 + wrap(m[1], n2)] += *v;
                        any = true;
                    }
                }
            }
            if !any {
                continue;
            }
            fft.apply(&mut slice, true);
            for (pt, v) in slice.iter().enumerate() {
                coeffs[pt * len + c] = *v;
            }
        }
        Collocation {
            n,
            n2,
            fft,
            coeffs,
            len,
            degree,
        }
    }

    /// Grid values of `∂_jψ` (without the `ε̃` factor) including the linear parts.
    fn gradient(&self, psi: &[Complex64], lin: [Complex64; 2]) -> [Vec<Complex64>; 2] {
        let (n, n2) = (self.n, self.n2);
        let mut out = [vec![C0; n2 * n2], vec![C0; n2 * n2]];
        for (dir, grid) in out.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let k = [unwrap(i, n), unwrap(j, n)];
                    let v = psi[i * n + j];
                    if v != C0 {
                        grid[wrap(k[0], n2) * n2 + wrap(k[1], n2)] = I * k[dir] as f64 * v;
                    }
                }
            }
            self.fft.apply(grid, true);
            for v in grid.iter_mut() {
                *v += lin[dir];
            }
        }
        out
    }

    /// `G = (p_ε(x, ζ + ε̃ψ') − z(ζ) − ε̃ c·ψ') / ε̃` at every point.
    fn nonlinearity(&self, grad: &[Vec<Complex64>; 2], prob: &EiconalProblem, c: [Complex64; 2]) -> Vec<Complex64> {
        let z0 = prob.z_symbol.eval_xi(prob.zeta);
        let et = prob.epsilon_tilde;
        let d = self.degree as usize;
        let mut p1 = vec![C0; d + 1];
        let mut p2 = vec![C0; d + 1];
        let exps: Vec<[u32; 2]> = (0..self.len).map(mono_exponent).collect();
        let mut out = vec![C0; self.n2 * self.n2];
        for (pt, o) in out.iter_mut().enumerate() {
            let g = [grad[0][pt], grad[1][pt]];
            let xi = [prob.zeta[0] + et * g[0], prob.zeta[1] + et * g[1]];
            p1[0] = Complex64::new(1.0, 0.0);
            p2[0] = Complex64::new(1.0, 0.0);
            for e in 1..=d {
                p1[e] = p1[e - 1] * xi[0];
                p2[e] = p2[e - 1] * xi[1];
            }
            let cs = &self.coeffs[pt * self.len..(pt + 1) * self.len];
            let mut v = C0;
            for (cv, e) in cs.iter().zip(&exps) {
                v += cv * p1[e[0] as usize] * p2[e[1] as usize];
            }
            *o = (v - z0 - et * (c[0] * g[0] + c[1] * g[1])) / et;
        }
        out
    }

    /// Coefficients of a doubled-grid function on the modes `|k_j| < n/2`.
    fn analyse(&self, mut f: Vec<Complex64>) -> (Vec<Complex64>, f64) {
        let (n, n2) = (self.n, self.n2);
        self.fft.apply(&mut f, false);
        let norm = 1.0 / (n2 * n2) as f64;
        let h = (n / 2) as i32;
        let mut out = vec![C0; n * n];
        let mut tail = 0.0f64;
        for i in 0..n2 {
            for j in 0..n2 {
                let k = [unwrap(i, n2), unwrap(j, n2)];
                let v = f[i * n2 + j] * norm;
                if k[0].abs() < h && k[1].abs() < h {
                    out[wrap(k[0], n) * n + wrap(k[1], n)] = v;
                } else {
                    tail = tail.max(v.norm());
                }
            }
        }
        (out, tail)
    }
}

/// Fixed-point iteration for `ψ_per` and `b` at fixed `a`.
pub fn iterate_schema(problem: &EiconalProblem, a: Complex64) -> Result<EiconalSolution> {
    let n = problem.grid;
    let col = Collocation::new(&problem.p_eps, n);
    iterate_with(problem, &col, a)
}

fn iterate_with(problem: &EiconalProblem, col: &Collocation, a: Complex64) -> Result<EiconalSolution> {
    let n = problem.grid;
    let eps = problem.epsilon;
    let opts = problem.options;
    let c = problem.linear_part();
    let (ga, gb) = linear_gradients(c);
    let z_beta = -2.0 * I * c[0] * c[1];
    if z_beta.norm() < 1e-14 {
        return Err(Error::Degenerate("Zβ vanishes: ∂z/∂ξ₁ or ∂z/∂ξ₂ is zero at ζ".into()));
    }
    let mut psi = vec![C0; n * n];
    let mut b = C0;
    let mut corrections = Vec::new();
    let mut contraction = 0.0f64;
    let mut rising = 0;
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence {
                what: "eiconal schema",
                iterations,
                residual: corrections.last().copied().unwrap_or(f64::NAN),
            });
        }
        iterations += 1;
        let lin = [a * ga[0] + b * gb[0], a * ga[1] + b * gb[1]];
        let grad = col.gradient(&psi, lin);
        let (g_hat, _) = col.analyse(col.nonlinearity(&grad, problem, c));
        let b_new = -g_hat[0] / z_beta;
        let mut rhs: Vec<Complex64> = g_hat.iter().map(|v| -v).collect();
        rhs[0] = C0;
        let psi_new = solve_linear(&rhs, n, c)?;
        let diff: Vec<Complex64> = psi_new.iter().zip(&psi).map(|(x, y)| x - y).collect();
        let corr = weighted_norm(&diff, n, eps, opts.weight_s) + (b_new - b).norm();
        psi = psi_new;
        b = b_new;
        if let Some(prev) = corrections.last().copied() {
            if prev > 0.0 && corr > 1e2 * opts.tolerance {
                let r = corr / prev;
                contraction = contraction.max(r);
                rising = if r >= 1.0 { rising + 1 } else { 0 };
                if rising >= 3 {
                    return Err(Error::NonContraction {
                        ratio: r,
                        steps: 3,
                        expected: problem.contraction_scale(),
                    });
                }
            }
        }
        corrections.push(corr);
        if !corr.is_finite() {
            return Err(Error::NoConvergence {
                what: "eiconal schema",
                iterations,
                residual: corr,
            });
        }
        if corr <= opts.tolerance {
            break;
        }
    }
    let residual = eiconal_defect(problem, col, &psi, a, b, c);
    let bound_constant = (b.norm() + weighted_norm(&psi, n, eps, opts.weight_s)) / problem.contraction_scale();
    let sol = EiconalSolution {
        grid: n,
        psi_per: psi,
        a,
        b,
        zeta: problem.zeta,
        c,
        epsilon: eps,
        epsilon_tilde: problem.epsilon_tilde,
        residual,
        iterations,
        corrections,
        contraction,
        bound_constant,
    };
    if residual > opts.residual_tolerance {
        return Err(Error::NoConvergence {
            what: "eiconal defect",
            iterations,
            residual,
        });
    }
    Ok(sol)
}

/// Sup of `|Zψ + G(x, ψ')|` on the doubled grid.
fn eiconal_defect(
    problem: &EiconalProblem,
    col: &Collocation,
    psi: &[Complex64],
    a: Complex64,
    b: Complex64,
    c: [Complex64; 2],
) -> f64 {
    let (n, n2) = (col.n, col.n2);
    let (ga, gb) = linear_gradients(c);
    let lin = [a * ga[0] + b * gb[0], a * ga[1] + b * gb[1]];
    let grad = col.gradient(psi, lin);
    let g = col.nonlinearity(&grad, problem, c);
    let mut zpsi = vec![C0; n2 * n2];
    for i in 0..n {
        for j in 0..n {
            let k = [unwrap(i, n), unwrap(j, n)];
            zpsi[wrap(k[0], n2) * n2 + wrap(k[1], n2)] =
                I * (c[0] * k[0] as f64 + c[1] * k[1] as f64) * psi[i * n + j];
        }
    }
    col.fft.apply(&mut zpsi, true);
    let zb = -2.0 * I * c[0] * c[1] * b;
    zpsi.iter().zip(&g).map(|(z, g)| (z + zb + g).norm()).fold(0.0, f64::max)
}

/// Cycle actions of `Γ_φ` along `x₁` and `x₂`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Actions {
    pub i1: Complex64,
    pub i2: Complex64,
    /// The same integrals by quadrature of `ξ_j dx_j` along the cycles.
    pub quadrature: [Complex64; 2],
    pub mismatch: f64,
}

/// Largest accepted disagreement between closed form and quadrature.
pub const ACTION_MISMATCH: f64 = 1e-8;

pub fn compute_actions(solution: &EiconalSolution, problem: &EiconalProblem) -> Result<Actions> {
    let (ga, gb) = linear_gradients(solution.c);
    let et = problem.epsilon_tilde;
    let i1 = TAU * (solution.zeta[0] + et * (solution.a * ga[0] + solution.b * gb[0]));
    let i2 = TAU * (solution.zeta[1] + et * (solution.a * ga[1] + solution.b * gb[1]));

    // Trapezoid along off-grid lines; exact for trigonometric polynomials of
    // degree below the node count.
    let nodes = 2 * solution.grid + 1;
    let (y1, y2) = (0.3711, 1.2345);
    let mut q = [C0, C0];
    for s in 0..nodes {
        let t = TAU * s as f64 / nodes as f64;
        q[0] += solution.xi_at([t, y1])[0];
        q[1] += solution.xi_at([y2, t])[1];
    }
    let w = TAU / nodes as f64;
    let quadrature = [q[0] * w, q[1] * w];
    let mismatch = (quadrature[0] - i1).norm().max((quadrature[1] - i2).norm());
    if mismatch > ACTION_MISMATCH {
        return Err(Error::NoConvergence {
            what: "action quadrature cross-check",
            iterations: nodes,
            residual: mismatch,
        });
    }
    Ok(Actions {
        i1,
        i2,
        quadrature,
        mismatch,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Realified {
    pub a_star: Complex64,
    pub solution: EiconalSolution,
    pub actions: Actions,
    pub newton_steps: usize,
    /// `|ε̃a*| / ε`.
    pub scaled_a: f64,
}

const NEWTON_STEPS: usize = 20;
const FD_STEP: f64 = 1e-6;
/// Target for `|Im I₁|` and `|Im I₂|`.
pub const REAL_ACTION_TOLERANCE: f64 = 1e-10;

/// Chooses `a` so that both actions are real.
pub fn realify_actions(problem: &EiconalProblem) -> Result<Realified> {
    let col = Collocation::new(&problem.p_eps, problem.grid);
    let et = problem.epsilon_tilde;
    let eps = problem.epsilon;
    let norm1 = TAU * et * eps;
    let norm2 = TAU * et;
    let eval = |a: Complex64| -> Result<(EiconalSolution, Actions, [f64; 2])> {
        let s = iterate_with(problem, &col, a)?;
        let act = compute_actions(&s, problem)?;
        let f = [act.i1.im / norm1, act.i2.im / norm2];
        Ok((s, act, f))
    };
    let mut a = C0;
    for step in 0..=NEWTON_STEPS {
        let (sol, actions, f) = eval(a)?;
        if actions.i1.im.abs() <= REAL_ACTION_TOLERANCE && actions.i2.im.abs() <= REAL_ACTION_TOLERANCE {
            return Ok(Realified {
                a_star: a,
                scaled_a: (et * a).norm() / eps,
                solution: sol,
                actions,
                newton_steps: step,
            });
        }
        if step == NEWTON_STEPS {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for (col_idx, dir) in [Complex64::new(1.0, 0.0), I].into_iter().enumerate() {
            let fp = eval(a + dir * FD_STEP)?.2;
            let fm = eval(a - dir * FD_STEP)?.2;
            for r in 0..2 {
                jac[r][col_idx] = (fp[r] - fm[r]) / (2.0 * FD_STEP);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 {
            return Err(Error::Degenerate("singular Jacobian in action realification".into()));
        }
        let dx = (f[0] * jac[1][1] - f[1] * jac[0][1]) / det;
        let dy = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
        a -= Complex64::new(dx, dy);
    }
    Err(Error::NoConvergence {
        what: "action realification",
        iterations: NEWTON_STEPS,
        residual: f64::NAN,
    })
}

/// One member of the `η`-family `φ(x, η) = x·η + φ_per(x, η)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub eta: [f64; 2],
    pub zeta: [Complex64; 2],
    pub p_tilde: Complex64,
    /// `p(η₁) + iε⟨q⟩(η)`.
    pub leading: Complex64,
    /// `sup |∂_j φ_per|`.
    pub xi_shift: [f64; 2],
    pub solution: EiconalSolution,
}

/// `η(ζ) = ζ + ε̃b(ζ)∇β`.
fn eta_of(problem: &EiconalProblem, col: &Collocation, zeta: [Complex64; 2]) -> Result<([Complex64; 2], EiconalSolution)> {
    let p = problem.with_zeta(zeta);
    let s = iterate_with(&p, col, C0)?;
    let (_, gb) = linear_gradients(s.c);
    let et = p.epsilon_tilde;
    Ok(([zeta[0] + et * s.b * gb[0], zeta[1] + et * s.b * gb[1]], s))
}

fn family_point(problem: &EiconalProblem, col: &Collocation, eta: [f64; 2]) -> Result<FamilyPoint> {
    let target = [Complex64::new(eta[0], 0.0), Complex64::new(eta[1], 0.0)];
    let mut zeta = target;
    let h = 1e-7;
    for _ in 0..NEWTON_STEPS {
        let (e, s) = eta_of(problem, col, zeta)?;
        let f = [e[0] - target[0], e[1] - target[1]];
        if f[0].norm().max(f[1].norm()) <= 1e-14 {
            let n = s.grid;
            let mut shift = [0.0f64; 2];
            for i in 0..n {
                for j in 0..n {
                    let k = [unwrap(i, n) as f64, unwrap(j, n) as f64];
                    let v = s.psi_per[i * n + j].norm() * problem.epsilon_tilde;
                    shift[0] += k[0].abs() * v;
                    shift[1] += k[1].abs() * v;
                }
            }
            let xi = [Complex64::new(eta[0], 0.0), Complex64::new(eta[1], 0.0)];
            return Ok(FamilyPoint {
                eta,
                zeta,
                p_tilde: problem.z_symbol.eval_xi(zeta),
                leading: problem.z_symbol.eval_xi(xi),
                xi_shift: shift,
                solution: s,
            });
        }
        // η is holomorphic in ζ, so one-sided complex differences suffice.
        let mut jac = [[C0; 2]; 2];
        for d in 0..2 {
            let mut zp = zeta;
            zp[d] += h;
            let mut zm = zeta;
            zm[d] -= h;
            let ep = eta_of(problem, col, zp)?.0;
            let em = eta_of(problem, col, zm)?.0;
            for r in 0..2 {
                jac[r][d] = (ep[r] - em[r]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.norm() < 1e-14 {
            return Err(Error::Degenerate(format!("η(ζ) is not invertible near η = {eta:?}")));
        }
        zeta[0] -= (f[0] * jac[1][1] - f[1] * jac[0][1]) / det;
        zeta[1] -= (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
    }
    Err(Error::NoConvergence {
        what: "ζ(η) inversion",
        iterations: NEWTON_STEPS,
        residual: f64::NAN,
    })
}

/// Solves the shifted problem with `a = 0` at every `η`; failures are
/// reported per point.
pub fn solve_family(problem: &EiconalProblem, etas: &[[f64; 2]]) -> Vec<Result<FamilyPoint>> {
    let col = Collocation::new(&problem.p_eps, problem.grid);
    etas.par_iter().map(|eta| family_point(problem, &col, *eta)).collect()
}

pub fn write_family_csv<W: std::io::Write>(points: &[FamilyPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eta1,eta2,re_p_tilde,im_p_tilde")?;
    for p in points {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", p.eta[0], p.eta[1], p.p_tilde.re, p.p_tilde.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mode(n: usize, k: [i32; 2]) -> usize {
        wrap(k[0], n) * n + wrap(k[1], n)
    }

    #[test]
    fn linearized_single_modes() {
        let n = 8;
        let mut v = vec![C0; n * n];
        v[mode(n, [1, 0])] = c(1.0, 0.0);
        let u = solve_linearized(&v, n, 0.1).unwrap();
        assert!((u[mode(n, [1, 0])] - c(0.0, -1.0)).norm() < 1e-15);

        let mut v = vec![C0; n * n];
        v[mode(n, [0, 1])] = c(1.0, 0.0);
        let u = solve_linearized(&v, n, 0.1).unwrap();
        assert!((u[mode(n, [0, 1])] - c(-10.0, 0.0)).norm() < 1e-13);

        assert!(solve_linearized(&vec![C0; n * n], n, 0.1).unwrap().iter().all(|z| *z == C0));
        let mut v = vec![C0; n * n];
        v[0] = c(1.0, 0.0);
        assert!(solve_linearized(&v, n, 0.1).is_err());
    }

    fn linear_problem(eps: f64) -> EiconalProblem {
        let z = FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), c(0.0, eps));
        EiconalProblem::new(z.clone(), z, eps, None, 16).unwrap()
    }

    #[test]
    fn linear_model_is_trivial() {
        let p = linear_problem(0.1);
        let s = iterate_schema(&p, C0).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.b, C0);
        assert!(s.psi_per.iter().all(|z| *z == C0));
        let r = realify_actions(&p).unwrap();
        assert_eq!(r.a_star, C0);
    }

    #[test]
    fn x_only_nonlinearity() {
        let eps: f64 = 0.1;
        let et = eps.sqrt();
        let z = FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::xi(2), c(0.0, eps));
        let amp = c(0.02, 0.0);
        let p_eps = z.add_scaled(&FourierTaylorSymbol::exp_mode([1, 0]), amp * et);
        let p = EiconalProblem::new(p_eps, z, eps, Some(et), 16).unwrap();
        let s = iterate_schema(&p, C0).unwrap();
        assert_eq!(s.b, C0);
        assert!((s.psi_coeff([1, 0]) - I * amp).norm() < 1e-15);
        assert!(s.iterations <= 2);
    }

    #[test]
    fn closed_form_actions() {
        let p = linear_problem(0.1);
        let mut s = iterate_schema(&p, C0).unwrap();
        let a = compute_actions(&s, &p).unwrap();
        assert_eq!((a.i1, a.i2), (C0, C0));

        let p = EiconalProblem { epsilon_tilde: 0.3, ..linear_problem(0.1) };
        s.a = c(1.0, 0.0);
        s.epsilon_tilde = 0.3;
        let a = compute_actions(&s, &p).unwrap();
        assert!((a.i1 - c(TAU * 0.03, 0.0)).norm() < 1e-15);
        assert!((a.i2 - c(0.0, TAU * 0.3)).norm() < 1e-15);
    }

    #[test]
    fn invariants_are_checked() {
        let z = FourierTaylorSymbol::xi(1);
        assert!(EiconalProblem::new(z.clone(), z.clone(), 0.5, Some(0.3), 16).is_err());
        assert!(EiconalProblem::new(z.clone(), z.clone(), 0.1, None, 12).is_err());
        let wide = z.add(&FourierTaylorSymbol::exp_mode([5, 0]));
        assert!(EiconalProblem::new(wide, z, 0.1, None, 16).is_err());
    }
}
