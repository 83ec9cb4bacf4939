//! Flow averaging, the conjugation weight `G`, and Hamilton-flow utilities.
//!
//! Models are posed in action–angle coordinates where `p = p(ξ₁)`, so the
//! flow of `p` is translation in `x₁` and the trajectory average is the
//! projection onto Fourier modes with `m₁ = 0`.

use num_complex::Complex64;
use ode_solvers::{Dopri5, OutputType, System, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolkit::{taylor_reciprocal, Caps, FourierTaylorSymbol, DIVISOR_FLOOR};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const XI0: [Complex64; 2] = [C0, C0];

/// `p`, `q` and `ε` of `p + iεq`, with `p` in the action–angle chart.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub p: FourierTaylorSymbol,
    pub q: FourierTaylorSymbol,
    pub epsilon: f64,
}

impl FlowModel {
    pub fn new(p: FourierTaylorSymbol, q: FourierTaylorSymbol, epsilon: f64) -> Result<Self> {
        if !p.is_x_independent() {
            return Err(Error::Invalid("p must not depend on x".into()));
        }
        let c = p.derivative([1, 0], [0, 0]).eval_xi(XI0);
        if c.norm() < DIVISOR_FLOOR {
            return Err(Error::Degenerate(format!(
                "periodic-flow nondegeneracy violated: ∂p/∂ξ₁(0) = {c}"
            )));
        }
        Ok(FlowModel { p, q, epsilon })
    }

    /// `⟨q⟩`.
    pub fn q_average(&self) -> FourierTaylorSymbol {
        flow_average(&self.q)
    }

    /// Checks that `∂⟨q⟩/∂ξ₂(0) ≠ 0`, needed for spectral prediction.
    pub fn require_transversality(&self) -> Result<()> {
        let d = self.q_average().derivative([0, 1], [0, 0]).eval_xi(XI0);
        if d.norm() < DIVISOR_FLOOR {
            return Err(Error::Degenerate(format!(
                "transversality violated: ∂⟨q⟩/∂ξ₂(0) = {d}"
            )));
        }
        Ok(())
    }

    /// `p + iεq` as a single symbol.
    pub fn principal_symbol(&self) -> FourierTaylorSymbol {
        self.p.add_scaled(&self.q, Complex64::new(0.0, self.epsilon))
    }
}

/// Trajectory average of `q` under `x₁`-translation.
pub fn flow_average(q: &FourierTaylorSymbol) -> FourierTaylorSymbol {
    q.filter_modes(|m| m[0] == 0)
}

/// Solves `H_p G = q − ⟨q⟩` mode by mode, `G` having no `m₁ = 0` modes.
#[allow(non_snake_case)]
pub fn weight_G(model: &FlowModel, caps: Caps) -> Result<FourierTaylorSymbol> {
    let dp = model.p.derivative([1, 0], [0, 0]);
    let d = caps.d.max(model.q.xi_degree_bound());
    let mut out = FourierTaylorSymbol::zero(model.q.x_degree_bound(), d);
    for (m, qm) in model.q.modes() {
        if m[0] == 0 {
            continue;
        }
        let div = dp.scale(Complex64::new(0.0, m[0] as f64));
        let inv = taylor_reciprocal(&div, d).map_err(|e| Error::Divisor {
            module: "geomflow",
            order: 0,
            mode: *m,
            source: e,
        })?;
        let qsym = FourierTaylorSymbol::zero(0, 0).add(&single_mode(*m, qm));
        let g = crate::symbolkit::multiply(&qsym, &inv, Caps { k: caps.k.max(m[0].abs().max(m[1].abs())), d });
        out.axpy(&g, Complex64::new(1.0, 0.0));
    }
    Ok(out)
}

pub(crate) fn single_mode(m: [i32; 2], poly: &[Complex64]) -> FourierTaylorSymbol {
    let mut s = FourierTaylorSymbol::zero(m[0].abs().max(m[1].abs()), 0);
    for (i, c) in poly.iter().enumerate() {
        if *c != C0 {
            s.add_term(m, crate::symbolkit::poly::mono_exponent(i), *c);
        }
    }
    s
}

/// `H_p f = {p, f}` for `p` depending on `ξ` only.
pub fn hamilton_derivative(p: &FourierTaylorSymbol, f: &FourierTaylorSymbol, caps: Caps) -> FourierTaylorSymbol {
    crate::symbolkit::poisson_bracket(p, f, caps)
}

/// Phase-space point `(x₁, x₂, ξ₁, ξ₂)`.
pub type PhasePoint = [f64; 4];

/// Settings for [`hamilton_flow`] and the period search.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Largest `|ξ|` (sup over components) the symbol is trusted on.
    pub xi_box: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            xi_box: 1.0,
            rtol: 1e-12,
            atol: 1e-12,
        }
    }
}

/// A real Hamiltonian on `T*ℝ²` given through its gradient.
pub trait Hamiltonian {
    fn value(&self, rho: PhasePoint) -> f64;
    /// `(∂_x H, ∂_ξ H)`.
    fn gradient(&self, rho: PhasePoint) -> ([f64; 2], [f64; 2]);
}

/// Real part of a symbol, with its derivatives precomputed.
pub struct SymbolHamiltonian {
    p: FourierTaylorSymbol,
    dp_dx: [FourierTaylorSymbol; 2],
    dp_dxi: [FourierTaylorSymbol; 2],
}

impl SymbolHamiltonian {
    pub fn new(p: &FourierTaylorSymbol) -> Self {
        SymbolHamiltonian {
            p: p.clone(),
            dp_dx: [p.derivative([0, 0], [1, 0]), p.derivative([0, 0], [0, 1])],
            dp_dxi: [p.derivative([1, 0], [0, 0]), p.derivative([0, 1], [0, 0])],
        }
    }
}

impl Hamiltonian for SymbolHamiltonian {
    fn value(&self, rho: PhasePoint) -> f64 {
        self.p.eval_real([rho[0], rho[1]], [rho[2], rho[3]]).re
    }

    fn gradient(&self, rho: PhasePoint) -> ([f64; 2], [f64; 2]) {
        let x = [rho[0], rho[1]];
        let xi = [rho[2], rho[3]];
        let ev = |s: &FourierTaylorSymbol| s.eval_real(x, xi).re;
        ([ev(&self.dp_dx[0]), ev(&self.dp_dx[1])], [ev(&self.dp_dxi[0]), ev(&self.dp_dxi[1])])
    }
}

/// `Σ λⱼ (xⱼ² + ξⱼ²)/2`.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicOscillator {
    pub lambdas: [f64; 2],
}

impl Hamiltonian for HarmonicOscillator {
    fn value(&self, rho: PhasePoint) -> f64 {
        0.5 * (self.lambdas[0] * (rho[0] * rho[0] + rho[2] * rho[2])
            + self.lambdas[1] * (rho[1] * rho[1] + rho[3] * rho[3]))
    }

    fn gradient(&self, rho: PhasePoint) -> ([f64; 2], [f64; 2]) {
        let l = self.lambdas;
        ([l[0] * rho[0], l[1] * rho[1]], [l[0] * rho[2], l[1] * rho[3]])
    }
}

struct HamiltonField<'a, H: Hamiltonian + ?Sized> {
    h: &'a H,
    xi_box: f64,
}

// y = (x₁, x₂, ξ₁, ξ₂, ∫ξ·dx)
impl<H: Hamiltonian + ?Sized> System<f64, Vector5<f64>> for HamiltonField<'_, H> {
    fn system(&self, _t: f64, y: &Vector5<f64>, dy: &mut Vector5<f64>) {
        let (gx, gxi) = self.h.gradient([y[0], y[1], y[2], y[3]]);
        dy[0] = gxi[0];
        dy[1] = gxi[1];
        dy[2] = -gx[0];
        dy[3] = -gx[1];
        dy[4] = y[2] * gxi[0] + y[3] * gxi[1];
    }

    fn solout(&mut self, _t: f64, y: &Vector5<f64>, _dy: &Vector5<f64>) -> bool {
        y[2].abs() > self.xi_box || y[3].abs() > self.xi_box
    }
}

/// Integrates from `rho0` over time `t`; returns the endpoint and `∫ξ·dx`.
fn integrate<H: Hamiltonian + ?Sized>(h: &H, rho0: PhasePoint, t: f64, opts: FlowOptions) -> Result<(PhasePoint, f64)> {
    if t == 0.0 {
        return Ok((rho0, 0.0));
    }
    let field = HamiltonField { h, xi_box: opts.xi_box };
    let y0 = Vector5::new(rho0[0], rho0[1], rho0[2], rho0[3], 0.0);
    let mut solver = Dopri5::new(field, 0.0, t, t, y0, opts.rtol, opts.atol);
    solver.set_output(OutputType::Sparse);
    solver
        .integrate()
        .map_err(|e| Error::Integration(e.to_string()))?;
    let y = *solver.y_out().last().expect("integrator always records the endpoint");
    let tf = *solver.x_out().last().expect("integrator always records the endpoint");
    if y[2].abs() > opts.xi_box || y[3].abs() > opts.xi_box || (tf - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::FlowEscape {
            bound: opts.xi_box,
            t: tf,
        });
    }
    Ok(([y[0], y[1], y[2], y[3]], y[4]))
}

/// Flow of `Re p` for time `t ≥ 0`. Angles are returned unwrapped.
pub fn hamilton_flow(p: &FourierTaylorSymbol, rho0: PhasePoint, t: f64, opts: FlowOptions) -> Result<PhasePoint> {
    flow_of(&SymbolHamiltonian::new(p), rho0, t, opts)
}

/// Flow of any [`Hamiltonian`] for time `t ≥ 0`.
pub fn flow_of<H: Hamiltonian + ?Sized>(h: &H, rho0: PhasePoint, t: f64, opts: FlowOptions) -> Result<PhasePoint> {
    if t < 0.0 {
        return Err(Error::Invalid("hamilton_flow integrates forward in time only".into()));
    }
    integrate(h, rho0, t, opts).map(|(y, _)| y)
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(std::f64::consts::TAU)
}

/// One closed `x₁`-loop: its period and `∮ ξ·dx`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Loop {
    pub period: f64,
    pub action: f64,
}

/// First return of `x₁` to `x₁(0) + 2π`, refined by Newton on the crossing time.
pub fn x1_loop(p: &FourierTaylorSymbol, rho0: PhasePoint, opts: FlowOptions) -> Result<Loop> {
    let tau = std::f64::consts::TAU;
    let target = rho0[0] + tau;
    let sh = SymbolHamiltonian::new(p);
    let p = &sh;
    let field = HamiltonField { h: p, xi_box: opts.xi_box };
    let mut v = Vector5::zeros();
    field.system(0.0, &Vector5::new(rho0[0], rho0[1], rho0[2], rho0[3], 0.0), &mut v);
    if v[0].abs() < 1e-14 {
        return Err(Error::PeriodNotFound(0.0));
    }
    // Bracket the crossing by doubling from the linear guess.
    let mut t = tau / v[0].abs();
    let mut x = integrate(p, rho0, t, opts)?.0;
    let mut tries = 0;
    while (x[0] - target) * v[0].signum() < 0.0 {
        t *= 1.5;
        x = integrate(p, rho0, t, opts)?.0;
        tries += 1;
        if tries > 40 {
            return Err(Error::PeriodNotFound(t));
        }
    }
    for _ in 0..50 {
        let (y, _) = integrate(p, rho0, t, opts)?;
        let mut dy = Vector5::zeros();
        field.system(t, &Vector5::new(y[0], y[1], y[2], y[3], 0.0), &mut dy);
        let step = (y[0] - target) / dy[0];
        t -= step;
        if step.abs() < 1e-12 * t.abs().max(1.0) {
            let (_, action) = integrate(p, rho0, t, opts)?;
            return Ok(Loop { period: t, action });
        }
    }
    Err(Error::PeriodNotFound(t))
}

/// One row of the action/period report.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ActionPeriodRow {
    pub energy: f64,
    pub action: f64,
    pub period: f64,
    pub d_action_d_energy: f64,
    pub defect: f64,
}

/// `ξ₁` with `p(ξ₁, 0) = E`, by Newton from the linearization at 0.
pub fn xi1_on_level(p: &FourierTaylorSymbol, energy: f64) -> Result<f64> {
    let dp = p.derivative([1, 0], [0, 0]);
    let p0 = p.eval_real([0.0, 0.0], [0.0, 0.0]).re;
    let mut xi = (energy - p0) / dp.eval_real([0.0, 0.0], [0.0, 0.0]).re;
    for _ in 0..100 {
        let f = p.eval_real([0.0, 0.0], [xi, 0.0]).re - energy;
        let d = dp.eval_real([0.0, 0.0], [xi, 0.0]).re;
        let step = f / d;
        xi -= step;
        if step.abs() < 1e-15 * xi.abs().max(1.0) {
            return Ok(xi);
        }
    }
    Err(Error::NoConvergence {
        what: "level-set Newton",
        iterations: 100,
        residual: (p.eval_real([0.0, 0.0], [xi, 0.0]).re - energy).abs(),
    })
}

/// Compares the central difference of `E ↦ I(E)` with the measured period.
///
/// Rows are produced for interior grid points only; the grid must be sorted.
pub fn action_period_check(p: &FourierTaylorSymbol, energies: &[f64], opts: FlowOptions) -> Result<Vec<ActionPeriodRow>> {
    if energies.len() < 3 {
        return Err(Error::Invalid("action/period check needs at least 3 energies".into()));
    }
    let loops = energies
        .iter()
        .map(|&e| {
            let xi1 = xi1_on_level(p, e)?;
            x1_loop(p, [0.0, 0.0, xi1, 0.0], opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((1..energies.len() - 1)
        .map(|i| {
            let dide = (loops[i + 1].action - loops[i - 1].action) / (energies[i + 1] - energies[i - 1]);
            ActionPeriodRow {
                energy: energies[i],
                action: loops[i].action,
                period: loops[i].period,
                d_action_d_energy: dide,
                defect: (dide - loops[i].period).abs(),
            }
        })
        .collect())
}

/// Largest spread of `∮ ξ·dx` over loops started at the given points.
pub fn action_spread(p: &FourierTaylorSymbol, starts: &[PhasePoint], opts: FlowOptions) -> Result<f64> {
    let actions = starts
        .iter()
        .map(|s| x1_loop(p, *s, opts).map(|l| l.action))
        .collect::<Result<Vec<_>>>()?;
    let lo = actions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = actions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo)
}

pub fn write_report_csv<W: std::io::Write>(rows: &[ActionPeriodRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "E,I,T,dI_dE,abs_dI_dE_minus_T")?;
    for r in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.energy, r.action, r.period, r.d_action_d_energy, r.defect)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolkit::poisson_bracket;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn p_benchmark() -> FourierTaylorSymbol {
        FourierTaylorSymbol::xi(1).add_scaled(&FourierTaylorSymbol::monomial([0, 0], [2, 0], c(1.0)), c(0.3))
    }

    #[test]
    fn average_keeps_m1_zero_modes() {
        let q = FourierTaylorSymbol::xi(2)
            .add(&multiply_cos_x1_one_plus_xi2())
            .add_scaled(&FourierTaylorSymbol::sin_mode([1, 1]), c(0.1));
        assert_eq!(flow_average(&q).max_abs_diff(&FourierTaylorSymbol::xi(2)), 0.0);
        let cc = crate::symbolkit::multiply(
            &FourierTaylorSymbol::cos_mode([1, 0]),
            &FourierTaylorSymbol::cos_mode([0, 1]),
            Caps::default(),
        );
        assert!(flow_average(&cc).is_zero());
    }

    fn multiply_cos_x1_one_plus_xi2() -> FourierTaylorSymbol {
        let one_plus = FourierTaylorSymbol::constant(c(1.0)).add(&FourierTaylorSymbol::xi(2));
        crate::symbolkit::multiply(&FourierTaylorSymbol::cos_mode([1, 0]), &one_plus, Caps::default()).scale(c(0.2))
    }

    #[test]
    fn weight_of_cosine_is_sine() {
        let m = FlowModel::new(FourierTaylorSymbol::xi(1), FourierTaylorSymbol::cos_mode([1, 0]), 0.1).unwrap();
        let g = weight_G(&m, Caps::default()).unwrap();
        assert!(g.max_abs_diff(&FourierTaylorSymbol::sin_mode([1, 0])) < 1e-15);
    }

    #[test]
    fn weight_residual_vanishes() {
        let q = FourierTaylorSymbol::sin_mode([1, 1]).add(&multiply_cos_x1_one_plus_xi2());
        let m = FlowModel::new(p_benchmark(), q.clone(), 0.1).unwrap();
        let caps = Caps { k: 8, d: 10 };
        let g = weight_G(&m, caps).unwrap();
        let hpg = poisson_bracket(&m.p, &g, caps);
        let target = q.sub(&flow_average(&q));
        // exact up to the Taylor cap
        let mut diff = hpg.sub(&target);
        diff.set_xi_bound(caps.d - 1);
        assert!(diff.max_abs() < 1e-12, "{}", diff.max_abs());
        assert!(flow_average(&hpg).is_zero());
    }

    #[test]
    fn degenerate_p_rejected() {
        let p = FourierTaylorSymbol::monomial([0, 0], [2, 0], c(1.0));
        assert!(matches!(FlowModel::new(p, FourierTaylorSymbol::xi(2), 0.1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn transport_flow() {
        let y = hamilton_flow(&FourierTaylorSymbol::xi(1), [0.0, 0.0, 0.2, 0.1], 1.5, FlowOptions::default()).unwrap();
        assert!((y[0] - 1.5).abs() < 1e-12);
        assert!(y[1].abs() < 1e-14 && (y[2] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn harmonic_rotation_closes() {
        let h = HarmonicOscillator { lambdas: [1.0, 1.0] };
        let rho0 = [0.3, -0.2, 0.1, 0.25];
        let y = flow_of(&h, rho0, std::f64::consts::TAU, FlowOptions::default()).unwrap();
        for i in 0..4 {
            assert!((y[i] - rho0[i]).abs() < 1e-9);
        }
        assert!((h.value(y) - h.value(rho0)).abs() < 1e-9);
    }

    #[test]
    fn period_for_quadratic_p() {
        let l = x1_loop(&p_benchmark(), [0.0, 0.0, 0.1, 0.0], FlowOptions::default()).unwrap();
        assert!((l.period - std::f64::consts::TAU / 1.06).abs() < 1e-10);
    }
}
