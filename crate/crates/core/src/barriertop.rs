//! Barrier-top resonances reduced to a torus spectral problem.
//!
//! Near a resonant saddle the rotated symbol is `p₂ + iεe^{3πi/4}p₃ + O(ε²)`
//! with `p₂ = Σ λ_j/2 (ξ_j² + x_j²)`. The `p₂` flow rotates `z_j = x_j + iξ_j`
//! as `e^{−iλ_j t}`, so flow averages are computed monomial by monomial.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::birkhoff::NormalFormResult;
use crate::error::{Error, Result};
use crate::lattice::{default_k_box, quasi_eigenvalues, FloquetData, SpectralRectangle};

/// Exponents of `(x₁, x₂, ξ₁, ξ₂)`.
pub type Exponent = [u32; 4];

/// Largest total degree accepted from input.
pub const MAX_POLY_DEGREE: u32 = 24;

/// Real polynomial on `ℝ⁴ = T*ℝ²`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhasePoly {
    terms: BTreeMap<Exponent, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    e: Exponent,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyJson {
    terms: Vec<TermJson>,
}

impl Serialize for PhasePoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            terms: self.terms.iter().map(|(e, c)| TermJson { e: *e, c: *c }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhasePoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyJson::deserialize(d)?;
        let mut p = PhasePoly::zero();
        for t in raw.terms {
            if !t.c.is_finite() {
                return Err(serde::de::Error::custom("non-finite coefficient"));
            }
            if t.e.iter().sum::<u32>() > MAX_POLY_DEGREE {
                return Err(serde::de::Error::custom(format!(
                    "degree of {:?} exceeds {MAX_POLY_DEGREE}",
                    t.e
                )));
            }
            p.add_term(t.e, t.c);
        }
        Ok(p)
    }
}

impl PhasePoly {
    pub fn zero() -> Self {
        PhasePoly::default()
    }

    pub fn monomial(e: Exponent, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// Polynomial in `x` only, from `(exponent of x₁, exponent of x₂) → coefficient`.
    pub fn in_x(coeffs: &[([u32; 2], f64)]) -> Self {
        let mut p = Self::zero();
        for (e, c) in coeffs {
            p.add_term([e[0], e[1], 0, 0], *c);
        }
        p
    }

    /// `Σ λ_j/2 (ξ_j² + x_j²)`.
    pub fn harmonic(lambdas: [f64; 2]) -> Self {
        let mut p = Self::zero();
        p.add_term([2, 0, 0, 0], lambdas[0] / 2.0);
        p.add_term([0, 0, 2, 0], lambdas[0] / 2.0);
        p.add_term([0, 2, 0, 0], lambdas[1] / 2.0);
        p.add_term([0, 0, 0, 2], lambdas[1] / 2.0);
        p
    }

    pub fn add_term(&mut self, e: Exponent, c: f64) {
        let v = self.terms.entry(e).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: Exponent) -> f64 {
        self.terms.get(&e).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// True iff every term has total degree `d`.
    pub fn is_homogeneous(&self, d: u32) -> bool {
        self.terms.keys().all(|e| e.iter().sum::<u32>() == d)
    }

    pub fn depends_on_xi(&self) -> bool {
        self.terms.keys().any(|e| e[2] + e[3] > 0)
    }

    pub fn eval(&self, rho: [f64; 4]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * (0..4).map(|i| rho[i].powi(e[i] as i32)).product::<f64>())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut keys: Vec<&Exponent> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.into_iter()
            .map(|e| (self.coeff(*e) - other.coeff(*e)).abs())
            .fold(0.0, f64::max)
    }

    /// The polynomial with `x ↦ s·x`, `ξ ↦ s·ξ`.
    pub fn dilate(&self, s: f64) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            p.add_term(*e, c * s.powi(e.iter().sum::<u32>() as i32));
        }
        p
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exponents of `(z₁, z̄₁, z₂, z̄₂)`.
type ZExponent = [u32; 4];

/// Expands in `z_j = x_j + iξ_j`: `x = (z + z̄)/2`, `ξ = (z − z̄)/2i`.
fn to_z(p: &PhasePoly) -> BTreeMap<ZExponent, Complex64> {
    let mut out: BTreeMap<ZExponent, Complex64> = BTreeMap::new();
    for (e, c) in &p.terms {
        // one factor per coordinate j: x_j^{e_j} ξ_j^{e_{j+2}}
        let mut acc: BTreeMap<ZExponent, Complex64> = BTreeMap::new();
        acc.insert([0; 4], Complex64::new(*c, 0.0));
        for j in 0..2 {
            let (ex, ek) = (e[j], e[j + 2]);
            let mut factor: BTreeMap<[u32; 2], Complex64> = BTreeMap::new();
            let scale = Complex64::new(0.5, 0.0).powu(ex) * Complex64::new(0.0, -0.5).powu(ek);
            for a in 0..=ex {
                for b in 0..=ek {
                    // (z + z̄)^ex (z − z̄)^ek
                    let coef = binomial(ex, a) * binomial(ek, b) * if (ek - b) % 2 == 1 { -1.0 } else { 1.0 };
                    let key = [a + b, (ex - a) + (ek - b)];
                    *factor.entry(key).or_default() += scale * coef;
                }
            }
            let mut next = BTreeMap::new();
            for (ka, va) in &acc {
                for (kf, vf) in &factor {
                    let mut k = *ka;
                    k[2 * j] += kf[0];
                    k[2 * j + 1] += kf[1];
                    *next.entry(k).or_insert(Complex64::new(0.0, 0.0)) += va * vf;
                }
            }
            acc = next;
        }
        for (k, v) in acc {
            *out.entry(k).or_default() += v;
        }
    }
    out
}

/// Re-expands `Σ c z^a z̄^b` in `(x, ξ)`; the imaginary parts must cancel.
fn from_z(zp: &BTreeMap<ZExponent, Complex64>) -> PhasePoly {
    let mut acc: BTreeMap<Exponent, Complex64> = BTreeMap::new();
    for (k, c) in zp {
        let mut cur: BTreeMap<Exponent, Complex64> = BTreeMap::new();
        cur.insert([0; 4], *c);
        for j in 0..2 {
            let (a, b) = (k[2 * j], k[2 * j + 1]);
            // (x + iξ)^a (x − iξ)^b
            let mut factor: BTreeMap<[u32; 2], Complex64> = BTreeMap::new();
            for s in 0..=a {
                for t in 0..=b {
                    let coef = binomial(a, s) * binomial(b, t);
                    let phase = Complex64::new(0.0, 1.0).powu(s) * Complex64::new(0.0, -1.0).powu(t);
                    *factor.entry([a - s + b - t, s + t]).or_default() += phase * coef;
                }
            }
            let mut next = BTreeMap::new();
            for (ka, va) in &cur {
                for (kf, vf) in &factor {
                    let mut e = *ka;
                    e[j] += kf[0];
                    e[j + 2] += kf[1];
                    *next.entry(e).or_insert(Complex64::new(0.0, 0.0)) += va * vf;
                }
            }
            cur = next;
        }
        for (e, v) in cur {
            *acc.entry(e).or_default() += v;
        }
    }
    let scale = zp.values().map(|c| c.norm()).fold(0.0, f64::max);
    let mut p = PhasePoly::zero();
    for (e, v) in acc {
        // Values at the rounding level of the binomial sums are exact zeros.
        if v.re.abs() > 1e-13 * scale {
            p.add_term(e, v.re);
        }
    }
    p
}

/// `(ω, n)` with `λ = ω n`, `n` coprime positive integers.
pub fn common_frequency(lambdas: [f64; 2]) -> Result<(f64, [i64; 2])> {
    if !(lambdas[0] > 0.0 && lambdas[1] > 0.0) || !lambdas[0].is_finite() || !lambdas[1].is_finite() {
        return Err(Error::Invalid(format!("frequencies must be positive, got {lambdas:?}")));
    }
    let r = lambdas[1] / lambdas[0];
    // continued-fraction convergents of λ₂/λ₁
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = r;
    for _ in 0..40 {
        let a = x.floor();
        let (p2, q2) = (a as i64 * p1 + p0, a as i64 * q1 + q0);
        if q2 > 1000 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (p1 as f64 / q1 as f64 - r).abs() <= 1e-12 * r.max(1.0) {
            return Ok((lambdas[0] / q1 as f64, [q1, p1]));
        }
        let frac = x - a;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    Err(Error::Invalid(format!("frequencies {lambdas:?} are not rationally related")))
}

/// Common period `2π/ω` of the `p₂` flow.
pub fn period(lambdas: [f64; 2]) -> Result<f64> {
    Ok(TAU / common_frequency(lambdas)?.0)
}

/// Average of `poly` along the flow of `Σ λ_j/2 (ξ_j² + x_j²)`.
pub fn harmonic_average(poly: &PhasePoly, lambdas: [f64; 2]) -> Result<PhasePoly> {
    let (_, n) = common_frequency(lambdas)?;
    let zp: BTreeMap<ZExponent, Complex64> = to_z(poly)
        .into_iter()
        .filter(|(k, _)| {
            n[0] * (k[0] as i64 - k[1] as i64) + n[1] * (k[2] as i64 - k[3] as i64) == 0
        })
        .collect();
    Ok(from_z(&zp))
}

/// The flow of `p₂` from `ρ = (x₁, x₂, ξ₁, ξ₂)` at time `t`.
pub fn harmonic_flow(lambdas: [f64; 2], rho: [f64; 4], t: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for j in 0..2 {
        let z = Complex64::new(rho[j], rho[j + 2]) * Complex64::from_polar(1.0, -lambdas[j] * t);
        out[j] = z.re;
        out[j + 2] = z.im;
    }
    out
}

/// Gauss–Legendre nodes for the quadrature cross-check.
pub const QUADRATURE_NODES: usize = 512;

/// `(1/T)∫₀ᵀ poly(flow_t(ρ)) dt` by Gauss–Legendre quadrature.
pub fn quadrature_average(poly: &PhasePoly, lambdas: [f64; 2], rho: [f64; 4]) -> Result<f64> {
    let t = period(lambdas)?;
    let gl = GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero"));
    Ok(gl.integrate(0.0, t, |s| poly.eval(harmonic_flow(lambdas, rho, s))) / t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantSaddle {
    pub lambdas: [f64; 2],
    #[serde(default)]
    pub k_res: Option<[i32; 2]>,
    pub p3: PhasePoly,
    #[serde(rename = "E0")]
    pub e0: f64,
}

impl ResonantSaddle {
    pub fn validate(&self) -> Result<()> {
        common_frequency(self.lambdas)?;
        if let Some(k) = self.k_res {
            if k == [0, 0] {
                return Err(Error::Invalid("resonance vector must be nonzero".into()));
            }
            let r = self.lambdas[0] * k[0] as f64 + self.lambdas[1] * k[1] as f64;
            if r.abs() > 1e-12 {
                return Err(Error::Invalid(format!("λ·k = {r:e} for k = {k:?}")));
            }
        }
        if self.p3.depends_on_xi() || !self.p3.is_homogeneous(3) {
            return Err(Error::Invalid("p₃ must be a homogeneous cubic in x".into()));
        }
        if !self.e0.is_finite() {
            return Err(Error::Invalid("E₀ must be finite".into()));
        }
        Ok(())
    }
}

/// The rescaled problem `ε⁻²q(εy, εη) = p₂ + iεe^{3πi/4}p₃ + O(ε²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedProblem {
    pub schema: String,
    pub saddle: ResonantSaddle,
    pub epsilon: f64,
    pub h: f64,
    pub h_tilde: f64,
    pub leading: PhasePoly,
    /// `⟨p₃⟩` along the `p₂` flow.
    pub averaged_p3: PhasePoly,
    /// `iεe^{3πi/4}`.
    pub perturbation_factor: Complex64,
    /// Order in `ε` of the neglected remainder.
    pub remainder_order: u32,
    /// Whether `ε > h^{1/4}`.
    pub regime_ok: bool,
}

impl ReducedProblem {
    /// `iεe^{3πi/4}⟨p₃⟩` as coefficients `(exponent, complex value)`.
    pub fn perturbation(&self) -> Vec<(Exponent, Complex64)> {
        self.averaged_p3
            .terms()
            .map(|(e, c)| (*e, self.perturbation_factor * c))
            .collect()
    }
}

pub fn rescale(saddle: &ResonantSaddle, epsilon: f64, h: f64) -> Result<ReducedProblem> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Invalid(format!("ε must be positive, got {epsilon}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Invalid(format!("h must be positive, got {h}")));
    }
    saddle.validate()?;
    let regime_ok = h.powf(0.25) < epsilon;
    if !regime_ok {
        log::warn!("ε = {epsilon} does not exceed h^(1/4) = {:.4}; outside the resonance regime", h.powf(0.25));
    }
    Ok(ReducedProblem {
        schema: "v1".into(),
        saddle: saddle.clone(),
        epsilon,
        h,
        h_tilde: h / (epsilon * epsilon),
        leading: PhasePoly::harmonic(saddle.lambdas),
        averaged_p3: harmonic_average(&saddle.p3, saddle.lambdas)?,
        perturbation_factor: Complex64::new(0.0, epsilon) * Complex64::from_polar(1.0, 0.75 * PI),
        remainder_order: 2,
        regime_ok,
    })
}

/// Recovers `(saddle, ε, h)` from a reduced record.
pub fn unscale(reduced: &ReducedProblem) -> (ResonantSaddle, f64, f64) {
    let eps = reduced.perturbation_factor.norm();
    (reduced.saddle.clone(), eps, reduced.h_tilde * eps * eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub k: [i32; 2],
    pub z: Complex64,
    /// `E₀ − iε²z`.
    pub energy: Complex64,
}

/// Resonances from a normal form posed in the action chart of `p₂`.
pub fn resonance_lattice(
    reduced: &ReducedProblem,
    nf: &NormalFormResult,
    floquet: &FloquetData,
    rect: &SpectralRectangle,
) -> Result<Vec<Resonance>> {
    if nf.p_tilde.is_empty() {
        return Err(Error::Invalid("missing action-chart normal form".into()));
    }
    rect.validate()?;
    let ht = reduced.h_tilde;
    let k_box = default_k_box(nf, ht, floquet, rect)?;
    let e2 = reduced.epsilon * reduced.epsilon;
    Ok(quasi_eigenvalues(nf, ht, floquet, rect, k_box)?
        .into_iter()
        .map(|p| Resonance {
            k: p.k,
            z: p.z,
            energy: Complex64::new(reduced.saddle.e0, 0.0) - Complex64::new(0.0, e2) * p.z,
        })
        .collect())
}

pub fn write_resonances_csv<W: std::io::Write>(res: &[Resonance], mut w: W) -> std::io::Result<()> {
    writeln!(w, "re_E,im_E,k1,k2")?;
    for r in res {
        writeln!(w, "{:.17e},{:.17e},{},{}", r.energy.re, r.energy.im, r.k[0], r.k[1])?;
    }
    Ok(())
}
