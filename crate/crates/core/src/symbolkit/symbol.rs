use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{self, n_monomials, ZERO};
use super::SymbolError;

pub type Mode = [i32; 2];
pub type MultiIndex = [u32; 2];

/// Coefficients smaller than this are stored as absent.
pub const DROP_THRESHOLD: f64 = 1e-30;

/// Configured maxima for the x-degree `K` and ξ-degree `D` of products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    #[serde(rename = "K")]
    pub k: i32,
    #[serde(rename = "D")]
    pub d: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { k: 8, d: 6 }
    }
}

/// Running record of what truncation has discarded.
///
/// Both fields are upper bounds on the ℓ¹ mass of dropped coefficients, kept
/// separately for the Fourier cap `K` and the Taylor cap `D`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub x_overflow: f64,
    pub xi_overflow: f64,
    /// Mass removed by [`FourierTaylorSymbol::prune`].
    #[serde(default)]
    pub pruned: f64,
}

impl Truncation {
    pub fn merge(self, other: Truncation) -> Truncation {
        Truncation {
            x_overflow: self.x_overflow.max(other.x_overflow),
            xi_overflow: self.xi_overflow.max(other.xi_overflow),
            pruned: self.pruned.max(other.pruned),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.x_overflow == 0.0 && self.xi_overflow == 0.0 && self.pruned == 0.0
    }
}

/// A finite sum `Σ c_{m,α} e^{im·x} ξ^α` on `T*T²`.
///
/// Internally each Fourier mode owns a dense graded Taylor polynomial of
/// degree `D`; modes whose polynomial vanishes are not stored and individual
/// coefficients below [`DROP_THRESHOLD`] are zeroed.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylorSymbol {
    k: i32,
    d: u32,
    modes: BTreeMap<Mode, Vec<Complex64>>,
    truncation: Truncation,
}

impl FourierTaylorSymbol {
    pub fn zero(k: i32, d: u32) -> Self {
        FourierTaylorSymbol {
            k: k.max(0),
            d,
            modes: BTreeMap::new(),
            truncation: Truncation::default(),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        let mut s = Self::zero(0, 0);
        s.add_term([0, 0], [0, 0], c);
        s
    }

    /// `c · e^{im·x} ξ^α` with the tightest bounds that hold it.
    pub fn monomial(m: Mode, alpha: MultiIndex, c: Complex64) -> Self {
        let mut s = Self::zero(m[0].abs().max(m[1].abs()), alpha[0] + alpha[1]);
        s.add_term(m, alpha, c);
        s
    }

    /// `ξ_j` for `j ∈ {1, 2}`.
    pub fn xi(j: usize) -> Self {
        let alpha = if j == 1 { [1, 0] } else { [0, 1] };
        Self::monomial([0, 0], alpha, Complex64::new(1.0, 0.0))
    }

    /// `e^{im·x}`.
    pub fn exp_mode(m: Mode) -> Self {
        Self::monomial(m, [0, 0], Complex64::new(1.0, 0.0))
    }

    /// `cos(m·x)`.
    pub fn cos_mode(m: Mode) -> Self {
        let half = Complex64::new(0.5, 0.0);
        let mut s = Self::monomial(m, [0, 0], half);
        s.add_term([-m[0], -m[1]], [0, 0], half);
        s
    }

    /// `sin(m·x)`.
    pub fn sin_mode(m: Mode) -> Self {
        let mut s = Self::monomial(m, [0, 0], Complex64::new(0.0, -0.5));
        s.add_term([-m[0], -m[1]], [0, 0], Complex64::new(0.0, 0.5));
        s
    }

    pub fn x_degree_bound(&self) -> i32 {
        self.k
    }

    pub fn xi_degree_bound(&self) -> u32 {
        self.d
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub(crate) fn set_truncation(&mut self, t: Truncation) {
        self.truncation = t;
    }

    /// Zeroes every coefficient with magnitude below `threshold` and records
    /// the removed ℓ¹ mass.
    pub fn prune(&mut self, threshold: f64) {
        let mut lost = 0.0;
        self.modes.retain(|_, p| {
            let mut any = false;
            for v in p.iter_mut() {
                let a = v.norm();
                if a < threshold {
                    lost += a;
                    *v = ZERO;
                } else {
                    any = true;
                }
            }
            any
        });
        if lost > 0.0 {
            self.truncation.pruned = self.truncation.pruned.max(lost);
        }
    }

    /// Adds `c` to the coefficient at `(m, α)`, growing the bounds if needed.
    pub fn add_term(&mut self, m: Mode, alpha: MultiIndex, c: Complex64) {
        let km = m[0].abs().max(m[1].abs());
        let da = alpha[0] + alpha[1];
        if km > self.k {
            self.k = km;
        }
        if da > self.d {
            self.set_xi_bound(da);
        }
        let len = n_monomials(self.d);
        let p = self.modes.entry(m).or_insert_with(|| vec![ZERO; len]);
        p[poly::mono_index(alpha)] += c;
        self.canonicalize_mode(m);
    }

    /// Raises (or lowers, truncating) the ξ-degree bound.
    pub fn set_xi_bound(&mut self, d: u32) {
        let len = n_monomials(d);
        if d < self.d {
            let mut lost = 0.0f64;
            for p in self.modes.values_mut() {
                lost += p[len..].iter().map(|c| c.norm()).sum::<f64>();
                p.truncate(len);
            }
            if lost > 0.0 {
                self.truncation.xi_overflow = self.truncation.xi_overflow.max(lost);
            }
        } else {
            for p in self.modes.values_mut() {
                p.resize(len, ZERO);
            }
        }
        self.d = d;
        self.canonicalize();
    }

    /// Drops every mode with `max(|m₁|,|m₂|) > k`.
    pub fn set_x_bound(&mut self, k: i32) {
        let mut lost = 0.0f64;
        self.modes.retain(|m, p| {
            let keep = m[0].abs().max(m[1].abs()) <= k;
            if !keep {
                lost += p.iter().map(|c| c.norm()).sum::<f64>();
            }
            keep
        });
        if lost > 0.0 {
            self.truncation.x_overflow = self.truncation.x_overflow.max(lost);
        }
        self.k = k.max(0);
    }

    pub fn coeff(&self, m: Mode, alpha: MultiIndex) -> Complex64 {
        self.modes
            .get(&m)
            .and_then(|p| p.get(poly::mono_index(alpha)).copied())
            .unwrap_or(ZERO)
    }

    /// All stored nonzero coefficients in `(m, α)` order.
    pub fn terms(&self) -> impl Iterator<Item = (Mode, MultiIndex, Complex64)> + '_ {
        self.modes.iter().flat_map(|(m, p)| {
            p.iter()
                .enumerate()
                .filter(|(_, c)| **c != ZERO)
                .map(move |(i, c)| (*m, poly::mono_exponent(i), *c))
        })
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &[Complex64])> {
        self.modes.iter().map(|(m, p)| (m, p.as_slice()))
    }

    pub fn mode_poly(&self, m: Mode) -> Option<&[Complex64]> {
        self.modes.get(&m).map(|p| p.as_slice())
    }

    pub fn num_terms(&self) -> usize {
        self.terms().count()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// True iff every stored key has `m = 0`.
    pub fn is_x_independent(&self) -> bool {
        self.modes.keys().all(|m| *m == [0, 0])
    }

    /// Projection onto modes satisfying `keep`.
    pub fn filter_modes(&self, keep: impl Fn(Mode) -> bool) -> Self {
        let mut out = self.clone();
        out.modes.retain(|m, _| keep(*m));
        out
    }

    /// The x-average over `T²` (the `m = 0` mode).
    pub fn x_mean(&self) -> Self {
        self.filter_modes(|m| m == [0, 0])
    }

    /// Everything but the `m = 0` mode.
    pub fn oscillating_part(&self) -> Self {
        self.filter_modes(|m| m != [0, 0])
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for p in out.modes.values_mut() {
            for v in p.iter_mut() {
                *v *= c;
            }
        }
        out.canonicalize();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, other: &Self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.axpy(other, c);
        out
    }

    /// In place `self += c · other`.
    pub fn axpy(&mut self, other: &Self, c: Complex64) {
        if other.d > self.d {
            self.set_xi_bound(other.d);
        }
        self.k = self.k.max(other.k);
        let len = n_monomials(self.d);
        for (m, q) in &other.modes {
            let p = self.modes.entry(*m).or_insert_with(|| vec![ZERO; len]);
            for (pi, qi) in p.iter_mut().zip(q.iter()) {
                *pi += c * qi;
            }
        }
        self.truncation = self.truncation.merge(other.truncation);
        self.canonicalize();
    }

    /// `∂_ξ^γ ∂_x^δ` of the symbol.
    pub fn derivative(&self, gamma: MultiIndex, delta: MultiIndex) -> Self {
        let g = gamma[0] + gamma[1];
        let mut out = Self::zero(self.k, self.d.saturating_sub(g));
        out.truncation = self.truncation;
        if g > self.d {
            return out;
        }
        for (m, p) in &self.modes {
            let f = mode_factor(*m, delta);
            if f == ZERO {
                continue;
            }
            let mut dp = poly::derivative(p, gamma);
            for v in dp.iter_mut() {
                *v *= f;
            }
            out.modes.insert(*m, dp);
        }
        out.canonicalize();
        out
    }

    /// Value at a (possibly complex) phase-space point.
    pub fn eval(&self, x: [f64; 2], xi: [Complex64; 2]) -> Complex64 {
        self.modes
            .iter()
            .map(|(m, p)| {
                let phase = Complex64::new(0.0, m[0] as f64 * x[0] + m[1] as f64 * x[1]).exp();
                phase * poly::eval(p, xi)
            })
            .sum()
    }

    /// Value at a real phase-space point.
    pub fn eval_real(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        self.eval(x, [Complex64::new(xi[0], 0.0), Complex64::new(xi[1], 0.0)])
    }

    /// For an x-independent symbol, its value at `ξ`.
    pub fn eval_xi(&self, xi: [Complex64; 2]) -> Complex64 {
        self.modes
            .get(&[0, 0])
            .map(|p| poly::eval(p, xi))
            .unwrap_or(ZERO)
    }

    /// Sup norm over coefficients.
    pub fn max_abs(&self) -> f64 {
        self.modes
            .values()
            .flat_map(|p| p.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// ℓ¹ norm over coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.modes.values().flat_map(|p| p.iter()).map(|c| c.norm()).sum()
    }

    /// Largest coefficient magnitude over modes `m ≠ 0`.
    pub fn x_dependent_max(&self) -> f64 {
        self.modes
            .iter()
            .filter(|(m, _)| **m != [0, 0])
            .flat_map(|(_, p)| p.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Sup over coefficients of `|self − other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    fn canonicalize_mode(&mut self, m: Mode) {
        if let Some(p) = self.modes.get_mut(&m) {
            let mut any = false;
            for v in p.iter_mut() {
                if v.norm() < DROP_THRESHOLD {
                    *v = ZERO;
                } else {
                    any = true;
                }
            }
            if !any {
                self.modes.remove(&m);
            }
        }
    }

    pub(crate) fn canonicalize(&mut self) {
        self.modes.retain(|_, p| {
            let mut any = false;
            for v in p.iter_mut() {
                if v.norm() < DROP_THRESHOLD {
                    *v = ZERO;
                } else {
                    any = true;
                }
            }
            any
        });
    }

    pub(crate) fn from_mode_map(
        k: i32,
        d: u32,
        modes: BTreeMap<Mode, Vec<Complex64>>,
        truncation: Truncation,
    ) -> Self {
        let mut s = FourierTaylorSymbol {
            k,
            d,
            modes,
            truncation,
        };
        let len = n_monomials(d);
        for p in s.modes.values_mut() {
            p.resize(len, ZERO);
        }
        s.canonicalize();
        s
    }

    /// Checks the stored keys against the declared bounds.
    pub fn validate(&self) -> Result<(), SymbolError> {
        for (m, _, _) in self.terms() {
            if m[0].abs() > self.k || m[1].abs() > self.k {
                return Err(SymbolError::BoundViolation(format!(
                    "mode {m:?} exceeds K = {}",
                    self.k
                )));
            }
        }
        Ok(())
    }
}

/// `(im)^δ`.
pub(crate) fn mode_factor(m: Mode, delta: MultiIndex) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let f1 = (i * m[0] as f64).powu(delta[0]);
    let f2 = (i * m[1] as f64).powu(delta[1]);
    f1 * f2
}
