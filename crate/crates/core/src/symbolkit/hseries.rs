use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::algebra::{bidifferential_skipping, LIE_MAX_TERMS, LIE_PRUNE, LIE_TOLERANCE};
use super::symbol::{Caps, FourierTaylorSymbol};
use super::SymbolError;

/// A full symbol `Σ_{n ≤ N} h^n p_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSeries {
    pub terms: Vec<FourierTaylorSymbol>,
}

impl HSeries {
    pub fn zero(order: usize) -> Self {
        HSeries {
            terms: vec![FourierTaylorSymbol::zero(0, 0); order + 1],
        }
    }

    /// `p` at order `h^0`, zero above.
    pub fn principal(p: FourierTaylorSymbol, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.terms[0] = p;
        s
    }

    pub fn from_terms(terms: Vec<FourierTaylorSymbol>) -> Self {
        assert!(!terms.is_empty(), "an h-series needs at least the h^0 term");
        HSeries { terms }
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn term(&self, n: usize) -> &FourierTaylorSymbol {
        &self.terms[n]
    }

    /// Truncates or zero-extends to order `n`.
    pub fn with_order(&self, n: usize) -> Self {
        let mut terms = self.terms.clone();
        terms.resize(n + 1, FourierTaylorSymbol::zero(0, 0));
        HSeries { terms }
    }

    pub fn axpy(&mut self, other: &HSeries, c: Complex64) {
        for (t, o) in self.terms.iter_mut().zip(other.terms.iter()) {
            t.axpy(o, c);
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        HSeries {
            terms: self.terms.iter().map(|t| t.scale(c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.is_zero())
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.l1_norm()).sum()
    }

    /// Largest x-dependent coefficient at each order.
    pub fn x_dependent_defects(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.x_dependent_max()).collect()
    }

    /// Largest coefficient difference, order by order.
    pub fn max_abs_diff(&self, other: &HSeries) -> f64 {
        let n = self.terms.len().max(other.terms.len());
        let zero = FourierTaylorSymbol::zero(0, 0);
        (0..n)
            .map(|i| {
                let a = self.terms.get(i).unwrap_or(&zero);
                let b = other.terms.get(i).unwrap_or(&zero);
                a.max_abs_diff(b)
            })
            .fold(0.0, f64::max)
    }

    /// Evaluates `Σ h^n p_n` at a real phase-space point.
    pub fn eval_real(&self, h: f64, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let mut hn = 1.0;
        let mut s = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            s += t.eval_real(x, xi) * hn;
            hn *= h;
        }
        s
    }
}

/// Symbol of `[h^j a, Q]`, kept up to `h^order`.
fn ad(a: &FourierTaylorSymbol, j: i32, q: &HSeries, order: usize, caps: Caps, skip: f64) -> HSeries {
    let c = Complex64::new(0.0, -0.5);
    let mut out = HSeries::zero(order);
    for (l, ql) in q.terms.iter().enumerate() {
        if ql.is_zero() {
            continue;
        }
        let mut n = 1u32;
        loop {
            let target = l as i32 + j + n as i32;
            if target > order as i32 {
                break;
            }
            if target >= 0 {
                let t = bidifferential_skipping(a, ql, n, caps, skip);
                out.terms[target as usize].axpy(&t, c.powu(n) * 2.0);
            }
            n += 2;
        }
    }
    out
}

/// `e^{ad_{h^j a}} P` truncated at `h^order`.
///
/// For `j ≥ 0` the series is finite. For `j = −1` every term contributes at
/// the order it acts on and the series is summed until its terms are
/// negligible.
pub fn moyal_conjugation_step(
    p: &HSeries,
    a: &FourierTaylorSymbol,
    j: i32,
    order: usize,
    caps: Caps,
) -> Result<HSeries, SymbolError> {
    assert!(j >= -1, "generators enter at h^j with j ≥ -1");
    let mut result = p.with_order(order);
    if a.is_zero() {
        return Ok(result);
    }
    let mut term = result.clone();
    let max_terms = if j >= 0 {
        order + 2
    } else {
        LIE_MAX_TERMS
    };
    for k in 1..=max_terms {
        let floor = LIE_PRUNE * result.l1_norm();
        term = ad(a, j, &term, order, caps, floor * k as f64)
            .scale(Complex64::new(1.0 / k as f64, 0.0));
        for t in term.terms.iter_mut() {
            t.prune(floor);
        }
        if term.is_zero() {
            return Ok(result);
        }
        result.axpy(&term, Complex64::new(1.0, 0.0));
        if j < 0 && term.l1_norm() <= LIE_TOLERANCE * result.l1_norm().max(1.0) {
            return Ok(result);
        }
    }
    if j >= 0 {
        return Ok(result);
    }
    Err(SymbolError::LieSeriesDiverged {
        terms: max_terms,
        last_norm: term.l1_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_is_identity() {
        let p = HSeries::principal(FourierTaylorSymbol::xi(1), 2);
        let out =
            moyal_conjugation_step(&p, &FourierTaylorSymbol::zero(0, 0), 0, 2, Caps::default())
                .unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn first_order_conjugation_of_transport() {
        // h·[e^{ix₁}, ξ₁] has symbol h·(2/2i)·{e^{ix₁}, ξ₁} = h·(1/i)(−i e^{ix₁}) = −h e^{ix₁}
        let p = HSeries::principal(FourierTaylorSymbol::xi(1), 1);
        let out =
            moyal_conjugation_step(&p, &FourierTaylorSymbol::exp_mode([1, 0]), 0, 1, Caps::default())
                .unwrap();
        assert_eq!(out.terms[0], FourierTaylorSymbol::xi(1));
        assert!((out.terms[1].coeff([1, 0], [0, 0]) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.terms[1].num_terms(), 1);
    }
}
