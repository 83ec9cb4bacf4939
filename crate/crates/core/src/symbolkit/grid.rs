//! Pseudo-spectral evaluation of bidifferential products.
//!
//! Each operand is synthesized on an `n × n` grid in `x` (one FFT per
//! Taylor coefficient), multiplied pointwise as polynomials in `ξ`, and
//! analysed back. With `n > 2(K_a + K_b)` no product mode aliases.

use std::collections::BTreeMap;
use num_complex::Complex64;

use crate::fft::{unwrap, wrap, Fft2};

use super::poly::{self, mono_exponent, mono_index, n_monomials, ZERO};
use super::symbol::{mode_factor, Caps, FourierTaylorSymbol, Mode, MultiIndex, Truncation};

/// Coefficients below this fraction of the product scale are rounding noise.
const NOISE: f64 = 1e-17;

/// Smallest `n ≥ min` of the form `2^a 3^b`.
fn grid_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1;
    while p2 < 2 * min.max(1) {
        let mut v = p2;
        while v < min {
            v *= 3;
        }
        best = best.min(v);
        p2 *= 2;
    }
    best
}

/// Point-major grid values of `∂_ξ^γ ∂_x^δ s`, with ξ-degree `deg(s) − |γ|`.
fn synthesize(s: &FourierTaylorSymbol, gamma: MultiIndex, delta: MultiIndex, fft: &Fft2) -> (usize, Vec<Complex64>) {
    let n = fft.n;
    let g = gamma[0] + gamma[1];
    let d = s.xi_degree_bound();
    if g > d {
        return (0, Vec::new());
    }
    let len = n_monomials(d - g);
    let mut coef_major = vec![ZERO; len * n * n];
    for (m, p) in s.modes() {
        let f = mode_factor(*m, delta);
        if f == ZERO {
            continue;
        }
        let dp = poly::derivative(p, gamma);
        let at = wrap(m[0], n) * n + wrap(m[1], n);
        for (c, v) in dp.iter().enumerate() {
            coef_major[c * n * n + at] = f * v;
        }
    }
    let mut pt_major = vec![ZERO; len * n * n];
    for c in 0..len {
        let slice = &mut coef_major[c * n * n..(c + 1) * n * n];
        if slice.iter().all(|v| *v == ZERO) {
            continue;
        }
        fft.apply(slice, true);
        for (pt, v) in slice.iter().enumerate() {
            pt_major[pt * len + c] = *v;
        }
    }
    (len, pt_major)
}

/// `(i, j, k)` with `ξ^{α_i} ξ^{α_j} = ξ^{α_k}` and `deg k ≤ d_res`.
fn triples(la: usize, lb: usize, d_res: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for i in 0..la {
        let ea = mono_exponent(i);
        for j in 0..lb {
            let eb = mono_exponent(j);
            if ea[0] + ea[1] + eb[0] + eb[1] <= d_res {
                out.push((i as u32, j as u32, mono_index([ea[0] + eb[0], ea[1] + eb[1]]) as u32));
            }
        }
    }
    out
}

fn ell1_by_degree(s: &FourierTaylorSymbol, gamma: MultiIndex, delta: MultiIndex) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (m, p) in s.modes() {
        let f = mode_factor(*m, delta).norm();
        if f == 0.0 {
            continue;
        }
        let norms = poly::degree_norms(&poly::derivative(p, gamma));
        if out.len() < norms.len() {
            out.resize(norms.len(), 0.0);
        }
        for (o, v) in out.iter_mut().zip(norms) {
            *o += f * v;
        }
    }
    out
}

/// `T_n(a, b)` on a grid; same conventions as the direct routine.
pub(crate) fn bidifferential_grid(
    a: &FourierTaylorSymbol,
    b: &FourierTaylorSymbol,
    n_ord: u32,
    caps: Caps,
    combos: &[(MultiIndex, MultiIndex, f64)],
) -> FourierTaylorSymbol {
    let da = a.xi_degree_bound();
    let db = b.xi_degree_bound();
    let k_res = (a.x_degree_bound() + b.x_degree_bound()).min(caps.k);
    let d_res = (da + db - n_ord).min(caps.d);
    let len = n_monomials(d_res);
    let kmax = (a.x_degree_bound() + b.x_degree_bound()) as usize;
    let fft = Fft2::new(grid_size(2 * kmax + 1));
    let n = fft.n;
    let mut acc = vec![ZERO; n * n * len];
    let mut trunc = a.truncation().merge(b.truncation());
    let mut scale = 0.0;
    let mut xi_lost = 0.0;
    for (gamma, delta, coef) in combos {
        // a carries ∂_ξ^γ ∂_x^δ, b carries ∂_x^γ ∂_ξ^δ
        let (la, ga) = synthesize(a, *gamma, *delta, &fft);
        let (lb, gb) = synthesize(b, *delta, *gamma, &fft);
        if la == 0 || lb == 0 {
            continue;
        }
        let na = ell1_by_degree(a, *gamma, *delta);
        let nb = ell1_by_degree(b, *delta, *gamma);
        scale += coef.abs() * na.iter().sum::<f64>() * nb.iter().sum::<f64>();
        for (i, x) in na.iter().enumerate() {
            for (j, y) in nb.iter().enumerate() {
                if (i + j) as u32 > d_res {
                    xi_lost += coef.abs() * x * y;
                }
            }
        }
        let tr = triples(la, lb, d_res);
        let c = Complex64::new(*coef, 0.0);
        for pt in 0..n * n {
            let pa = &ga[pt * la..(pt + 1) * la];
            let pb = &gb[pt * lb..(pt + 1) * lb];
            let out = &mut acc[pt * len..(pt + 1) * len];
            for &(i, j, k) in &tr {
                out[k as usize] += c * pa[i as usize] * pb[j as usize];
            }
        }
    }
    if xi_lost > 0.0 {
        trunc.xi_overflow = trunc.xi_overflow.max(xi_lost);
    }
    let norm = 1.0 / (n * n) as f64;
    let floor = NOISE * scale;
    let mut modes: BTreeMap<Mode, Vec<Complex64>> = BTreeMap::new();
    let mut x_lost = 0.0;
    let mut noise = 0.0;
    let mut slice = vec![ZERO; n * n];
    for c in 0..len {
        for pt in 0..n * n {
            slice[pt] = acc[pt * len + c];
        }
        fft.apply(&mut slice, false);
        for i in 0..n {
            let m1 = unwrap(i, n);
            for j in 0..n {
                let m2 = unwrap(j, n);
                let v = slice[i * n + j] * norm;
                let a = v.norm();
                if a < floor {
                    noise += a;
                    continue;
                }
                if m1.abs().max(m2.abs()) > k_res {
                    x_lost += a;
                    continue;
                }
                modes.entry([m1, m2]).or_insert_with(|| vec![ZERO; len])[c] = v;
            }
        }
    }
    if x_lost > 0.0 {
        trunc.x_overflow = trunc.x_overflow.max(x_lost);
    }
    if noise > 0.0 {
        trunc.pruned = trunc.pruned.max(noise);
    }
    FourierTaylorSymbol::from_mode_map(k_res, d_res, modes, Truncation { ..trunc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_smooth() {
        assert_eq!(grid_size(33), 36);
        assert_eq!(grid_size(17), 18);
        assert_eq!(grid_size(64), 64);
    }
}
