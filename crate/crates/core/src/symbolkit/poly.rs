//! Dense bivariate Taylor polynomials in `ξ = (ξ₁, ξ₂)`.
//!
//! Monomials are stored in graded order: degree 0, then `ξ₁`, `ξ₂`, then
//! `ξ₁²`, `ξ₁ξ₂`, `ξ₂²`, and so on. A polynomial of degree `d` is therefore a
//! prefix of any polynomial of higher degree, which keeps mixed-degree
//! arithmetic index-compatible.

use num_complex::Complex64;
use std::sync::LazyLock;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest ξ-degree the exponent table covers.
pub const MAX_XI_DEGREE: u32 = 48;

static EXPONENTS: LazyLock<Vec<[u32; 2]>> = LazyLock::new(|| {
    let mut out = Vec::with_capacity(n_monomials(MAX_XI_DEGREE));
    for d in 0..=MAX_XI_DEGREE {
        for a2 in 0..=d {
            out.push([d - a2, a2]);
        }
    }
    out
});

static FACTORIALS: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let mut f = vec![1.0f64; 2 * MAX_XI_DEGREE as usize + 2];
    for i in 1..f.len() {
        f[i] = f[i - 1] * i as f64;
    }
    f
});

#[inline]
pub fn n_monomials(degree: u32) -> usize {
    ((degree + 1) * (degree + 2) / 2) as usize
}

#[inline]
pub fn mono_index(alpha: [u32; 2]) -> usize {
    let d = alpha[0] + alpha[1];
    (d * (d + 1) / 2 + alpha[1]) as usize
}

#[inline]
pub fn mono_exponent(index: usize) -> [u32; 2] {
    EXPONENTS[index]
}

#[inline]
pub fn mono_degree(index: usize) -> u32 {
    let e = EXPONENTS[index];
    e[0] + e[1]
}

#[inline]
pub(crate) fn factorial(n: u32) -> f64 {
    FACTORIALS[n as usize]
}

/// `out[..] += scale · (a · b)`, dropping every monomial of degree above
/// `max_degree`. Returns an upper bound on the magnitude of what was dropped.
pub(crate) fn mul_acc(
    a: &[Complex64],
    b: &[Complex64],
    max_degree: u32,
    scale: Complex64,
    out: &mut [Complex64],
) -> f64 {
    debug_assert!(out.len() >= n_monomials(max_degree).min(out.len()));
    let out_len = out.len().min(n_monomials(max_degree));
    for (i, &ai) in a.iter().enumerate() {
        if ai == ZERO {
            continue;
        }
        let [a1, a2] = EXPONENTS[i];
        let da = a1 + a2;
        if da > max_degree {
            break;
        }
        let sa = ai * scale;
        let jmax = n_monomials(max_degree - da).min(b.len());
        for (j, &bj) in b[..jmax].iter().enumerate() {
            if bj == ZERO {
                continue;
            }
            let [b1, b2] = EXPONENTS[j];
            let k = mono_index([a1 + b1, a2 + b2]);
            debug_assert!(k < out_len);
            out[k] += sa * bj;
        }
    }
    dropped_bound(a, b, max_degree) * scale.norm()
}

/// Bound on the ℓ¹ mass of `a · b` living above `max_degree`.
pub(crate) fn dropped_bound(a: &[Complex64], b: &[Complex64], max_degree: u32) -> f64 {
    let da = degree_of_len(a.len());
    let db = degree_of_len(b.len());
    if da + db <= max_degree {
        return 0.0;
    }
    let na = degree_norms(a);
    let nb = degree_norms(b);
    let mut s = 0.0;
    for (i, x) in na.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in nb.iter().enumerate() {
            if (i + j) as u32 > max_degree {
                s += x * y;
            }
        }
    }
    s
}

/// ℓ¹ norm of each homogeneous component.
pub(crate) fn degree_norms(a: &[Complex64]) -> Vec<f64> {
    let d = degree_of_len(a.len());
    let mut out = vec![0.0; d as usize + 1];
    for (i, c) in a.iter().enumerate() {
        out[mono_degree(i) as usize] += c.norm();
    }
    out
}

/// Degree of a full graded polynomial of this length.
pub(crate) fn degree_of_len(len: usize) -> u32 {
    if len == 0 {
        return 0;
    }
    let mut d = 0;
    while n_monomials(d) < len {
        d += 1;
    }
    d
}

/// `∂_ξ^γ a`, returned with degree `deg(a) − |γ|` (empty if that is negative).
pub(crate) fn derivative(a: &[Complex64], gamma: [u32; 2]) -> Vec<Complex64> {
    let d = degree_of_len(a.len());
    let g = gamma[0] + gamma[1];
    if g == 0 {
        return a.to_vec();
    }
    if g > d || a.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; n_monomials(d - g)];
    for (i, &c) in a.iter().enumerate() {
        if c == ZERO {
            continue;
        }
        let [a1, a2] = EXPONENTS[i];
        if a1 < gamma[0] || a2 < gamma[1] {
            continue;
        }
        let f = falling(a1, gamma[0]) * falling(a2, gamma[1]);
        out[mono_index([a1 - gamma[0], a2 - gamma[1]])] += c * f;
    }
    out
}

#[inline]
fn falling(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

/// Horner-free direct evaluation; degrees are small.
pub(crate) fn eval(a: &[Complex64], xi: [Complex64; 2]) -> Complex64 {
    let d = degree_of_len(a.len());
    let mut p1 = vec![Complex64::new(1.0, 0.0); d as usize + 1];
    let mut p2 = p1.clone();
    for k in 1..=d as usize {
        p1[k] = p1[k - 1] * xi[0];
        p2[k] = p2[k - 1] * xi[1];
    }
    a.iter()
        .enumerate()
        .filter(|(_, c)| **c != ZERO)
        .map(|(i, c)| {
            let [e1, e2] = EXPONENTS[i];
            c * p1[e1 as usize] * p2[e2 as usize]
        })
        .sum()
}

/// Power-series reciprocal of `f` up to `degree`, assuming `f[0] ≠ 0`.
pub(crate) fn reciprocal(f: &[Complex64], degree: u32) -> Vec<Complex64> {
    let n = n_monomials(degree);
    let mut g = vec![ZERO; n];
    let f0_inv = f[0].inv();
    g[0] = f0_inv;
    for k in 1..n {
        let [k1, k2] = EXPONENTS[k];
        // (f·g)_k = 0 for k ≠ 0
        let mut s = ZERO;
        for b1 in 0..=k1 {
            for b2 in 0..=k2 {
                if b1 == 0 && b2 == 0 {
                    continue;
                }
                let fi = mono_index([b1, b2]);
                if fi >= f.len() || f[fi] == ZERO {
                    continue;
                }
                s += f[fi] * g[mono_index([k1 - b1, k2 - b2])];
            }
        }
        g[k] = -s * f0_inv;
    }
    g
}

/// Estimated convergence radius of a power series from its homogeneous norms.
pub(crate) fn radius_estimate(a: &[Complex64]) -> f64 {
    let norms = degree_norms(a);
    let c0 = norms.first().copied().unwrap_or(0.0);
    if c0 == 0.0 {
        return 0.0;
    }
    let mut r = f64::INFINITY;
    for (d, n) in norms.iter().enumerate().skip(1) {
        if *n > 0.0 {
            r = r.min((c0 / n).powf(1.0 / d as f64));
        }
    }
    r
}
