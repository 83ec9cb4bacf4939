#![allow(dead_code)]

use num_complex::Complex64;
use pfs_core::symbolkit::FourierTaylorSymbol;
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random symbol with modes `|m_j| ≤ k` and ξ-degree `≤ d`.
pub fn symbol(k: i32, d: u32) -> impl Strategy<Value = FourierTaylorSymbol> {
    let term = (-k..=k, -k..=k, 0..=d, 0..=d, -1.0..1.0f64, -1.0..1.0f64);
    proptest::collection::vec(term, 1..8).prop_map(move |ts| {
        let mut s = FourierTaylorSymbol::zero(k, d);
        for (m1, m2, a1, a2, re, im) in ts {
            if a1 + a2 <= d {
                s.add_term([m1, m2], [a1, a2], c(re, im));
            }
        }
        s
    })
}

/// Random symbol without x-dependence.
pub fn xi_symbol(d: u32) -> impl Strategy<Value = FourierTaylorSymbol> {
    symbol(0, d)
}

