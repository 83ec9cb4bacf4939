//! Matching predicted lattices against oracle spectra.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birkhoff::NormalFormResult;
use crate::error::{Error, Result};
use crate::lattice::{default_k_box, quasi_eigenvalues, FloquetData, LatticePoint, SpectralRectangle};
use crate::symbolkit::HSeries;
use crate::torusquant::{oracle_spectrum, OracleSpectrum, WindowSpec};

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
///
/// Returns `assignment[row] = column`. Shortest augmenting paths with
/// potentials, `O(n³)`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// One-to-one partial matching between two point sets.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMatching {
    /// `(index in a, index in b, |a − b|)`, sorted by index in `a`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    pub cost_cap: f64,
}

/// Median distance from each point to its nearest neighbour in the same set.
pub fn median_spacing(points: &[Complex64]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, a)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// Optimal matching minimizing the total distance; pairs farther apart than
/// ten times the median nearest-neighbour spacing are refused.
pub fn match_points(a: &[Complex64], b: &[Complex64]) -> PointMatching {
    let mut all: Vec<Complex64> = a.to_vec();
    all.extend_from_slice(b);
    let spacing = median_spacing(a)
        .into_iter()
        .chain(median_spacing(b))
        .fold(f64::INFINITY, f64::min);
    let cost_cap = if spacing.is_finite() && spacing > 0.0 {
        10.0 * spacing
    } else {
        f64::INFINITY
    };
    let n = a.len().max(b.len());
    // Refused and dummy entries cost more than any admissible full matching.
    let big = if cost_cap.is_finite() {
        cost_cap * (n as f64 + 1.0) * 4.0
    } else {
        all.iter().map(|z| z.norm()).fold(0.0, f64::max) * 4.0 * (n as f64 + 1.0) + 1.0
    };
    let mut cost = vec![big; n * n];
    for (i, za) in a.iter().enumerate() {
        for (j, zb) in b.iter().enumerate() {
            let d = (za - zb).norm();
            if d <= cost_cap {
                cost[i * n + j] = d;
            }
        }
    }
    let assignment = hungarian(&cost, n);
    let mut pairs = Vec::new();
    let mut matched_b = vec![false; b.len()];
    let mut unmatched_a = Vec::new();
    for (i, &j) in assignment.iter().enumerate().take(a.len()) {
        if j < b.len() && cost[i * n + j] < big {
            pairs.push((i, j, cost[i * n + j]));
            matched_b[j] = true;
        } else {
            unmatched_a.push(i);
        }
    }
    let unmatched_b = (0..b.len()).filter(|j| !matched_b[*j]).collect();
    PointMatching {
        pairs,
        unmatched_a,
        unmatched_b,
        cost_cap,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchedPair {
    pub k: [i32; 2],
    pub z_pred: Complex64,
    pub z_oracle: Complex64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub pred: usize,
    pub oracle: usize,
    pub pred_in_shrunk: usize,
    pub oracle_in_shrunk: usize,
    pub matched_in_shrunk: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<LatticePoint>,
    pub unmatched_oracle: Vec<Complex64>,
    /// Over pairs with either member in the shrunk rectangle.
    pub sup_error: f64,
    pub mean_error: f64,
    pub counts: MatchCounts,
    /// No unmatched point of either list lies in the shrunk rectangle.
    pub complete_in_shrunk: bool,
    pub cost_cap: f64,
}

/// Matches lattice points to oracle eigenvalues inside `rect`; statistics
/// are taken over the rectangle shrunk by `shrink`.
pub fn match_spectra(
    pred: &[LatticePoint],
    oracle: &[Complex64],
    rect: &SpectralRectangle,
    epsilon: f64,
    shrink: f64,
) -> MatchReport {
    let pred: Vec<LatticePoint> = pred.iter().copied().filter(|p| rect.contains(p.z, epsilon)).collect();
    let oracle: Vec<Complex64> = oracle.iter().copied().filter(|z| rect.contains(*z, epsilon)).collect();
    let inner = rect.scaled(shrink);
    let zp: Vec<Complex64> = pred.iter().map(|p| p.z).collect();
    let m = match_points(&zp, &oracle);

    let mut sup = 0.0f64;
    let mut sum = 0.0;
    let mut cnt = 0usize;
    let mut pairs = Vec::with_capacity(m.pairs.len());
    for &(i, j, d) in &m.pairs {
        let in_a = inner.contains(zp[i], epsilon);
        let in_b = inner.contains(oracle[j], epsilon);
        if in_a || in_b {
            sup = sup.max(d);
            sum += d;
            cnt += 1;
        }
        pairs.push(MatchedPair {
            k: pred[i].k,
            z_pred: zp[i],
            z_oracle: oracle[j],
            error: d,
        });
    }
    let unmatched_pred: Vec<LatticePoint> = m.unmatched_a.iter().map(|&i| pred[i]).collect();
    let unmatched_oracle: Vec<Complex64> = m.unmatched_b.iter().map(|&j| oracle[j]).collect();
    let complete_in_shrunk = unmatched_pred.iter().all(|p| !inner.contains(p.z, epsilon))
        && unmatched_oracle.iter().all(|z| !inner.contains(*z, epsilon));
    let counts = MatchCounts {
        pred: pred.len(),
        oracle: oracle.len(),
        pred_in_shrunk: zp.iter().filter(|z| inner.contains(**z, epsilon)).count(),
        oracle_in_shrunk: oracle.iter().filter(|z| inner.contains(**z, epsilon)).count(),
        matched_in_shrunk: cnt,
    };
    MatchReport {
        pairs,
        unmatched_pred,
        unmatched_oracle,
        sup_error: sup,
        mean_error: if cnt > 0 { sum / cnt as f64 } else { 0.0 },
        counts,
        complete_in_shrunk,
        cost_cap: m.cost_cap,
    }
}

/// One row of a convergence table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub h: f64,
    pub order: usize,
    pub sup_error: f64,
    pub mean_error: f64,
    pub counts: MatchCounts,
    pub trusted: bool,
    pub trust_margin: f64,
    pub window_m: i32,
    /// `ε ≤ h^(1/2)`: no error rate is expected here.
    #[serde(default)]
    pub exploratory: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyTable {
    pub schema: String,
    pub epsilon: f64,
    pub order: usize,
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log sup_error` against `log h`; `None` when
    /// every error is at eigensolver precision.
    pub slope: Option<f64>,
    pub exact: bool,
    pub all_trusted: bool,
    pub counts_agree: bool,
}

/// Errors below this are treated as eigensolver precision.
pub const EXACT_FLOOR: f64 = 1e-12;

impl StudyTable {
    pub fn from_rows(epsilon: f64, order: usize, rows: Vec<StudyRow>) -> Self {
        let exact = rows.iter().all(|r| r.sup_error <= EXACT_FLOOR);
        let slope = if exact {
            None
        } else {
            let xs: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.sup_error.max(f64::MIN_POSITIVE).ln()).collect();
            Some(least_squares_slope(&xs, &ys))
        };
        StudyTable {
            schema: "v1".into(),
            epsilon,
            order,
            all_trusted: rows.iter().all(|r| r.trusted),
            counts_agree: rows.iter().all(|r| {
                r.counts.pred_in_shrunk == r.counts.oracle_in_shrunk
                    && r.counts.matched_in_shrunk >= r.counts.pred_in_shrunk
            }),
            rows,
            slope,
            exact,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,N,sup_error,mean_error,pred_in_shrunk,oracle_in_shrunk,matched_in_shrunk,trusted,exploratory,slope")?;
        let slope = match self.slope {
            Some(s) => format!("{s:.6}"),
            None => "exact".into(),
        };
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{},{:.6e},{:.6e},{},{},{},{},{},{}",
                r.h,
                r.order,
                r.sup_error,
                r.mean_error,
                r.counts.pred_in_shrunk,
                r.counts.oracle_in_shrunk,
                r.counts.matched_in_shrunk,
                r.trusted,
                r.exploratory,
                slope
            )?;
        }
        Ok(())
    }
}

/// Everything a study needs besides `h`.
#[derive(Clone, Copy, Debug)]
pub struct StudySetup<'a> {
    pub p: &'a HSeries,
    pub nf: &'a NormalFormResult,
    pub floquet: &'a FloquetData,
    pub rect: &'a SpectralRectangle,
    pub window: WindowSpec,
    pub dimension_cap: usize,
    pub shrink: f64,
}

impl StudySetup<'_> {
    /// Lattice of the normal form truncated at `order`.
    pub fn predict(&self, h: f64, order: usize) -> Result<Vec<LatticePoint>> {
        let nf = self.nf.truncated(order);
        let k_box = default_k_box(&nf, h, self.floquet, self.rect)?;
        quasi_eigenvalues(&nf, h, self.floquet, self.rect, k_box)
    }

    pub fn oracle(&self, h: f64) -> Result<OracleSpectrum> {
        let w = self.window.window(h, self.floquet);
        oracle_spectrum(self.p, &w, self.rect, self.nf.epsilon, self.dimension_cap)
    }

    pub fn compare(&self, h: f64, order: usize, oracle: &OracleSpectrum) -> Result<MatchReport> {
        let pred = self.predict(h, order)?;
        Ok(match_spectra(&pred, &oracle.eigenvalues, self.rect, self.nf.epsilon, self.shrink))
    }
}

/// One table per entry of `orders`, sharing the oracle spectra.
pub fn convergence_study(setup: &StudySetup<'_>, h_list: &[f64], orders: &[usize]) -> Result<Vec<StudyTable>> {
    if h_list.len() < 4 {
        return Err(Error::Invalid(format!("a study needs at least 4 values of h, got {}", h_list.len())));
    }
    if h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::Invalid("every h must be positive".into()));
    }
    if let Some(&n) = orders.iter().find(|n| **n > setup.nf.order) {
        return Err(Error::Invalid(format!("order {n} exceeds the normal form order {}", setup.nf.order)));
    }
    let spectra: Vec<OracleSpectrum> = h_list
        .par_iter()
        .map(|h| setup.oracle(*h))
        .collect::<Result<_>>()?;
    if let Some((h, o)) = h_list.iter().zip(&spectra).find(|(_, o)| !o.trust.pass) {
        return Err(Error::Untrusted { h: *h, margin: o.trust.margin });
    }
    orders
        .iter()
        .map(|&order| {
            let rows = h_list
                .iter()
                .zip(&spectra)
                .map(|(h, o)| {
                    let r = setup.compare(*h, order, o)?;
                    let exploratory = setup.nf.epsilon <= h.sqrt();
                    if exploratory && order == orders[0] {
                        log::warn!("ε = {} does not exceed h^(1/2) = {:.4}; row is exploratory", setup.nf.epsilon, h.sqrt());
                    }
                    Ok(StudyRow {
                        h: *h,
                        order,
                        sup_error: r.sup_error,
                        mean_error: r.mean_error,
                        counts: r.counts,
                        trusted: o.trust.pass,
                        trust_margin: o.trust.margin,
                        window_m: o.window.m,
                        exploratory,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StudyTable::from_rows(setup.nf.epsilon, order, rows))
        })
        .collect()
}

/// Two-column scatter data: predicted and matched oracle values.
pub fn write_scatter_csv<W: std::io::Write>(report: &MatchReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "k1,k2,re_pred,im_pred,re_oracle,im_oracle,error")?;
    for p in &report.pairs {
        writeln!(
            w,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}",
            p.k[0], p.k[1], p.z_pred.re, p.z_pred.im, p.z_oracle.re, p.z_oracle.im, p.error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hungarian_small() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = hungarian(&cost, 3);
        let total: f64 = a.iter().enumerate().map(|(i, j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn near_pairs() {
        let h = 0.1;
        let rect = SpectralRectangle::new(1.0, 0.0, 1.0).unwrap();
        let pred = [LatticePoint { k: [0, 0], z: c(0.0, 0.0) }, LatticePoint { k: [1, 0], z: c(h, 0.0) }];
        let oracle = [c(1e-9, 0.0), c(h + 1e-9, 0.0)];
        let r = match_spectra(&pred, &oracle, &rect, 0.1, 0.9);
        assert!((r.sup_error - 1e-9).abs() < 1e-15);
        assert!(r.unmatched_pred.is_empty() && r.unmatched_oracle.is_empty());
    }

    #[test]
    fn lone_prediction() {
        let rect = SpectralRectangle::new(1.0, 0.0, 1.0).unwrap();
        let r = match_spectra(&[LatticePoint { k: [0, 0], z: c(0.0, 0.0) }], &[], &rect, 0.1, 0.9);
        assert_eq!(r.unmatched_pred.len(), 1);
        assert!(!r.complete_in_shrunk);
    }
}
