//! Weyl quantization on the torus and dense diagonalization.
//!
//! In the Floquet basis `e_k(x) = e^{i x·(k+θ)}` the Weyl quantization of
//! `Σ_n h^n p_n` has matrix elements
//!
//! ```text
//! ⟨e_l, Op(P) e_k⟩ = Σ_n h^n p̂_{n, l−k}(h((k+l)/2 + θ)),
//! ```
//!
//! where `p̂_{n,m}(ξ)` is the Taylor polynomial of `p_n` at Fourier mode `m`.

use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FloquetData, SpectralRectangle};
use crate::symbolkit::HSeries;

/// Window choice: a fixed `M`, or `M = max(⌈reach/h⌉, 8)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i32>,
    #[serde(default = "default_reach")]
    pub reach: f64,
}

fn default_reach() -> f64 {
    0.5
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { m: None, reach: default_reach() }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.m {
            if m < 1 {
                return Err(Error::Window(format!("M must be positive, got {m}")));
            }
        }
        if !(self.reach > 0.0 && self.reach.is_finite()) {
            return Err(Error::Window(format!("reach must be positive, got {}", self.reach)));
        }
        Ok(())
    }

    pub fn window(&self, h: f64, floquet: &FloquetData) -> QuantizationWindow {
        match self.m {
            Some(m) => QuantizationWindow::new(m, h, floquet),
            None => QuantizationWindow::auto(h, floquet, self.reach),
        }
    }
}

/// Largest matrix dimension built unless configured otherwise.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationWindow {
    /// Modes `|k₁|, |k₂| ≤ M` are retained.
    #[serde(rename = "M")]
    pub m: i32,
    pub theta: [f64; 2],
    pub h: f64,
}

impl QuantizationWindow {
    /// Window for the Floquet data, with `θ` reduced to `[0, 1)²`.
    pub fn new(m: i32, h: f64, floquet: &FloquetData) -> Self {
        QuantizationWindow {
            m,
            theta: floquet.theta_reduced(h).0,
            h,
        }
    }

    /// `M = max(⌈reach/h⌉, 8)`.
    pub fn auto(h: f64, floquet: &FloquetData, reach: f64) -> Self {
        let m = ((reach / h).ceil() as i32).max(8);
        Self::new(m, h, floquet)
    }

    pub fn side(&self) -> usize {
        (2 * self.m + 1) as usize
    }

    pub fn dimension(&self) -> usize {
        self.side() * self.side()
    }

    pub fn index(&self, k: [i32; 2]) -> Option<usize> {
        let m = self.m;
        if k[0].abs() > m || k[1].abs() > m {
            return None;
        }
        Some(((k[0] + m) as usize) * self.side() + (k[1] + m) as usize)
    }

    pub fn mode(&self, index: usize) -> [i32; 2] {
        let s = self.side();
        [(index / s) as i32 - self.m, (index % s) as i32 - self.m]
    }

    fn check(&self, cap: usize) -> Result<()> {
        if self.m < 1 || !(self.h > 0.0) {
            return Err(Error::Window("need M ≥ 1 and h > 0".into()));
        }
        if self.dimension() > cap {
            return Err(Error::Window(format!(
                "dimension {} exceeds the cap {cap}",
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Dense matrix of `Op(P)` on the window, rows and columns in lexicographic `k`.
pub fn weyl_matrix(p: &HSeries, window: &QuantizationWindow) -> Result<Mat<Complex64>> {
    weyl_matrix_capped(p, window, DEFAULT_DIMENSION_CAP)
}

pub fn weyl_matrix_capped(p: &HSeries, window: &QuantizationWindow, cap: usize) -> Result<Mat<Complex64>> {
    window.check(cap)?;
    let kx = p.terms.iter().map(|t| t.x_degree_bound()).max().unwrap_or(0);
    if kx > 2 * window.m {
        return Err(Error::Window(format!(
            "symbol x-degree {kx} exceeds 2M = {}",
            2 * window.m
        )));
    }
    let start = Instant::now();
    let n = window.dimension();
    let mut mat = Mat::<Complex64>::zeros(n, n);
    let h = window.h;
    let th = window.theta;
    let mut hn = 1.0;
    for term in &p.terms {
        for (m, poly) in term.modes() {
            for col in 0..n {
                let k = window.mode(col);
                let l = [k[0] + m[0], k[1] + m[1]];
                let Some(row) = window.index(l) else { continue };
                let xi = [
                    Complex64::new(h * ((k[0] + l[0]) as f64 / 2.0 + th[0]), 0.0),
                    Complex64::new(h * ((k[1] + l[1]) as f64 / 2.0 + th[1]), 0.0),
                ];
                mat[(row, col)] += crate::symbolkit::poly::eval(poly, xi) * hn;
            }
        }
        hn *= h;
    }
    log::info!("assembled {n}×{n} Weyl matrix in {:.2?}", start.elapsed());
    Ok(mat)
}

/// All eigenvalues, sorted by `(Re, Im)`.
pub fn eigs(mat: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::Invalid("eigs needs a square matrix".into()));
    }
    if mat.nrows() == 0 {
        return Ok(Vec::new());
    }
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            let v = mat[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Invalid("matrix has non-finite entries".into()));
            }
        }
    }
    let start = Instant::now();
    let mut ev = mat.eigenvalues().map_err(|_| Error::EigenNoConvergence)?;
    log::info!("diagonalized {}×{} in {:.2?}", mat.nrows(), mat.ncols(), start.elapsed());
    sort_spectrum(&mut ev);
    Ok(ev)
}

pub fn sort_spectrum(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Outcome of [`trusted_window`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrustReport {
    pub pass: bool,
    /// Smallest relative distance of a boundary-band diagonal value outside
    /// the doubled rectangle; negative when some value falls inside.
    pub margin: f64,
    pub worst_mode: [i32; 2],
}

/// Checks that the diagonal of `Op(P)` on the outer quarter of the window
/// stays outside the rectangle inflated by a factor 2.
pub fn trusted_window(p: &HSeries, window: &QuantizationWindow, rect: &SpectralRectangle, epsilon: f64) -> TrustReport {
    let big = rect.scaled(2.0);
    let band = (0.75 * window.m as f64).ceil() as i32;
    let mut margin = f64::INFINITY;
    let mut worst = [0, 0];
    let h = window.h;
    for k1 in -window.m..=window.m {
        for k2 in -window.m..=window.m {
            if k1.abs() < band && k2.abs() < band {
                continue;
            }
            let xi = [h * (k1 as f64 + window.theta[0]), h * (k2 as f64 + window.theta[1])];
            let z = diagonal_symbol(p, h, xi);
            let dr = ((z.re - big.re_center).abs() - big.re_half_width) / big.re_half_width;
            let di = ((z.im / epsilon - big.im_center_over_eps).abs() - big.im_half_width_over_eps)
                / big.im_half_width_over_eps;
            let d = dr.max(di);
            if d < margin {
                margin = d;
                worst = [k1, k2];
            }
        }
    }
    TrustReport {
        pass: margin > 0.0,
        margin,
        worst_mode: worst,
    }
}

/// `Σ_n h^n p̂_{n,0}(ξ)`.
fn diagonal_symbol(p: &HSeries, h: f64, xi: [f64; 2]) -> Complex64 {
    let xi = [Complex64::new(xi[0], 0.0), Complex64::new(xi[1], 0.0)];
    let mut hn = 1.0;
    let mut s = Complex64::new(0.0, 0.0);
    for t in &p.terms {
        s += t.eval_xi(xi) * hn;
        hn *= h;
    }
    s
}

/// Eigenvalues of `Op(P)` on the window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub window: QuantizationWindow,
    pub trusted_rectangle: SpectralRectangle,
    pub trust: TrustReport,
}

pub fn oracle_spectrum(
    p: &HSeries,
    window: &QuantizationWindow,
    rect: &SpectralRectangle,
    epsilon: f64,
    cap: usize,
) -> Result<OracleSpectrum> {
    let trust = trusted_window(p, window, rect, epsilon);
    let mat = weyl_matrix_capped(p, window, cap)?;
    let eigenvalues = eigs(&mat)?;
    Ok(OracleSpectrum {
        eigenvalues,
        window: *window,
        trusted_rectangle: *rect,
        trust,
    })
}

pub fn write_spectrum_csv<W: std::io::Write>(ev: &[Complex64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "re,im")?;
    for z in ev {
        writeln!(w, "{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}
