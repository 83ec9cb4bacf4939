//! Quasi-eigenvalue lattices `z_k = Σ h^n p̃_n(ξ(k))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::birkhoff::NormalFormResult;
use crate::error::{Error, Result};

/// Cycle actions `S` and Maslov indices `α⁰` of the quantization condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FloquetData {
    #[serde(rename = "S")]
    pub s: [f64; 2],
    pub alpha0: [i32; 2],
}

impl FloquetData {
    /// `θ = −S/2πh − α⁰/4`, not reduced.
    pub fn theta(&self, h: f64) -> [f64; 2] {
        let tau = std::f64::consts::TAU;
        [
            -self.s[0] / (tau * h) - self.alpha0[0] as f64 / 4.0,
            -self.s[1] / (tau * h) - self.alpha0[1] as f64 / 4.0,
        ]
    }

    /// `θ` reduced to `[0, 1)²`, with the integer part removed.
    pub fn theta_reduced(&self, h: f64) -> ([f64; 2], [i64; 2]) {
        let t = self.theta(h);
        let f = [t[0].floor(), t[1].floor()];
        ([t[0] - f[0], t[1] - f[1]], [f[0] as i64, f[1] as i64])
    }

    /// `ξ(k) = h(k + θ)`.
    pub fn xi(&self, h: f64, k: [i32; 2]) -> [f64; 2] {
        let t = self.theta(h);
        [h * (k[0] as f64 + t[0]), h * (k[1] as f64 + t[1])]
    }
}

/// Closed rectangle `|Re z − c| ≤ w_re`, `|Im z/ε − F₀| ≤ w_im`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRectangle {
    pub re_half_width: f64,
    #[serde(rename = "F0")]
    pub im_center_over_eps: f64,
    pub im_half_width_over_eps: f64,
    #[serde(default)]
    pub re_center: f64,
}

impl SpectralRectangle {
    pub fn new(re_half_width: f64, f0: f64, im_half_width_over_eps: f64) -> Result<Self> {
        let r = SpectralRectangle {
            re_half_width,
            im_center_over_eps: f0,
            im_half_width_over_eps,
            re_center: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.re_half_width) || !ok(self.im_half_width_over_eps) {
            return Err(Error::Invalid("rectangle widths must be positive".into()));
        }
        if !self.im_center_over_eps.is_finite() || !self.re_center.is_finite() {
            return Err(Error::Invalid("rectangle centre must be finite".into()));
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64, epsilon: f64) -> bool {
        (z.re - self.re_center).abs() <= self.re_half_width
            && (z.im / epsilon - self.im_center_over_eps).abs() <= self.im_half_width_over_eps
    }

    /// Same centre, both widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SpectralRectangle {
            re_half_width: self.re_half_width * factor,
            im_half_width_over_eps: self.im_half_width_over_eps * factor,
            ..*self
        }
    }
}

pub fn rectangle_filter(zs: &[Complex64], rect: &SpectralRectangle, epsilon: f64) -> Vec<Complex64> {
    zs.iter().copied().filter(|z| rect.contains(*z, epsilon)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub k: [i32; 2],
    pub z: Complex64,
}

/// Lattice points with `|k₁|, |k₂| ≤ k_box` whose `z_k` lies in `rect`,
/// in lexicographic order of `k`.
pub fn quasi_eigenvalues(
    nf: &NormalFormResult,
    h: f64,
    floquet: &FloquetData,
    rect: &SpectralRectangle,
    k_box: i32,
) -> Result<Vec<LatticePoint>> {
    if !(h > 0.0) {
        return Err(Error::Invalid("h must be positive".into()));
    }
    let mut out = Vec::new();
    for k1 in -k_box..=k_box {
        for k2 in -k_box..=k_box {
            let k = [k1, k2];
            let z = nf.eval(h, floquet.xi(h, k));
            if rect.contains(z, nf.epsilon) {
                if k1.abs() == k_box || k2.abs() == k_box {
                    return Err(Error::KBoxTooSmall { k_box, k });
                }
                out.push(LatticePoint { k, z });
            }
        }
    }
    Ok(out)
}

/// A box covering 1.5 times the rectangle's preimage under the linearized
/// `p̃₀`, enlarged until no retained point touches its boundary.
pub fn default_k_box(nf: &NormalFormResult, h: f64, floquet: &FloquetData, rect: &SpectralRectangle) -> Result<i32> {
    let c0 = [Complex64::new(0.0, 0.0); 2];
    let p0 = &nf.p_tilde[0];
    let d1 = p0.derivative([1, 0], [0, 0]).eval_xi(c0);
    let d2 = p0.derivative([0, 1], [0, 0]).eval_xi(c0);
    let eps = nf.epsilon;
    // Re z moves with ξ₁ at rate Re ∂₁p̃₀, Im z/ε with ξ₂ at rate Im ∂₂p̃₀/ε.
    let r1 = (rect.re_center.abs() + rect.re_half_width) / d1.re.abs().max(1e-12);
    let r2 = (rect.im_center_over_eps.abs() + rect.im_half_width_over_eps) / (d2.im.abs() / eps).max(1e-12);
    let t = floquet.theta(h);
    let reach = 1.5 * r1.max(r2) / h + t[0].abs().max(t[1].abs());
    let mut k_box = (reach.ceil() as i32).max(2);
    loop {
        match quasi_eigenvalues(nf, h, floquet, rect, k_box) {
            Ok(_) => return Ok(k_box),
            Err(Error::KBoxTooSmall { .. }) if k_box < 1 << 14 => k_box *= 2,
            Err(e) => return Err(e),
        }
    }
}

pub fn write_csv<W: std::io::Write>(points: &[LatticePoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k1,k2,re_z,im_z")?;
    for p in points {
        writeln!(w, "{},{},{:.17e},{:.17e}", p.k[0], p.k[1], p.z.re, p.z.im)?;
    }
    Ok(())
}
