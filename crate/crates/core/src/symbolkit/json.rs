use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::poly::MAX_XI_DEGREE;
use super::symbol::{FourierTaylorSymbol, Mode, MultiIndex};
use super::SymbolError;

/// Largest Fourier bound accepted from external input.
pub const MAX_X_DEGREE: i64 = 4096;

/// Interchange form `{"K":…, "D":…, "coeffs":[{"m","alpha","re","im"}, …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolJson {
    #[serde(rename = "K")]
    pub k: i64,
    #[serde(rename = "D")]
    pub d: i64,
    pub coeffs: Vec<CoeffJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffJson {
    pub m: [i64; 2],
    pub alpha: [i64; 2],
    pub re: f64,
    pub im: f64,
}

impl From<&FourierTaylorSymbol> for SymbolJson {
    fn from(s: &FourierTaylorSymbol) -> Self {
        SymbolJson {
            k: s.x_degree_bound() as i64,
            d: s.xi_degree_bound() as i64,
            coeffs: s
                .terms()
                .map(|(m, a, c)| CoeffJson {
                    m: [m[0] as i64, m[1] as i64],
                    alpha: [a[0] as i64, a[1] as i64],
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<SymbolJson> for FourierTaylorSymbol {
    type Error = SymbolError;

    fn try_from(j: SymbolJson) -> Result<Self, SymbolError> {
        if !(0..=MAX_X_DEGREE).contains(&j.k) {
            return Err(SymbolError::Json(format!("K = {} out of range", j.k)));
        }
        if !(0..=MAX_XI_DEGREE as i64).contains(&j.d) {
            return Err(SymbolError::Json(format!("D = {} out of range", j.d)));
        }
        let mut s = FourierTaylorSymbol::zero(j.k as i32, j.d as u32);
        for c in &j.coeffs {
            if c.m[0].abs() > j.k || c.m[1].abs() > j.k {
                return Err(SymbolError::Json(format!(
                    "mode {:?} exceeds K = {}",
                    c.m, j.k
                )));
            }
            if c.alpha[0] < 0 || c.alpha[1] < 0 || c.alpha[0] + c.alpha[1] > j.d {
                return Err(SymbolError::Json(format!(
                    "multi-index {:?} invalid for D = {}",
                    c.alpha, j.d
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(SymbolError::Json("non-finite coefficient".into()));
            }
            let m: Mode = [c.m[0] as i32, c.m[1] as i32];
            let a: MultiIndex = [c.alpha[0] as u32, c.alpha[1] as u32];
            s.add_term(m, a, Complex64::new(c.re, c.im));
        }
        Ok(s)
    }
}

impl FourierTaylorSymbol {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(SymbolJson::from(self)).expect("symbol JSON is always serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, SymbolError> {
        let j: SymbolJson = serde_json::from_str(s).map_err(|e| SymbolError::Json(e.to_string()))?;
        j.try_into()
    }
}

impl Serialize for FourierTaylorSymbol {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        SymbolJson::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierTaylorSymbol {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let j = SymbolJson::deserialize(de)?;
        j.try_into().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = FourierTaylorSymbol::xi(1)
            .add(&FourierTaylorSymbol::cos_mode([1, 0]))
            .add_scaled(&FourierTaylorSymbol::monomial([1, -1], [0, 2], Complex64::new(0.0, 1.0)), Complex64::new(0.3, 0.0));
        let text = serde_json::to_string(&s).unwrap();
        let back = FourierTaylorSymbol::from_json_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_out_of_bound_keys() {
        let bad = r#"{"K":1,"D":1,"coeffs":[{"m":[2,0],"alpha":[0,0],"re":1,"im":0}]}"#;
        assert!(FourierTaylorSymbol::from_json_str(bad).is_err());
        let bad = r#"{"K":1,"D":1,"coeffs":[{"m":[0,0],"alpha":[1,1],"re":1,"im":0}]}"#;
        assert!(FourierTaylorSymbol::from_json_str(bad).is_err());
        let bad = r#"{"K":1,"D":-1,"coeffs":[]}"#;
        assert!(FourierTaylorSymbol::from_json_str(bad).is_err());
    }
}
