//! Scenario configuration shared by the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barriertop::ResonantSaddle;
use crate::birkhoff::{normal_form_full, NormalFormResult, PrincipalOptions};
use crate::eiconal::EiconalProblem;
use crate::error::{Error, Result};
use crate::geomflow::FlowModel;
use crate::lattice::{FloquetData, SpectralRectangle};
use crate::models;
use crate::speccompare::StudySetup;
use crate::symbolkit::{Caps, FourierTaylorSymbol, HSeries};
use crate::torusquant::{WindowSpec, DEFAULT_DIMENSION_CAP};

pub const SCHEMA: &str = "v1";

/// A symbol given inline or as a path to a symbol JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymbolRef {
    Inline(FourierTaylorSymbol),
    Path(String),
}

impl SymbolRef {
    pub fn resolve(&self, base: &Path) -> Result<FourierTaylorSymbol> {
        match self {
            SymbolRef::Inline(s) => Ok(s.clone()),
            SymbolRef::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Invalid(format!("cannot read symbol file {}: {e}", path.display())))?;
                Ok(FourierTaylorSymbol::from_json_str(&text)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinModel {
    pub builtin: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolModel {
    pub p: SymbolRef,
    pub q: SymbolRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<SymbolRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builtin(BuiltinModel),
    Symbols(SymbolModel),
}

/// Names accepted by `{"builtin": …}`.
pub const BUILTIN_MODELS: [&str; 2] = ["benchmark1", "averaged1"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_shrink")]
    pub shrink: f64,
    #[serde(default = "d_cap")]
    pub dimension_cap: usize,
    #[serde(default = "d_grid")]
    pub eiconal_grid: usize,
    #[serde(default = "d_eic_tol")]
    pub eiconal: f64,
    #[serde(default = "d_bnf_tol")]
    pub bnf: f64,
}

fn d_shrink() -> f64 {
    0.9
}
fn d_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}
fn d_grid() -> usize {
    32
}
fn d_eic_tol() -> f64 {
    1e-12
}
fn d_bnf_tol() -> f64 {
    1e-15
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            shrink: d_shrink(),
            dimension_cap: d_cap(),
            eiconal_grid: d_grid(),
            eiconal: d_eic_tol(),
            bnf: d_bnf_tol(),
        }
    }
}

/// Square grid of `η` values for the reduced-symbol family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for EtaGrid {
    fn default() -> Self {
        EtaGrid {
            half_width: 0.1,
            points: 5,
        }
    }
}

impl EtaGrid {
    pub fn values(&self) -> Vec<[f64; 2]> {
        let n = self.points.max(1);
        let step = if n > 1 { 2.0 * self.half_width / (n - 1) as f64 } else { 0.0 };
        let c = |i: usize| if n > 1 { -self.half_width + step * i as f64 } else { 0.0 };
        (0..n).flat_map(|i| (0..n).map(move |j| [c(i), c(j)])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub saddle: ResonantSaddle,
    /// Normal form in the action chart, as a path to its JSON record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<String>,
    #[serde(default)]
    pub floquet: FloquetData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rectangle: Option<SpectralRectangle>,
}

fn d_order() -> usize {
    3
}
fn d_caps() -> Caps {
    Caps { k: 8, d: 10 }
}
fn d_rect() -> SpectralRectangle {
    SpectralRectangle {
        re_half_width: 0.15,
        im_center_over_eps: 0.0,
        im_half_width_over_eps: 0.15,
        re_center: 0.0,
    }
}
fn d_schema() -> String {
    SCHEMA.into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "d_schema")]
    pub schema: String,
    pub model: ModelSpec,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
    #[serde(rename = "N", default = "d_order")]
    pub order: usize,
    #[serde(default)]
    pub floquet: FloquetData,
    #[serde(default = "d_rect")]
    pub rectangle: SpectralRectangle,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default = "d_caps")]
    pub caps: Caps,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub eta_grid: EtaGrid,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Largest normal form order accepted.
pub const MAX_ORDER: usize = 8;

impl ScenarioConfig {
    /// The acceptance benchmark at `ε = 0.1`, `N = 3`.
    pub fn benchmark() -> Self {
        ScenarioConfig {
            schema: SCHEMA.into(),
            model: ModelSpec::Builtin(BuiltinModel {
                builtin: "benchmark1".into(),
            }),
            epsilon: 0.1,
            epsilon_tilde: None,
            h: None,
            h_list: Some(vec![1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0, 1.0 / 48.0]),
            order: d_order(),
            floquet: FloquetData::default(),
            rectangle: d_rect(),
            window: WindowSpec::default(),
            caps: d_caps(),
            tolerances: Tolerances::default(),
            eta_grid: EtaGrid::default(),
            seed: 0,
            barrier: None,
            output: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.schema != SCHEMA {
            return bad(format!("unsupported schema {:?}", self.schema));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("ε must lie in (0, 1), got {}", self.epsilon));
        }
        if let Some(et) = self.epsilon_tilde {
            if !(et > self.epsilon && et < 1.0) {
                return bad(format!("ε̃ must lie in (ε, 1), got {et}"));
            }
        }
        match (&self.h, &self.h_list) {
            (Some(_), Some(_)) | (None, None) => return bad("exactly one of h and h_list is required".into()),
            _ => {}
        }
        let hs = self.h_values();
        if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
            return bad("every h must lie in (0, 1)".into());
        }
        if self.order > MAX_ORDER {
            return bad(format!("N = {} exceeds {MAX_ORDER}", self.order));
        }
        if !(self.caps.k >= 1 && self.caps.k <= 64 && self.caps.d >= 1 && self.caps.d <= 24) {
            return bad(format!("caps out of range: K = {}, D = {}", self.caps.k, self.caps.d));
        }
        self.rectangle.validate()?;
        self.window.validate()?;
        let t = &self.tolerances;
        if !(t.shrink > 0.0 && t.shrink <= 1.0) {
            return bad(format!("shrink must lie in (0, 1], got {}", t.shrink));
        }
        if !(t.eiconal > 0.0 && t.bnf > 0.0) || !t.eiconal.is_finite() || !t.bnf.is_finite() {
            return bad("tolerances must be positive".into());
        }
        if !t.eiconal_grid.is_power_of_two() || !(8..=512).contains(&t.eiconal_grid) {
            return bad(format!("eiconal grid {} must be a power of two in [8, 512]", t.eiconal_grid));
        }
        if t.dimension_cap == 0 {
            return bad("dimension cap must be positive".into());
        }
        if !(self.eta_grid.half_width >= 0.0 && self.eta_grid.half_width.is_finite())
            || !(1..=64).contains(&self.eta_grid.points)
        {
            return bad("η grid needs 1..=64 points and a finite half width".into());
        }
        if let ModelSpec::Builtin(b) = &self.model {
            if !BUILTIN_MODELS.contains(&b.builtin.as_str()) {
                return bad(format!("unknown model {:?}; known: {BUILTIN_MODELS:?}", b.builtin));
            }
        }
        if let Some(b) = &self.barrier {
            b.saddle.validate()?;
            if let Some(r) = &b.rectangle {
                r.validate()?;
            }
        }
        Ok(())
    }

    pub fn h_values(&self) -> Vec<f64> {
        match (&self.h, &self.h_list) {
            (Some(h), _) => vec![*h],
            (None, Some(l)) => l.clone(),
            _ => Vec::new(),
        }
    }

    /// Replaces `h_list` by a single `h` or the reverse.
    pub fn set_h(&mut self, h: f64) {
        self.h = Some(h);
        self.h_list = None;
    }

    pub fn set_h_list(&mut self, hs: Vec<f64>) {
        self.h = None;
        self.h_list = Some(hs);
    }

    /// Symbol files inlined, so the result is self-contained.
    pub fn normalized(&self, base: &Path) -> Result<Self> {
        let mut out = self.clone();
        if let ModelSpec::Symbols(m) = &self.model {
            out.model = ModelSpec::Symbols(SymbolModel {
                p: SymbolRef::Inline(m.p.resolve(base)?),
                q: SymbolRef::Inline(m.q.resolve(base)?),
                r: m.r.as_ref().map(|r| r.resolve(base).map(SymbolRef::Inline)).transpose()?,
            });
        }
        if let Some(b) = &mut out.barrier {
            if let Some(p) = &b.normal_form {
                let abs = std::path::absolute(base.join(p))?;
                b.normal_form = Some(abs.to_string_lossy().into_owned());
            }
        }
        out.output = None;
        Ok(out)
    }

    /// Compact JSON with a fixed field order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }
}

/// A validated configuration with its model built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: FlowModel,
    pub r: Option<FourierTaylorSymbol>,
    pub base: PathBuf,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let config = config.normalized(base)?;
        let eps = config.epsilon;
        let (model, r) = match &config.model {
            ModelSpec::Builtin(b) => match b.builtin.as_str() {
                "benchmark1" => (models::benchmark1(eps), None),
                "averaged1" => (models::averaged1(eps), None),
                other => return Err(Error::Invalid(format!("unknown model {other:?}"))),
            },
            ModelSpec::Symbols(m) => {
                let p = m.p.resolve(base)?;
                let q = m.q.resolve(base)?;
                let r = m.r.as_ref().map(|r| r.resolve(base)).transpose()?;
                (FlowModel::new(p, q, eps)?, r)
            }
        };
        Ok(Scenario {
            config,
            model,
            r,
            base: base.to_path_buf(),
        })
    }

    /// `p + iεq + r` at order `h⁰`, zero above up to `N`.
    pub fn hseries(&self) -> HSeries {
        let mut p0 = self.model.principal_symbol();
        if let Some(r) = &self.r {
            p0 = p0.add(r);
        }
        HSeries::principal(p0, self.config.order)
    }

    /// Reads the barrier section's action-chart normal form, if any.
    ///
    /// Accepts a bare record or one wrapped as `{"meta": …, "data": …}`.
    pub fn barrier_normal_form(&self) -> Result<Option<NormalFormResult>> {
        let Some(path) = self.config.barrier.as_ref().and_then(|b| b.normal_form.as_ref()) else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read normal form {path}: {e}")))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let inner = match value {
            serde_json::Value::Object(mut m) if m.contains_key("data") && m.contains_key("meta") => {
                m.remove("data").expect("checked")
            }
            v => v,
        };
        Ok(Some(NormalFormResult::from_json_str(&inner.to_string())?))
    }

    pub fn normal_form(&self) -> Result<NormalFormResult> {
        let c = &self.config;
        self.model.require_transversality()?;
        normal_form_full(
            &self.hseries(),
            c.order,
            c.epsilon,
            c.caps,
            PrincipalOptions {
                tolerance: c.tolerances.bnf,
                ..PrincipalOptions::default()
            },
        )
    }

    pub fn eiconal_problem(&self) -> Result<EiconalProblem> {
        let c = &self.config;
        let mut p = EiconalProblem::from_model(
            &self.model,
            self.r.as_ref(),
            c.epsilon_tilde,
            c.tolerances.eiconal_grid,
            c.caps,
        )?;
        p.options.tolerance = c.tolerances.eiconal;
        Ok(p)
    }

    pub fn study_setup<'a>(&'a self, p: &'a HSeries, nf: &'a NormalFormResult) -> StudySetup<'a> {
        StudySetup {
            p,
            nf,
            floquet: &self.config.floquet,
            rect: &self.config.rectangle,
            window: self.config.window,
            dimension_cap: self.config.tolerances.dimension_cap,
            shrink: self.config.tolerances.shrink,
        }
    }
}
