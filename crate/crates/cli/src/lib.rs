//! Batch front end: scenario loading, pipeline runs and artifact output.

pub mod meta;
pub mod selftest;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use pfs_core::barriertop::{rescale, resonance_lattice, write_resonances_csv};
use pfs_core::birkhoff::growth_report;
use pfs_core::eiconal::{realify_actions, solve_family, write_family_csv, Actions};
use pfs_core::lattice::write_csv as write_lattice_csv;
use pfs_core::scenario::{BuiltinModel, ModelSpec, Scenario, ScenarioConfig};
use pfs_core::speccompare::{convergence_study, write_scatter_csv};
use pfs_core::torusquant::{oracle_spectrum, weyl_matrix_capped, write_spectrum_csv};
use pfs_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::meta::{indexed, Meta, Output};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pfs", version, about = "Eigenvalues of P + iεQ on the 2-torus: prediction and verification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct GlobalArgs {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Built-in model, e.g. `benchmark1`.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// One or more values of h, comma separated; `1/32` is accepted.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_h)]
    pub h: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Normal form order N.
    #[arg(long, global = true)]
    pub order: Option<usize>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Solve the eiconal equation, compute and realify the actions.
    Eiconal,
    /// Birkhoff normal form and its growth report.
    Bnf,
    /// Quasi-eigenvalue lattice.
    Predict,
    /// Dense spectrum of the quantized operator.
    Oracle {
        /// Also write the matrix entries.
        #[arg(long)]
        matrix: bool,
    },
    /// Match the lattice against the dense spectrum.
    Compare,
    /// Error against h for every order up to N.
    Converge,
    /// Reduced problem and resonances at a resonant saddle.
    BarrierTop,
    /// Fast invariant checks.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eiconal => "eiconal",
            Command::Bnf => "bnf",
            Command::Predict => "predict",
            Command::Oracle { .. } => "oracle",
            Command::Compare => "compare",
            Command::Converge => "converge",
            Command::BarrierTop => "barrier-top",
            Command::Selftest => "selftest",
        }
    }
}

fn parse_h(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("h must be positive, got {s}"))
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// The scenario after flags are applied, with its base directory.
pub fn resolve_config(g: &GlobalArgs) -> Result<(ScenarioConfig, PathBuf)> {
    let (mut cfg, base) = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
            let cfg: ScenarioConfig = serde_json::from_str(&text)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, std::path::absolute(if base.as_os_str().is_empty() { Path::new(".") } else { &base })?)
        }
        None if g.model.is_some() => (ScenarioConfig::benchmark(), std::path::absolute(".")?),
        None => return Err(Error::Invalid("either --config or --model is required".into())),
    };
    if let Some(m) = &g.model {
        cfg.model = ModelSpec::Builtin(BuiltinModel { builtin: m.clone() });
    }
    if let Some(e) = g.eps {
        cfg.epsilon = e;
    }
    if let Some(n) = g.order {
        cfg.order = n;
    }
    match g.h.as_deref() {
        Some([h]) => cfg.set_h(*h),
        Some(hs) if !hs.is_empty() => cfg.set_h_list(hs.to_vec()),
        _ => {}
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn output_dir(g: &GlobalArgs, cfg: &ScenarioConfig, base: &Path) -> PathBuf {
    match (&g.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("pfs-out"),
    }
}

/// Runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (cfg, base) = resolve_config(&cli.global)?;
    let out_dir = output_dir(&cli.global, &cfg, &base);
    let scenario = Scenario::new(cfg, &base)?;
    let out = Output::new(out_dir, Meta::new(cli.command.name(), &scenario.config))?;
    let go = || match &cli.command {
        Command::Eiconal => eiconal(&scenario, &out),
        Command::Bnf => bnf(&scenario, &out),
        Command::Predict => predict(&scenario, &out),
        Command::Oracle { matrix } => oracle(&scenario, &out, *matrix),
        Command::Compare => compare(&scenario, &out),
        Command::Converge => converge(&scenario, &out),
        Command::BarrierTop => barrier_top(&scenario, &out),
        Command::Selftest => selftest::run(&scenario, &out),
    };
    match cli.global.workers {
        Some(0) => return Err(Error::Invalid("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(go)?,
        None => go()?,
    }
    let mut written = out.written.lock().expect("not poisoned").clone();
    written.sort();
    Ok(written)
}

#[derive(Serialize)]
struct EiconalReport {
    epsilon: f64,
    epsilon_tilde: f64,
    grid: usize,
    contraction_scale: f64,
    a_star: Complex64,
    scaled_a: f64,
    newton_steps: usize,
    actions: Actions,
    b: Complex64,
    c: [Complex64; 2],
    residual: f64,
    iterations: usize,
    contraction: f64,
    bound_constant: f64,
    corrections: Vec<f64>,
    family_points: usize,
    family_max_remainder: f64,
}

fn eiconal(s: &Scenario, out: &Output) -> Result<()> {
    let problem = s.eiconal_problem()?;
    let real = realify_actions(&problem)?;
    let etas = s.config.eta_grid.values();
    let family = solve_family(&problem, &etas).into_iter().collect::<Result<Vec<_>>>()?;
    let sol = &real.solution;
    let report = EiconalReport {
        epsilon: problem.epsilon,
        epsilon_tilde: problem.epsilon_tilde,
        grid: problem.grid,
        contraction_scale: problem.contraction_scale(),
        a_star: real.a_star,
        scaled_a: real.scaled_a,
        newton_steps: real.newton_steps,
        actions: real.actions,
        b: sol.b,
        c: sol.c,
        residual: sol.residual,
        iterations: sol.iterations,
        contraction: sol.contraction,
        bound_constant: sol.bound_constant,
        corrections: sol.corrections.clone(),
        family_points: family.len(),
        family_max_remainder: family.iter().map(|f| (f.p_tilde - f.leading).norm()).fold(0.0, f64::max),
    };
    out.json("eiconal.json", None, &report)?;
    out.csv("family.csv", None, |w| write_family_csv(&family, w))?;
    Ok(())
}

/// `ε` values of the growth report: `ε/4, ε/2, ε, 2ε`, those below 1.
fn growth_epsilons(eps: f64) -> Vec<f64> {
    [0.25, 0.5, 1.0, 2.0].iter().map(|f| f * eps).filter(|e| *e < 1.0).collect()
}

fn bnf(s: &Scenario, out: &Output) -> Result<()> {
    let nf = s.normal_form()?;
    out.json("normal_form.json", None, &nf)?;
    let others = growth_epsilons(s.config.epsilon)
        .par_iter()
        .map(|&e| {
            if e == s.config.epsilon {
                return Ok(nf.clone());
            }
            let mut cfg = s.config.clone();
            cfg.epsilon = e;
            Scenario::new(cfg, &s.base)?.normal_form()
        })
        .collect::<Result<Vec<_>>>()?;
    out.json("growth.json", None, &growth_report(&others))?;
    Ok(())
}

fn predict(s: &Scenario, out: &Output) -> Result<()> {
    let nf = s.normal_form()?;
    let p = s.hseries();
    let setup = s.study_setup(&p, &nf);
    let hs = s.config.h_values();
    hs.par_iter().enumerate().try_for_each(|(i, &h)| {
        let pts = setup.predict(h, s.config.order)?;
        out.csv(&indexed("lattice", "csv", i, hs.len()), Some(h), |w| write_lattice_csv(&pts, w))?;
        Ok(())
    })
}

#[derive(Serialize)]
struct OracleReport<'a> {
    window: &'a pfs_core::torusquant::QuantizationWindow,
    dimension: usize,
    trusted_rectangle: &'a pfs_core::lattice::SpectralRectangle,
    trust: &'a pfs_core::torusquant::TrustReport,
    eigenvalue_count: usize,
}

/// Fails with [`Error::Untrusted`] for the first untrusted `h`, after all
/// artifacts are written.
fn first_untrusted(hs: &[f64], trust: &[pfs_core::torusquant::TrustReport]) -> Result<()> {
    match hs.iter().zip(trust).find(|(_, t)| !t.pass) {
        Some((h, t)) => Err(Error::Untrusted { h: *h, margin: t.margin }),
        None => Ok(()),
    }
}

fn oracle(s: &Scenario, out: &Output, matrix: bool) -> Result<()> {
    let p = s.hseries();
    let c = &s.config;
    let hs = s.config.h_values();
    let trust = hs
        .par_iter()
        .enumerate()
        .map(|(i, &h)| {
            let w = c.window.window(h, &c.floquet);
            let o = oracle_spectrum(&p, &w, &c.rectangle, c.epsilon, c.tolerances.dimension_cap)?;
            out.csv(&indexed("spectrum", "csv", i, hs.len()), Some(h), |w| {
                write_spectrum_csv(&o.eigenvalues, w)
            })?;
            out.json(
                &indexed("oracle", "json", i, hs.len()),
                Some(h),
                &OracleReport {
                    window: &o.window,
                    dimension: o.window.dimension(),
                    trusted_rectangle: &o.trusted_rectangle,
                    trust: &o.trust,
                    eigenvalue_count: o.eigenvalues.len(),
                },
            )?;
            if matrix {
                let m = weyl_matrix_capped(&p, &o.window, s.config.tolerances.dimension_cap)?;
                out.csv(&indexed("matrix", "csv", i, hs.len()), Some(h), |w| {
                    writeln!(w, "row,col,re,im")?;
                    for c in 0..m.ncols() {
                        for r in 0..m.nrows() {
                            let z = m[(r, c)];
                            if z != Complex64::new(0.0, 0.0) {
                                writeln!(w, "{r},{c},{:.17e},{:.17e}", z.re, z.im)?;
                            }
                        }
                    }
                    Ok(())
                })?;
            }
            Ok(o.trust)
        })
        .collect::<Result<Vec<_>>>()?;
    first_untrusted(&hs, &trust)
}

fn compare(s: &Scenario, out: &Output) -> Result<()> {
    let nf = s.normal_form()?;
    let p = s.hseries();
    let setup = s.study_setup(&p, &nf);
    let hs = s.config.h_values();
    let trust = hs
        .par_iter()
        .enumerate()
        .map(|(i, &h)| {
            let o = setup.oracle(h)?;
            let r = setup.compare(h, s.config.order, &o)?;
            out.json(&indexed("match", "json", i, hs.len()), Some(h), &r)?;
            out.csv(&indexed("scatter", "csv", i, hs.len()), Some(h), |w| write_scatter_csv(&r, w))?;
            Ok(o.trust)
        })
        .collect::<Result<Vec<_>>>()?;
    first_untrusted(&hs, &trust)
}

fn converge(s: &Scenario, out: &Output) -> Result<()> {
    let nf = s.normal_form()?;
    let p = s.hseries();
    let setup = s.study_setup(&p, &nf);
    let orders: Vec<usize> = (0..=s.config.order).collect();
    let tables = convergence_study(&setup, &s.config.h_values(), &orders)?;
    for t in &tables {
        out.csv(&format!("study_N{}.csv", t.order), None, |w| t.write_csv(w))?;
    }
    out.json("study.json", None, &tables)?;
    Ok(())
}

fn barrier_top(s: &Scenario, out: &Output) -> Result<()> {
    let b = s
        .config
        .barrier
        .as_ref()
        .ok_or_else(|| Error::Invalid("barrier-top needs a \"barrier\" section".into()))?;
    let nf = s.barrier_normal_form()?;
    let hs = s.config.h_values();
    for (i, &h) in hs.iter().enumerate() {
        let reduced = rescale(&b.saddle, s.config.epsilon, h)?;
        out.json(&indexed("reduced", "json", i, hs.len()), Some(h), &reduced)?;
        if let Some(nf) = &nf {
            let rect = b.rectangle.unwrap_or(s.config.rectangle);
            let res = resonance_lattice(&reduced, nf, &b.floquet, &rect)?;
            out.csv(&indexed("resonances", "csv", i, hs.len()), Some(h), |w| write_resonances_csv(&res, w))?;
        }
    }
    Ok(())
}
