//! Artifact headers and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use pfs_core::scenario::{ScenarioConfig, SCHEMA};
use pfs_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "pfs";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix of the header line in CSV artifacts.
pub const CSV_META_PREFIX: &str = "# meta: ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub config: ScenarioConfig,
}

impl Meta {
    pub fn new(command: &str, config: &ScenarioConfig) -> Self {
        Meta {
            schema: SCHEMA.into(),
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: config_hash(config),
            h: None,
            config: config.clone(),
        }
    }

    pub fn with_h(&self, h: Option<f64>) -> Self {
        Meta { h, ..self.clone() }
    }
}

/// SHA-256 of the canonical JSON of a normalized config.
pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

#[derive(Serialize)]
struct Wrapped<'a, T> {
    meta: &'a Meta,
    data: &'a T,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Output directory plus the header shared by every artifact of one run.
#[derive(Clone, Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub meta: Meta,
    pub written: std::sync::Arc<std::sync::Mutex<Vec<PathBuf>>>,
}

impl Output {
    pub fn new(dir: PathBuf, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            meta,
            written: Default::default(),
        })
    }

    fn record(&self, path: PathBuf) {
        log::info!("wrote {}", path.display());
        self.written.lock().expect("not poisoned").push(path);
    }

    pub fn json<T: Serialize>(&self, name: &str, h: Option<f64>, data: &T) -> Result<PathBuf> {
        let meta = self.meta.with_h(h);
        let mut text = serde_json::to_string_pretty(&Wrapped { meta: &meta, data })?;
        text.push('\n');
        let path = self.dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        self.record(path.clone());
        Ok(path)
    }

    pub fn csv(
        &self,
        name: &str,
        h: Option<f64>,
        body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        let meta = self.meta.with_h(h);
        let mut buf = Vec::new();
        writeln!(buf, "{CSV_META_PREFIX}{}", serde_json::to_string(&meta)?)?;
        body(&mut buf)?;
        let path = self.dir.join(name);
        write_atomic(&path, &buf)?;
        self.record(path.clone());
        Ok(path)
    }
}

/// Header of a CSV or JSON artifact.
pub fn read_meta(text: &str) -> Result<Meta> {
    if let Some(rest) = text.strip_prefix(CSV_META_PREFIX) {
        let line = rest.lines().next().unwrap_or("");
        return Ok(serde_json::from_str(line)?);
    }
    let v: serde_json::Value = serde_json::from_str(text)?;
    let meta = v
        .get("meta")
        .ok_or_else(|| Error::Invalid("artifact has no meta block".into()))?;
    Ok(Meta::deserialize(meta)?)
}

/// Artifact name, suffixed with the run index when there are several runs.
pub fn indexed(stem: &str, ext: &str, i: usize, n: usize) -> String {
    if n == 1 {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}_{i}.{ext}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::benchmark();
        let out = Output::new(dir.path().into(), Meta::new("predict", &cfg)).unwrap();
        let p = out.csv("x.csv", Some(0.5), |w| writeln!(w, "a,b")).unwrap();
        let meta = read_meta(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(meta.h, Some(0.5));
        assert_eq!(meta.config, cfg);
        assert_eq!(config_hash(&meta.config), meta.config_hash);
    }

    #[test]
    fn index_suffix() {
        assert_eq!(indexed("lattice", "csv", 0, 1), "lattice.csv");
        assert_eq!(indexed("lattice", "csv", 2, 4), "lattice_2.csv");
    }
}
