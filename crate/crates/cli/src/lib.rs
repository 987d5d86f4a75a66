//! Configuration and report plumbing behind the `perfscale` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use perfscale::geometry::{HoleShape, ShapeKind};
use perfscale::linsolve::{EigenOptions, Preconditioner, SolverOptions};
use perfscale::scaling::{report_json, rows_csv, run_sweep_with, PredictionTable, SweepResult, SweepSettings, SweepSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The configuration shipped with the repository.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

/// Hole shape and grid limits shared by every sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_shape")]
    pub shape: ShapeKind<f64>,
    /// Margin of the shape; the largest admissible one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_shape() -> ShapeKind<f64> {
    ShapeKind::Ball { radius: 0.25 }
}
fn default_max_nodes() -> usize {
    SweepSettings::default().max_nodes
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { shape: default_shape(), c0: None, max_nodes: default_max_nodes() }
    }
}

impl DomainSection {
    pub fn hole(&self) -> perfscale::Result<HoleShape<f64>> {
        match self.c0 {
            Some(c0) => HoleShape::with_margin(self.shape, c0),
            None => HoleShape::new(self.shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub preconditioner: Preconditioner,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tol: f64,
    #[serde(default = "default_eigen_iters")]
    pub eigen_max_iters: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_tol() -> f64 {
    SolverOptions::default().tol
}
fn default_max_iters() -> usize {
    SolverOptions::default().max_iters
}
fn default_eigen_tol() -> f64 {
    SweepSettings::default().eigen.tol
}
fn default_eigen_iters() -> usize {
    EigenOptions::default().max_iters
}
fn default_seed() -> u64 {
    SweepSettings::default().seed
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
            preconditioner: Preconditioner::default(),
            eigen_tol: default_eigen_tol(),
            eigen_max_iters: default_eigen_iters(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_stem")]
    pub stem: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_stem() -> String {
    "report".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { dir: default_dir(), stem: default_stem(), formats: default_formats() }
    }
}

/// A parsed configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default, rename = "sweep")]
    pub sweeps: Vec<SweepSpec>,
}

/// Parses and validates a config; errors carry the offending key and line.
pub fn parse_config(text: &str) -> Result<Config> {
    let cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
    cfg.domain.hole().context("invalid [domain]")?;
    if !(cfg.solver.tol > 0.0 && cfg.solver.tol < 1.0) {
        anyhow::bail!("invalid config: solver.tol must lie in (0, 1), got {}", cfg.solver.tol);
    }
    if !(cfg.solver.eigen_tol > 0.0 && cfg.solver.eigen_tol < 1.0) {
        anyhow::bail!("invalid config: solver.eigen_tol must lie in (0, 1), got {}", cfg.solver.eigen_tol);
    }
    if cfg.report.stem.is_empty() || cfg.report.stem.contains(['/', '\\']) {
        anyhow::bail!("invalid config: report.stem must be a plain file name");
    }
    let table = table_for(&cfg.sweeps);
    for s in &cfg.sweeps {
        perfscale::scaling::validate_sweep(s, &table)?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// The configuration as TOML with all defaults spelled out.
pub fn effective_toml(cfg: &Config) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

/// SHA-256 of the effective configuration, in hex.
pub fn config_digest(cfg: &Config) -> Result<String> {
    let hash = Sha256::digest(effective_toml(cfg)?.as_bytes());
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn table_for(sweeps: &[SweepSpec]) -> PredictionTable {
    let mut ps: Vec<f64> = sweeps.iter().flat_map(|s| s.p.iter().copied()).collect();
    ps.push(2.0);
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    PredictionTable::standard(&[2, 3], &ps)
}

pub fn settings(cfg: &Config, workers: usize) -> Result<SweepSettings> {
    Ok(SweepSettings {
        shape: cfg.domain.hole()?,
        solver: SolverOptions {
            tol: cfg.solver.tol,
            max_iters: cfg.solver.max_iters,
            preconditioner: cfg.solver.preconditioner,
        },
        eigen: EigenOptions {
            tol: cfg.solver.eigen_tol,
            max_iters: cfg.solver.eigen_max_iters,
            seed: cfg.solver.seed,
            ..EigenOptions::default()
        },
        seed: cfg.solver.seed,
        max_nodes: cfg.domain.max_nodes,
        workers,
    })
}

/// Runs every sweep against `table` and stamps the config digest.
pub fn run_config_with(cfg: &Config, workers: usize, table: &PredictionTable) -> Result<SweepResult> {
    let mut result = run_sweep_with(&cfg.sweeps, &settings(cfg, workers)?, table)?;
    result.config_digest = config_digest(cfg)?;
    Ok(result)
}

pub fn run_config(cfg: &Config, workers: usize) -> Result<SweepResult> {
    run_config_with(cfg, workers, &table_for(&cfg.sweeps))
}

/// Writes the configured report files and returns their paths.
pub fn write_report(result: &SweepResult, cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for f in &cfg.report.formats {
        let (ext, body) = match f {
            Format::Csv => ("csv", rows_csv(result)),
            Format::Json => ("json", report_json(result, cfg)?),
        };
        let path = dir.join(format!("{}.{ext}", cfg.report.stem));
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// Worker count from an explicit flag, then `PERFSCALE_WORKERS`, then one.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var("PERFSCALE_WORKERS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("PERFSCALE_WORKERS must be a count, got {v:?}"))?;
            Ok(n.max(1))
        }
        Err(_) => Ok(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
shape = { kind = "ball", radius = 0.25 }

[[sweep]]
name = "planar"
quantities = ["corrector-int"]
etas = [0.25, 0.125, 0.0625]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.report, ReportSection::default());
        let s = &cfg.sweeps[0];
        assert_eq!((s.d, s.p.as_slice(), s.epsilons.as_slice()), (2, &[2.0][..], &[1.0][..]));
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config(&MINIMAL.replace("etas", "etta")).unwrap_err().to_string();
        assert!(err.contains("etta"), "{err}");
        let err = parse_config("[solver]\ntoll = 1e-8\n").unwrap_err().to_string();
        assert!(err.contains("toll") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn wrong_type_is_reported() {
        let err = parse_config("[solver]\nmax_iters = \"many\"\n").unwrap_err().to_string();
        assert!(err.contains("max_iters") || err.contains("integer"), "{err}");
    }

    #[test]
    fn effective_config_round_trips() {
        for text in [MINIMAL, DEFAULT_CONFIG] {
            let cfg = parse_config(text).unwrap();
            let again = parse_config(&effective_toml(&cfg).unwrap()).unwrap();
            assert_eq!(cfg, again);
            assert_eq!(config_digest(&cfg).unwrap(), config_digest(&again).unwrap());
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.solver.seed += 1;
        assert_ne!(config_digest(&a).unwrap(), config_digest(&b).unwrap());
        assert_eq!(config_digest(&a).unwrap().len(), 64);
    }

    #[test]
    fn bad_margin_is_rejected() {
        assert!(parse_config("[domain]\nc0 = 0.4\n").is_err());
    }
}
