//! CSV and JSON emission.
//!
//! Numbers are written with Rust's shortest round-trip formatting and no
//! timestamps are recorded, so identical inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::antenna::BeamPatternModel;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::PointResult;

pub const SWEEP_COLUMNS: [&str; 13] = [
    "P_bar_dB",
    "I_bar_dB",
    "n_b",
    "M",
    "m_PU",
    "m_SR",
    "C_LB",
    "C_LB_omni",
    "Lambda",
    "P_out",
    "P_e",
    "T_sen_opt",
    "converged",
];

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sweep table with one row per point, in the order given.
pub fn sweep_csv(cfg: &ExperimentConfig, results: &[PointResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).map_err(csv_error)?;
    let sectors = if cfg.antenna.omni { 1 } else { cfg.antenna.sectors };
    let (m_pu, m_sr) = if cfg.orientation.average {
        ("avg".to_string(), "avg".to_string())
    } else {
        (cfg.orientation.m_pu.to_string(), cfg.orientation.m_sr.to_string())
    };
    for r in results {
        let s = r.system.as_ref();
        let row = [
            r.point.p_bar_db.to_string(),
            r.point.i_bar_db.to_string(),
            r.point.n_b.to_string(),
            sectors.to_string(),
            m_pu.clone(),
            m_sr.clone(),
            num(s.map(|s| s.c_lb)),
            num(r.omni.as_ref().map(|o| o.c_lb)),
            num(r.lambda),
            num(s.map(|s| s.p_out)),
            num(s.map(|s| s.p_e)),
            num(s.map(|s| s.t_sen)),
            r.converged.to_string(),
        ];
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Beampattern samples: one row per angle, one column per beam.
pub fn pattern_csv(model: &BeamPatternModel, samples: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let m = model.sectors();
    let mut header = vec!["angle_deg".to_string()];
    header.extend((1..=m).map(|k| format!("beam_{k}")));
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..samples {
        let deg = 360.0 * i as f64 / samples as f64;
        let phi = deg.to_radians();
        let mut row = vec![deg.to_string()];
        row.extend((0..m).map(|k| model.gain(k, phi).to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// SHA-256 of the canonical TOML form of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub points: usize,
    pub converged_points: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, command: &str, points: usize, converged_points: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            config_sha256: config_hash(cfg),
            points,
            converged_points,
            files: Vec::new(),
        }
    }
}

/// Collects output files under one directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes `contents` to `relative` (parents created as needed).
    pub fn write(&mut self, relative: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(relative.to_string());
        Ok(path)
    }

    /// Writes the manifest, listing every file written before it.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.files = self.written.clone();
        self.write("manifest.json", &to_json(&manifest))
    }
}

/// Writes the sweep CSV, per-point solution JSON (if enabled) and the
/// manifest.
pub fn write_sweep(out: &Path, cfg: &ExperimentConfig, command: &str, results: &[PointResult]) -> Result<PathBuf> {
    let mut dir = OutputDir::create(out)?;
    dir.write("sweep.csv", &sweep_csv(cfg, results)?)?;
    if cfg.output.solutions {
        for (i, r) in results.iter().enumerate() {
            dir.write(&format!("solutions/point_{i:04}.json"), &to_json(r))?;
        }
    }
    let converged = results.iter().filter(|r| r.converged).count();
    dir.finish(Manifest::new(cfg, command, results.len(), converged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config_changes() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.constraints.p_bar_db = 13.0;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn empty_sweep_has_header_only() {
        let s = sweep_csv(&ExperimentConfig::default(), &[]).unwrap();
        assert_eq!(s.trim_end(), SWEEP_COLUMNS.join(","));
    }

    #[test]
    fn pattern_rows() {
        let m = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 4).unwrap();
        let s = pattern_csv(&m, 8).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "angle_deg,beam_1,beam_2,beam_3,beam_4");
        assert!(lines[1].starts_with("0,1.01,"));
    }
}
