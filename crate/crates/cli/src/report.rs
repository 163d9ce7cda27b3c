//! Run reports: per-trial records, aggregates and their on-disk format.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use outliers_core::spectral::SupportClass;
use outliers_core::PointSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed report: {0}")]
    Parse(String),
    #[error("report schema version {found} is newer than the supported version {supported}")]
    FutureSchema { found: u64, supported: u32 },
    #[error("report schema version {found} is not supported (expected {supported})")]
    SchemaMismatch { found: u64, supported: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialOutcome {
    Spectrum {
        /// Eigenvalues inside the region of interest.
        in_region: PointSet,
        /// Largest distance under the matching to the targets, when the counts agree.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        match_max_dist: Option<f64>,
        /// No eigenvalue of the region lies within `match_tol` of an absorbed point.
        absorbed_ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spectrum: Option<PointSet>,
    },
    /// One row of the support lattice.
    SupportRow { points: PointSet, classes: Vec<SupportClass> },
    Fluctuation {
        found: usize,
        accepted: bool,
        scaled: PointSet,
        limit: PointSet,
    },
    Gaf { eigenvalues: PointSet, zeros: PointSet },
    Clt { value: Complex64, reference: Complex64 },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub code_version: String,
    pub trials: Vec<TrialRecord>,
    pub aggregates: BTreeMap<String, f64>,
    pub wall_clock_seconds: f64,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes to JSON");
    hex::encode(Sha256::digest(&canonical))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes to JSON");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ReportError::Parse("missing schema_version".into()))?;
        if found > SCHEMA_VERSION as u64 {
            return Err(ReportError::FutureSchema {
                found,
                supported: SCHEMA_VERSION,
            });
        }
        if found != SCHEMA_VERSION as u64 {
            return Err(ReportError::SchemaMismatch {
                found,
                supported: SCHEMA_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| ReportError::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.to_json()).map_err(|source| io_err(path, source))
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        Self::from_json(&text)
    }

    pub fn failed_trials(&self) -> usize {
        self.trials.iter().filter(|t| matches!(t.outcome, TrialOutcome::Failed { .. })).count()
    }

    /// Every point set carried by the records, labelled by series name.
    pub fn point_series(&self) -> Vec<(&'static str, PointSet)> {
        let mut main = Vec::new();
        let mut reference = Vec::new();
        for t in &self.trials {
            match &t.outcome {
                TrialOutcome::Spectrum { in_region, spectrum, .. } => match spectrum {
                    Some(s) => main.extend(s.iter().copied()),
                    None => main.extend(in_region.iter().copied()),
                },
                TrialOutcome::SupportRow { points, classes } => {
                    for (z, c) in points.iter().zip(classes) {
                        match c {
                            SupportClass::Inside => main.push(*z),
                            SupportClass::BoundaryBand => reference.push(*z),
                            SupportClass::Outside => {}
                        }
                    }
                }
                TrialOutcome::Fluctuation { scaled, limit, .. } => {
                    main.extend(scaled.iter().copied());
                    reference.extend(limit.iter().copied());
                }
                TrialOutcome::Gaf { eigenvalues, zeros } => {
                    main.extend(eigenvalues.iter().copied());
                    reference.extend(zeros.iter().copied());
                }
                TrialOutcome::Clt { value, reference: r } => {
                    main.push(*value);
                    reference.push(*r);
                }
                TrialOutcome::Failed { .. } => {}
            }
        }
        vec![("main", PointSet::new(main)), ("reference", PointSet::new(reference))]
    }

    /// CSV extract `trial,series,re,im` of every recorded point.
    pub fn points_csv(&self) -> String {
        let mut out = String::from("trial,series,re,im\n");
        for t in &self.trials {
            let mut emit = |series: &str, ps: &PointSet| {
                for z in ps {
                    out.push_str(&format!("{},{},{:e},{:e}\n", t.index, series, z.re, z.im));
                }
            };
            match &t.outcome {
                TrialOutcome::Spectrum { in_region, spectrum, .. } => {
                    emit("region", in_region);
                    if let Some(s) = spectrum {
                        emit("spectrum", s);
                    }
                }
                TrialOutcome::SupportRow { points, .. } => emit("grid", points),
                TrialOutcome::Fluctuation { scaled, limit, .. } => {
                    emit("scaled", scaled);
                    emit("limit", limit);
                }
                TrialOutcome::Gaf { eigenvalues, zeros } => {
                    emit("eigenvalues", eigenvalues);
                    emit("zeros", zeros);
                }
                TrialOutcome::Clt { value, reference } => {
                    emit("value", &PointSet::new(vec![*value]));
                    emit("reference", &PointSet::new(vec![*reference]));
                }
                TrialOutcome::Failed { .. } => {}
            }
        }
        out
    }

    pub fn write_points_csv(&self, path: &Path) -> Result<(), ReportError> {
        let mut f = std::fs::File::create(path).map_err(|source| io_err(path, source))?;
        f.write_all(self.points_csv().as_bytes()).map_err(|source| io_err(path, source))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Outcome of one `[[checks]]` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub metric: String,
    pub value: Option<f64>,
    pub passed: bool,
}

pub fn evaluate_checks(report: &RunReport) -> Vec<CheckOutcome> {
    report
        .config
        .checks
        .iter()
        .map(|c| {
            let value = report.aggregates.get(&c.metric).copied();
            let passed = value.is_some_and(|v| c.min.map_or(true, |m| v >= m) && c.max.map_or(true, |m| v <= m));
            CheckOutcome {
                metric: c.metric.clone(),
                value,
                passed,
            }
        })
        .collect()
}
