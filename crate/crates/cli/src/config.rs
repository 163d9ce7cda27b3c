//! Experiment configuration: a strict TOML schema.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use outliers_core::gaf::{KernelKind, SeriesKind};
use outliers_core::outliers::EigenMethod;
use outliers_core::region::Region;
use outliers_core::{DeformationKind, EntryLaw};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: name.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub deformation: DeformationKind,
    pub entry_law: EntryLaw,
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Region of interest; its meaning depends on the analysis.
    pub region: Region,
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

/// Pipeline to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    /// Full spectra; counts eigenvalues in `region` and matches them to `targets`.
    SpectrumScatter {
        #[serde(default)]
        targets: Vec<Complex64>,
        #[serde(default = "default_match_tol")]
        match_tol: f64,
        /// Points that must not attract an eigenvalue inside `region`.
        #[serde(default)]
        absorbed: Vec<Complex64>,
        /// Number of leading trials whose full spectrum is stored.
        #[serde(default = "default_keep")]
        keep_spectra: usize,
    },
    /// Classifies a `grid × grid` lattice on `[-extent, extent]²`; `region` is
    /// the expected support.
    SupportTestGrid {
        #[serde(default = "default_grid")]
        grid: usize,
        extent: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
        #[serde(default = "default_band")]
        band: f64,
    },
    /// `√N` fluctuations around a `theta_diag` outlier.
    StableFluct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default)]
        method: EigenMethod,
    },
    /// `N^{1/(2r)}` fluctuations around a `jordan_block` outlier.
    JordanFluct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default)]
        method: EigenMethod,
    },
    /// Eigenvalues in the disk `region` against zeros of a sampled analytic series.
    GafCompare {
        series: SeriesKind,
        /// Kernel of the series, used for the expected zero count.
        kernel: KernelKind,
        partition: Vec<Region>,
        #[serde(default = "default_resolution")]
        resolution: f64,
        #[serde(default = "default_truncation_tol")]
        truncation_tol: f64,
        #[serde(default)]
        method: EigenMethod,
    },
    /// `(1/√N) xᵀ B y` with `x ~ entry_law`, `y ~ law_y`.
    AppendixClt { law_y: EntryLaw, operator: OperatorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Zero,
    /// Diagonal repeating `values` cyclically.
    Diagonal { values: Vec<Complex64> },
}

impl OperatorSpec {
    pub fn diagonal(&self, n: usize) -> Vec<Complex64> {
        match self {
            OperatorSpec::Identity => vec![Complex64::new(1.0, 0.0); n],
            OperatorSpec::Zero => vec![Complex64::new(0.0, 0.0); n],
            OperatorSpec::Diagonal { values } => (0..n).map(|i| values[i % values.len()]).collect(),
        }
    }
}

/// Bounds on an aggregate metric, enforced with `--assert`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

fn default_match_tol() -> f64 {
    0.15
}
fn default_keep() -> usize {
    1
}
fn default_grid() -> usize {
    100
}
fn default_atoms() -> usize {
    outliers_core::spectral::DEFAULT_PROXY_ATOMS
}
fn default_band() -> f64 {
    0.02
}
fn default_resolution() -> f64 {
    0.1
}
fn default_truncation_tol() -> f64 {
    1e-8
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let config: ExperimentConfig = raw.clone().try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        // Internally tagged unit variants swallow unknown keys; compare key sets.
        let echoed = toml::Value::try_from(&config).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(key) = first_unknown_key(&raw, &echoed, "") {
            return Err(ConfigError::UnknownKey(key));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(field("trials", "must be at least 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(field("sigma", format!("must be positive and finite, got {}", self.sigma)));
        }
        if self.n < 2 {
            return Err(field("n", "must be at least 2"));
        }
        if let Some(r) = self.deformation.rank() {
            if self.n < 2 * r {
                return Err(field("n", format!("must be at least 2r = {} for this deformation", 2 * r)));
            }
        }
        self.region.validate().map_err(|m| field("region", m))?;
        for (i, c) in self.checks.iter().enumerate() {
            if c.min.is_none() && c.max.is_none() {
                return Err(field(&format!("checks[{i}]"), "needs `min` or `max`"));
            }
        }
        match &self.analysis {
            Analysis::SpectrumScatter { match_tol, .. } => {
                if !(*match_tol > 0.0) {
                    return Err(field("analysis.match_tol", "must be positive"));
                }
            }
            Analysis::SupportTestGrid { grid, extent, atoms, band } => {
                if *grid < 2 {
                    return Err(field("analysis.grid", "must be at least 2"));
                }
                if !(*extent > 0.0) {
                    return Err(field("analysis.extent", "must be positive"));
                }
                if *atoms < 1 {
                    return Err(field("analysis.atoms", "must be positive"));
                }
                if !(*band >= 0.0) {
                    return Err(field("analysis.band", "must be non-negative"));
                }
            }
            Analysis::StableFluct { delta, .. } => {
                if !matches!(self.deformation, DeformationKind::ThetaDiag { .. }) {
                    return Err(field("deformation", "stable_fluct requires kind = \"theta_diag\""));
                }
                check_delta(delta)?;
            }
            Analysis::JordanFluct { delta, .. } => {
                if !matches!(self.deformation, DeformationKind::JordanBlock { .. }) {
                    return Err(field("deformation", "jordan_fluct requires kind = \"jordan_block\""));
                }
                check_delta(delta)?;
            }
            Analysis::GafCompare {
                partition,
                resolution,
                truncation_tol,
                ..
            } => {
                if !matches!(self.region, Region::Disk { .. }) {
                    return Err(field("region", "gaf_compare requires a disk"));
                }
                if partition.is_empty() {
                    return Err(field("analysis.partition", "must not be empty"));
                }
                for (i, cell) in partition.iter().enumerate() {
                    cell.validate().map_err(|m| field(&format!("analysis.partition[{i}]"), m))?;
                }
                if !(*resolution > 0.0) {
                    return Err(field("analysis.resolution", "must be positive"));
                }
                if !(*truncation_tol > 0.0 && *truncation_tol < 1.0) {
                    return Err(field("analysis.truncation_tol", "must lie in (0, 1)"));
                }
            }
            Analysis::AppendixClt { operator, .. } => {
                if let OperatorSpec::Diagonal { values } = operator {
                    if values.is_empty() {
                        return Err(field("analysis.operator.values", "must not be empty"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_delta(delta: &Option<f64>) -> Result<(), ConfigError> {
    match delta {
        Some(d) if !(*d > 0.0 && d.is_finite()) => Err(field("analysis.delta", "must be positive")),
        _ => Ok(()),
    }
}

fn first_unknown_key(raw: &toml::Value, known: &toml::Value, path: &str) -> Option<String> {
    match (raw, known) {
        (toml::Value::Table(r), toml::Value::Table(k)) => {
            let known_keys: BTreeSet<&String> = k.keys().collect();
            for (key, value) in r {
                let sub = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                if !known_keys.contains(key) {
                    return Some(sub);
                }
                if let Some(found) = first_unknown_key(value, &k[key], &sub) {
                    return Some(found);
                }
            }
            None
        }
        (toml::Value::Array(r), toml::Value::Array(k)) => r
            .iter()
            .zip(k)
            .enumerate()
            .find_map(|(i, (a, b))| first_unknown_key(a, b, &format!("{path}[{i}]"))),
        _ => None,
    }
}
