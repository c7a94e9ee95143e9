//! Aggregated experiment results and their CSV/JSON serializations.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;

/// Per-estimator statistics at one sweep point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimatorPointStats {
    pub estimator: EstimatorKind,
    /// Successful trials feeding the means.
    pub trials: usize,
    pub mean_nmse: f64,
    /// Standard error of the mean NMSE.
    pub stderr_nmse: f64,
    /// Fraction of trials whose selected rank equals the true path count.
    pub rank_recovery_rate: f64,
    /// Elementwise mean of the joint-objective trajectories.
    pub mean_loss_trajectory: Vec<f64>,
    pub nmse_per_trial: Vec<f64>,
    pub rank_per_trial: Vec<usize>,
}

/// Results at one sweep point (or one two-phase slot).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointReport {
    pub axis_label: String,
    pub axis_value: f64,
    /// Training subframes spent per trial at this point.
    pub overhead_subframes: usize,
    pub failed_trials: usize,
    pub estimators: Vec<EstimatorPointStats>,
}

/// Two-phase overhead accounting for one coherence window.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TwoPhaseSummary {
    pub slots_per_window: usize,
    /// Subframes of the first slot (both training parts).
    pub full_training_subframes: usize,
    /// Subframes of every later slot (second part only).
    pub reduced_training_subframes: usize,
    /// Total subframes per window:
    /// `full + (slots - 1) * reduced = M_RF*B_c + slots*N*B_r`.
    pub cumulative_overhead_per_window: usize,
}

/// Complete output of one experiment: configuration echo, provenance, and
/// per-point statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmseReport {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    /// FNV-1a hash of the canonical JSON form of the configuration.
    pub config_hash: String,
    pub points: Vec<PointReport>,
    pub two_phase: Option<TwoPhaseSummary>,
}

/// Output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parameter(format!(
                "unknown report format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Stable 64-bit FNV-1a over the JSON encoding of the configuration.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let text = serde_json::to_string(config).map_err(|e| Error::Format(e.to_string()))?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    Ok(format!("{hash:016x}"))
}

impl NmseReport {
    /// One CSV row per (point, estimator); per-trial arrays are JSON-only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,estimator,mean_nmse,stderr,trials,rank_recovery_rate,seed\n",
        );
        for point in &self.points {
            for stats in &point.estimators {
                out.push_str(&format!(
                    "{},{},{:.12e},{:.12e},{},{:.6},{}\n",
                    point.axis_label,
                    stats.estimator.name(),
                    stats.mean_nmse,
                    stats.stderr_nmse,
                    stats.trials,
                    stats.rank_recovery_rate,
                    self.master_seed
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes the report to `path` in the requested format.
    pub fn emit(&self, format: ReportFormat, path: &Path) -> Result<()> {
        let body = match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json()?,
        };
        let io_err = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(body.as_bytes()).map_err(io_err)?;
        Ok(())
    }

    /// Statistics of one estimator at one point, when present.
    pub fn stats(&self, point: usize, estimator: EstimatorKind) -> Option<&EstimatorPointStats> {
        self.points
            .get(point)?
            .estimators
            .iter()
            .find(|s| s.estimator == estimator)
    }
}
