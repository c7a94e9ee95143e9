//! Experiment configuration: sweep axes, channel categories, SNR
//! conventions, and the TOML file format.

use serde::{Deserialize, Serialize};

use crate::channel::{
    path_loss_lognormal_mean, Regime, RegimePolicy, SystemConfig,
};
use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;

/// Which links are synthesized near-field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelCategory {
    FarFar,
    FarNear,
    NearNear,
}

impl ChannelCategory {
    pub fn policy(&self) -> RegimePolicy {
        match self {
            ChannelCategory::FarFar => RegimePolicy::forced(Regime::Far, Regime::Far),
            ChannelCategory::FarNear => RegimePolicy::forced(Regime::Far, Regime::Near),
            ChannelCategory::NearNear => RegimePolicy::forced(Regime::Near, Regime::Near),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ChannelCategory::FarFar => "far-far",
            ChannelCategory::FarNear => "far-near",
            ChannelCategory::NearNear => "near-near",
        }
    }

    pub const ALL: [ChannelCategory; 3] = [
        ChannelCategory::FarFar,
        ChannelCategory::FarNear,
        ChannelCategory::NearNear,
    ];
}

/// How an SNR value in dB maps to (transmit power, noise variance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// Unit noise variance; the transmit power is swept:
    /// `P = 10^(snr/10)`, `sigma^2 = 1`.
    Synthetic,
    /// Noise variance tied to the LOS path losses of both links at their
    /// nominal distances: `sigma^2 = 10^(-0.1 (PL(z_h) + PL(z_f)))`,
    /// `P = sigma^2 * 10^(snr/10)`.
    Lognormal,
    /// The system's explicit (transmit_power, noise_variance) pair is used
    /// as configured; `snr_db` is ignored. This is how noiseless runs are
    /// expressed.
    Fixed,
}

/// One point of a distance sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceScenario {
    pub label: String,
    pub z_bs_ris: f64,
    pub z_ris_user: (f64, f64),
    /// Overrides the experiment-level category for this scenario.
    pub category: Option<ChannelCategory>,
}

/// Exactly one quantity is swept per experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb(Vec<f64>),
    BlocksCol(Vec<usize>),
    Users(Vec<usize>),
    DistanceScenarios(Vec<DistanceScenario>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SnrDb(v) => v.len(),
            SweepAxis::BlocksCol(v) => v.len(),
            SweepAxis::Users(v) => v.len(),
            SweepAxis::DistanceScenarios(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Coherence windows of the two-phase protocol: the BS-RIS subspace is
/// re-estimated every `t_f` seconds while the user channels change every
/// `t_h` seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPhaseConfig {
    pub t_f: f64,
    pub t_h: f64,
}

impl TwoPhaseConfig {
    /// Estimation slots per window; `t_f` must be an integer multiple of
    /// `t_h`.
    pub fn slots_per_window(&self) -> Result<usize> {
        if !(self.t_f > 0.0 && self.t_h > 0.0 && self.t_f > self.t_h) {
            return Err(Error::Parameter(format!(
                "two_phase requires t_f > t_h > 0, got t_f={}, t_h={}",
                self.t_f, self.t_h
            )));
        }
        let ratio = self.t_f / self.t_h;
        let slots = ratio.round();
        if (ratio - slots).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "t_f ({}) must be an integer multiple of t_h ({})",
                self.t_f, self.t_h
            )));
        }
        Ok(slots as usize)
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub sweep: SweepAxis,
    pub category: ChannelCategory,
    /// Trials per sweep point (windows per point under the two-phase
    /// protocol).
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// Joint-optimization iterations.
    pub t_max: usize,
    /// First-part blocks B_c (overridden by a blocks_col sweep).
    pub blocks_col: usize,
    /// Second-part blocks B_r.
    pub blocks_row: usize,
    /// Base SNR in dB (overridden by an snr_db sweep).
    pub snr_db: f64,
    pub snr_convention: SnrConvention,
    pub two_phase: Option<TwoPhaseConfig>,
}

impl ExperimentConfig {
    /// Desk-scale single-point defaults: 0 dB, near-near, both estimators.
    pub fn desk_default() -> Self {
        Self {
            system: SystemConfig::desk_default(),
            sweep: SweepAxis::SnrDb(vec![0.0]),
            category: ChannelCategory::NearNear,
            trials: 200,
            master_seed: 1,
            estimators: vec![EstimatorKind::ClraJo, EstimatorKind::ClraLs],
            t_max: 10,
            blocks_col: 6,
            blocks_row: 1,
            snr_db: 0.0,
            snr_convention: SnrConvention::Synthetic,
            two_phase: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep axis must contain at least one point".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator must be selected".into()));
        }
        if self.blocks_col == 0 || self.blocks_row == 0 {
            return Err(Error::Config("blocks_col and blocks_row must be at least 1".into()));
        }
        if let SweepAxis::BlocksCol(values) = &self.sweep {
            if values.iter().any(|&b| b == 0) {
                return Err(Error::Config("blocks_col sweep values must be positive".into()));
            }
        }
        if let SweepAxis::Users(values) = &self.sweep {
            if values.iter().any(|&k| k == 0) {
                return Err(Error::Config("users sweep values must be positive".into()));
            }
        }
        if matches!(self.snr_convention, SnrConvention::Fixed) {
            if let SweepAxis::SnrDb(values) = &self.sweep {
                if values.len() > 1 {
                    return Err(Error::Config(
                        "an snr_db sweep has no effect under the fixed SNR convention".into(),
                    ));
                }
            }
        }
        if let Some(tp) = &self.two_phase {
            tp.slots_per_window()?;
        }
        Ok(())
    }

    /// Resolves sweep point `index` into a concrete system configuration and
    /// protocol parameters.
    pub fn resolve_point(&self, index: usize) -> Result<ResolvedPoint> {
        let mut system = self.system.clone();
        let mut category = self.category;
        let mut snr_db = self.snr_db;
        let mut blocks_col = self.blocks_col;
        let (axis_label, axis_value) = match &self.sweep {
            SweepAxis::SnrDb(values) => {
                snr_db = values[index];
                (format!("{}", snr_db), snr_db)
            }
            SweepAxis::BlocksCol(values) => {
                blocks_col = values[index];
                (format!("{}", blocks_col), blocks_col as f64)
            }
            SweepAxis::Users(values) => {
                system.users = values[index];
                (format!("{}", system.users), system.users as f64)
            }
            SweepAxis::DistanceScenarios(scenarios) => {
                let sc = &scenarios[index];
                system.z_bs_ris = sc.z_bs_ris;
                system.z_ris_user = sc.z_ris_user;
                if let Some(c) = sc.category {
                    category = c;
                }
                (sc.label.clone(), index as f64)
            }
        };
        system.regime_policy = category.policy();
        apply_snr(&mut system, snr_db, self.snr_convention);
        system.validate()?;
        Ok(ResolvedPoint {
            system,
            category,
            snr_db,
            blocks_col,
            blocks_row: self.blocks_row,
            t_max: self.t_max,
            axis_label,
            axis_value,
        })
    }

    pub fn points(&self) -> Result<Vec<ResolvedPoint>> {
        (0..self.sweep.len()).map(|i| self.resolve_point(i)).collect()
    }

    /// Parses a TOML experiment file; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// One sweep point with every knob pinned.
#[derive(Debug, Clone)]
pub struct ResolvedPoint {
    pub system: SystemConfig,
    pub category: ChannelCategory,
    pub snr_db: f64,
    pub blocks_col: usize,
    pub blocks_row: usize,
    pub t_max: usize,
    pub axis_label: String,
    pub axis_value: f64,
}

impl ResolvedPoint {
    /// Training overhead `J = M_RF * B_c + N * B_r` of this point.
    pub fn overhead_subframes(&self) -> usize {
        self.system.m_rf() * self.blocks_col + self.system.ris_count() * self.blocks_row
    }
}

/// Applies an SNR in dB to the system's power/noise pair under the chosen
/// convention.
pub fn apply_snr(system: &mut SystemConfig, snr_db: f64, convention: SnrConvention) {
    let linear = 10f64.powf(snr_db / 10.0);
    match convention {
        SnrConvention::Synthetic => {
            system.noise_variance = 1.0;
            system.transmit_power = linear;
        }
        SnrConvention::Lognormal => {
            let z_h = 0.5 * (system.z_ris_user.0 + system.z_ris_user.1);
            let pl_sum =
                path_loss_lognormal_mean(z_h, true) + path_loss_lognormal_mean(system.z_bs_ris, true);
            let sigma2 = 10f64.powf(-0.1 * pl_sum);
            system.noise_variance = sigma2;
            system.transmit_power = sigma2 * linear;
        }
        SnrConvention::Fixed => {}
    }
}
