//! Seeded Monte Carlo experiment runner.
//!
//! Every report is a pure function of (configuration, master seed): per-trial
//! seeds are derived with a fixed mixing function, trials may run on any
//! number of threads, and aggregation walks the trial indices in order so
//! means are bit-reproducible.

pub mod config;
pub mod report;

pub use config::{
    apply_snr, ChannelCategory, DistanceScenario, ExperimentConfig, ResolvedPoint, SnrConvention,
    SweepAxis, TwoPhaseConfig,
};
pub use report::{
    config_hash, EstimatorPointStats, NmseReport, PointReport, ReportFormat, TwoPhaseSummary,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::estimator::{
    clra_jo_with_basis, estimate_basis, EstimatorKind, EstimatorOutput,
};
use crate::numerics::CMatrix;
use crate::protocol::{
    assemble_row_observations, simulate_protocol, simulate_subframe, ProtocolSchedule,
};

/// Per-user NMSE of one trial:
/// `(1/K) * sum_k ||H_hat_k - H_k||_F^2 / ||H_k||_F^2` over the M x (N*L)
/// stacked cascades.
pub fn nmse(h_hat: &[CMatrix], h_true: &[CMatrix]) -> Result<f64> {
    if h_hat.len() != h_true.len() || h_hat.is_empty() {
        return Err(Error::Dimension(format!(
            "nmse: got {} estimates for {} true channels",
            h_hat.len(),
            h_true.len()
        )));
    }
    let mut acc = 0.0;
    for (est, truth) in h_hat.iter().zip(h_true.iter()) {
        if est.shape() != truth.shape() {
            return Err(Error::Dimension(format!(
                "nmse: shape mismatch {:?} vs {:?}",
                est.shape(),
                truth.shape()
            )));
        }
        let denom = truth.norm_squared();
        if denom == 0.0 {
            return Err(Error::Parameter(
                "nmse: true channel has zero norm".into(),
            ));
        }
        acc += (est - truth).norm_squared() / denom;
    }
    Ok(acc / h_hat.len() as f64)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-trial seed: three chained splitmix64 rounds over
/// (master seed, point index, trial index).
pub fn derive_seed(master: u64, point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ point) ^ trial)
}

/// One estimator's results on one trial.
#[derive(Debug, Clone)]
pub struct EstimatorTrial {
    pub estimator: EstimatorKind,
    pub nmse: f64,
    pub rank_hat: usize,
    pub rank_clamped: bool,
    pub loss_trajectory: Vec<f64>,
}

/// All configured estimators' results on one trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub seed: u64,
    pub per_estimator: Vec<EstimatorTrial>,
}

fn evaluate(
    output: &EstimatorOutput,
    real: &ChannelRealization,
    users: usize,
    estimator: EstimatorKind,
) -> Result<EstimatorTrial> {
    let h_hat: Vec<CMatrix> = (0..users).map(|k| output.h_eff_stacked(k)).collect();
    let h_true: Vec<CMatrix> = (0..users).map(|k| real.h_eff_stacked(k)).collect();
    Ok(EstimatorTrial {
        estimator,
        nmse: nmse(&h_hat, &h_true)?,
        rank_hat: output.rank_hat,
        rank_clamped: output.rank_clamped,
        loss_trajectory: output.loss_trajectory.clone(),
    })
}

/// Draws a channel, simulates the full protocol, and runs every configured
/// estimator; fully deterministic given (point, estimators, seed).
pub fn run_trial(
    point: &ResolvedPoint,
    estimators: &[EstimatorKind],
    seed: u64,
) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = &point.system;
    let real = ChannelRealization::draw(&mut rng, cfg)?;
    let schedule = ProtocolSchedule::build(cfg, point.blocks_col, point.blocks_row)?;
    let obs = simulate_protocol(&real, &schedule, cfg, &mut rng)?;
    let basis = estimate_basis(&obs, cfg, point.blocks_row)?;

    let mut per_estimator = Vec::with_capacity(estimators.len());
    for &kind in estimators {
        let t_max = match kind {
            EstimatorKind::ClraJo => point.t_max,
            EstimatorKind::ClraLs => 0,
        };
        let output = clra_jo_with_basis(&basis, &obs.m_row, cfg, point.blocks_row, t_max)?;
        per_estimator.push(evaluate(&output, &real, cfg.users, kind)?);
    }
    Ok(TrialRecord {
        seed,
        per_estimator,
    })
}

#[cfg(feature = "parallel")]
fn map_trials<F>(count: usize, f: F) -> Vec<Result<TrialRecord>>
where
    F: Fn(usize) -> Result<TrialRecord> + Send + Sync,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_trials<F>(count: usize, f: F) -> Vec<Result<TrialRecord>>
where
    F: Fn(usize) -> Result<TrialRecord> + Sync,
{
    (0..count).map(f).collect()
}

fn aggregate_point(
    point: &ResolvedPoint,
    estimators: &[EstimatorKind],
    records: &[Result<TrialRecord>],
    true_rank: usize,
) -> PointReport {
    let ok: Vec<&TrialRecord> = records.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = records.len() - ok.len();
    let stats = estimators
        .iter()
        .enumerate()
        .map(|(ei, &kind)| {
            let nmses: Vec<f64> = ok.iter().map(|r| r.per_estimator[ei].nmse).collect();
            let ranks: Vec<usize> = ok.iter().map(|r| r.per_estimator[ei].rank_hat).collect();
            let n = nmses.len();
            let mean = if n > 0 {
                nmses.iter().sum::<f64>() / n as f64
            } else {
                f64::NAN
            };
            let stderr = if n > 1 {
                let var = nmses.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            let recovery = if n > 0 {
                ranks.iter().filter(|&&r| r == true_rank).count() as f64 / n as f64
            } else {
                0.0
            };
            let mean_loss = mean_trajectory(
                ok.iter()
                    .map(|r| r.per_estimator[ei].loss_trajectory.as_slice()),
            );
            EstimatorPointStats {
                estimator: kind,
                trials: n,
                mean_nmse: mean,
                stderr_nmse: stderr,
                rank_recovery_rate: recovery,
                mean_loss_trajectory: mean_loss,
                nmse_per_trial: nmses,
                rank_per_trial: ranks,
            }
        })
        .collect();
    PointReport {
        axis_label: point.axis_label.clone(),
        axis_value: point.axis_value,
        overhead_subframes: point.overhead_subframes(),
        failed_trials: failed,
        estimators: stats,
    }
}

fn mean_trajectory<'a>(trajectories: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for t in trajectories {
        if sum.is_empty() {
            sum = t.to_vec();
        } else {
            for (s, v) in sum.iter_mut().zip(t.iter()) {
                *s += v;
            }
        }
        count += 1;
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    sum
}

/// Runs the configured experiment: the two-phase protocol when `two_phase`
/// is set, the standard per-trial protocol otherwise.
pub fn run(cfg: &ExperimentConfig) -> Result<NmseReport> {
    if cfg.two_phase.is_some() {
        run_two_phase(cfg)
    } else {
        run_experiment(cfg)
    }
}

/// Standard Monte Carlo sweep: `trials` independent trials per sweep point,
/// seeds derived from (master seed, point index, trial index).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<NmseReport> {
    cfg.validate()?;
    let points = cfg.points()?;
    let mut reports = Vec::with_capacity(points.len());
    for (pi, point) in points.iter().enumerate() {
        let records = map_trials(cfg.trials, |ti| {
            let seed = derive_seed(cfg.master_seed, pi as u64, ti as u64);
            run_trial(point, &cfg.estimators, seed)
        });
        reports.push(aggregate_point(
            point,
            &cfg.estimators,
            &records,
            point.system.paths_bs_ris,
        ));
    }
    Ok(NmseReport {
        config_hash: config_hash(cfg)?,
        master_seed: cfg.master_seed,
        config: cfg.clone(),
        points: reports,
        two_phase: None,
    })
}

/// One coherence window of the two-phase protocol: full training in the
/// first slot, second-part-only training (with the retained basis) in the
/// remaining slots.
fn run_window(
    point: &ResolvedPoint,
    estimators: &[EstimatorKind],
    slots: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let cfg = &point.system;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut real = ChannelRealization::draw(&mut rng, cfg)?;
    let schedule = ProtocolSchedule::build(cfg, point.blocks_col, point.blocks_row)?;

    // Slot 1: both training parts; the basis is retained for the window.
    let obs = simulate_protocol(&real, &schedule, cfg, &mut rng)?;
    let basis = estimate_basis(&obs, cfg, point.blocks_row)?;

    let mut slot_records = Vec::with_capacity(slots);
    let record_slot = |real: &ChannelRealization,
                           m_row: &[CMatrix]|
     -> Result<TrialRecord> {
        let mut per_estimator = Vec::with_capacity(estimators.len());
        for &kind in estimators {
            let t_max = match kind {
                EstimatorKind::ClraJo => point.t_max,
                EstimatorKind::ClraLs => 0,
            };
            let output = clra_jo_with_basis(&basis, m_row, cfg, point.blocks_row, t_max)?;
            per_estimator.push(evaluate(&output, real, cfg.users, kind)?);
        }
        Ok(TrialRecord {
            seed,
            per_estimator,
        })
    };

    slot_records.push(record_slot(&real, &obs.m_row)?);

    // Later slots: user channels move, F stays; only the second part runs.
    for _ in 1..slots {
        real = real.redraw_users(&mut rng, cfg)?;
        let mut second = Vec::with_capacity(schedule.second.len());
        for sf in &schedule.second {
            second.push(simulate_subframe(&real, sf, &schedule.pilots, cfg, &mut rng)?);
        }
        let m_row = assemble_row_observations(&second, cfg, point.blocks_row)?;
        slot_records.push(record_slot(&real, &m_row)?);
    }
    Ok(slot_records)
}

/// Two-phase sweep: each trial is one BS-RIS coherence window containing
/// `t_f / t_h` estimation slots; the report carries one point per slot and
/// the overhead accounting of the window.
pub fn run_two_phase(cfg: &ExperimentConfig) -> Result<NmseReport> {
    cfg.validate()?;
    let tp = cfg
        .two_phase
        .ok_or_else(|| Error::Parameter("two_phase section missing".into()))?;
    let slots = tp.slots_per_window()?;
    if cfg.sweep.len() != 1 {
        return Err(Error::Config(
            "two-phase runs use a single sweep point; sweep the axis in separate runs".into(),
        ));
    }
    let point = cfg.resolve_point(0)?;

    let windows: Vec<Result<Vec<TrialRecord>>> = {
        let point = &point;
        let estimators = &cfg.estimators;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..cfg.trials)
                .into_par_iter()
                .map(|w| {
                    run_window(
                        point,
                        estimators,
                        slots,
                        derive_seed(cfg.master_seed, 0, w as u64),
                    )
                })
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..cfg.trials)
                .map(|w| {
                    run_window(
                        point,
                        estimators,
                        slots,
                        derive_seed(cfg.master_seed, 0, w as u64),
                    )
                })
                .collect()
        }
    };

    let full = point.overhead_subframes();
    let reduced = point.system.ris_count() * point.blocks_row;
    let mut points = Vec::with_capacity(slots);
    for slot in 0..slots {
        let records: Vec<Result<TrialRecord>> = windows
            .iter()
            .map(|w| match w {
                Ok(slots_vec) => Ok(slots_vec[slot].clone()),
                Err(e) => Err(Error::Parameter(e.to_string())),
            })
            .collect();
        let slot_point = ResolvedPoint {
            axis_label: format!("slot {}", slot + 1),
            axis_value: (slot + 1) as f64,
            ..point.clone()
        };
        let mut report = aggregate_point(
            &slot_point,
            &cfg.estimators,
            &records,
            point.system.paths_bs_ris,
        );
        report.overhead_subframes = if slot == 0 { full } else { reduced };
        points.push(report);
    }

    Ok(NmseReport {
        config_hash: config_hash(cfg)?,
        master_seed: cfg.master_seed,
        config: cfg.clone(),
        points,
        two_phase: Some(TwoPhaseSummary {
            slots_per_window: slots,
            full_training_subframes: full,
            reduced_training_subframes: reduced,
            cumulative_overhead_per_window: full + (slots - 1) * reduced,
        }),
    })
}

/// Outcome of the built-in noiseless exactness check.
#[derive(Debug, Clone)]
pub struct DemoOutcome {
    /// (category label, worst NMSE over the trials).
    pub per_category: Vec<(String, f64)>,
    pub pass: bool,
}

/// Runs a handful of noiseless desk-scale trials in every channel category;
/// passes when every trial reconstructs with NMSE below 1e-12.
pub fn demo_check(trials: usize) -> Result<DemoOutcome> {
    let mut per_category = Vec::new();
    let mut pass = true;
    for category in ChannelCategory::ALL {
        let mut cfg = ExperimentConfig::desk_default();
        cfg.category = category;
        cfg.trials = trials;
        cfg.estimators = vec![EstimatorKind::ClraJo];
        cfg.snr_convention = SnrConvention::Fixed;
        cfg.system.noise_variance = 0.0;
        cfg.system.transmit_power = 1.0;
        let point = cfg.resolve_point(0)?;
        let mut worst = 0.0f64;
        for t in 0..trials {
            let seed = derive_seed(cfg.master_seed, 0, t as u64);
            let record = run_trial(&point, &cfg.estimators, seed)?;
            worst = worst.max(record.per_estimator[0].nmse);
        }
        pass &= worst < 1e-12;
        per_category.push((category.label().to_string(), worst));
    }
    Ok(DemoOutcome { per_category, pass })
}
