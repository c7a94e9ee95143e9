//! Ground-truth channel synthesis for the RIS-assisted uplink.
//!
//! The BS-RIS channel `F` (M x N) and the per-user RIS-User channels `H_k`
//! (N x L) are sums of a small number of rank-1 path contributions. Each side
//! of a path uses either the spherical-wavefront (near-field) or the
//! planar-wavefront (far-field) UPA response, selected by comparing the link
//! distance against the Rayleigh distance of the relevant aperture. The
//! estimators never see `F` or `H_k` directly; they work on the effective
//! cascades `H_eff[k,l] = F * diag(H_k(:,l))`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector};

/// UPA element counts, horizontal x vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub horizontal: usize,
    pub vertical: usize,
}

impl ArrayGeometry {
    pub fn new(horizontal: usize, vertical: usize) -> Self {
        Self {
            horizontal,
            vertical,
        }
    }

    /// Total element count.
    pub fn count(&self) -> usize {
        self.horizontal * self.vertical
    }
}

/// Propagation regime of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Near,
    Far,
}

/// Per-link regime selection: by distance, or forced for category studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    Auto,
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimePolicy {
    pub bs_ris: RegimeChoice,
    pub ris_user: RegimeChoice,
}

impl RegimePolicy {
    pub fn auto() -> Self {
        Self {
            bs_ris: RegimeChoice::Auto,
            ris_user: RegimeChoice::Auto,
        }
    }

    pub fn forced(bs_ris: Regime, ris_user: Regime) -> Self {
        let f = |r| match r {
            Regime::Near => RegimeChoice::Near,
            Regime::Far => RegimeChoice::Far,
        };
        Self {
            bs_ris: f(bs_ris),
            ris_user: f(ris_user),
        }
    }
}

/// The two physical links of the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    BsRis,
    RisUser,
}

/// Per-path complex gain convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// Magnitude uniform on `[0, pi]` times the per-path normalization, with
    /// an independent uniform phase.
    Synthetic,
    /// As `Synthetic`, additionally scaled by the square root of the
    /// power-law path loss of the link distance.
    SyntheticPowerlaw,
    /// Zero-mean complex Gaussian with variance set by the shadowed
    /// log-distance path loss (LOS first path, NLOS otherwise).
    Lognormal,
}

/// Static description of one experiment's geometry and radio parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// BS UPA; M = product.
    pub bs_antennas: ArrayGeometry,
    /// RIS UPA; N = product.
    pub ris_elements: ArrayGeometry,
    /// Per-user UPA; L = product.
    pub user_antennas: ArrayGeometry,
    /// Number of users K.
    pub users: usize,
    /// RF chains at the BS; must divide M.
    pub rf_chains: usize,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Paths in the BS-RIS channel (N_f).
    pub paths_bs_ris: usize,
    /// Paths in each RIS-User channel (N_h, same for every user).
    pub paths_ris_user: usize,
    /// BS-RIS distance in meters (z_f).
    pub z_bs_ris: f64,
    /// RIS-User distance range in meters; each user's distance is drawn
    /// uniformly from it.
    pub z_ris_user: (f64, f64),
    /// Per-user per-antenna pilot power P.
    pub transmit_power: f64,
    /// Receiver noise variance sigma^2.
    pub noise_variance: f64,
    pub regime_policy: RegimePolicy,
    pub gain_model: GainModel,
}

impl SystemConfig {
    /// Number of BS antennas M.
    pub fn bs_count(&self) -> usize {
        self.bs_antennas.count()
    }

    /// Number of RIS elements N.
    pub fn ris_count(&self) -> usize {
        self.ris_elements.count()
    }

    /// Antennas per user L.
    pub fn user_count(&self) -> usize {
        self.user_antennas.count()
    }

    /// Subframes per first-part block, M_RF = M / N_RF.
    pub fn m_rf(&self) -> usize {
        self.bs_count() / self.rf_chains
    }

    /// A small configuration exercising the full protocol in well under a
    /// second per trial: 8x4 BS and RIS arrays, 2x2 user arrays, 4 users,
    /// 4 RF chains, 3 paths per link.
    pub fn desk_default() -> Self {
        Self {
            bs_antennas: ArrayGeometry::new(8, 4),
            ris_elements: ArrayGeometry::new(8, 4),
            user_antennas: ArrayGeometry::new(2, 2),
            users: 4,
            rf_chains: 4,
            wavelength: 0.006,
            paths_bs_ris: 3,
            paths_ris_user: 3,
            z_bs_ris: 8.0,
            z_ris_user: (1.5, 2.5),
            transmit_power: 1.0,
            noise_variance: 1.0,
            regime_policy: RegimePolicy::auto(),
            gain_model: GainModel::Synthetic,
        }
    }

    /// The large configuration used for the headline experiments: 16x8 BS and
    /// RIS arrays, 2x2 user arrays, 8 RF chains.
    pub fn paper_default() -> Self {
        Self {
            bs_antennas: ArrayGeometry::new(16, 8),
            ris_elements: ArrayGeometry::new(16, 8),
            user_antennas: ArrayGeometry::new(2, 2),
            users: 4,
            rf_chains: 8,
            wavelength: 0.006,
            paths_bs_ris: 3,
            paths_ris_user: 3,
            z_bs_ris: 150.0,
            z_ris_user: (20.0, 30.0),
            transmit_power: 1.0,
            noise_variance: 1.0,
            regime_policy: RegimePolicy::auto(),
            gain_model: GainModel::Synthetic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.bs_count();
        if m == 0 || self.ris_count() == 0 || self.user_count() == 0 || self.users == 0 {
            return Err(Error::Config(
                "all array and user counts must be positive".into(),
            ));
        }
        if self.rf_chains == 0 || self.rf_chains > m {
            return Err(Error::Config(format!(
                "rf_chains must be in 1..=M ({}), got {}",
                m, self.rf_chains
            )));
        }
        if m % self.rf_chains != 0 {
            return Err(Error::Config(format!(
                "M ({}) must be divisible by rf_chains ({})",
                m, self.rf_chains
            )));
        }
        if self.wavelength <= 0.0 {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        if self.paths_bs_ris == 0 || self.paths_ris_user == 0 {
            return Err(Error::Config("path counts must be at least 1".into()));
        }
        if self.z_bs_ris <= 0.0
            || self.z_ris_user.0 <= 0.0
            || self.z_ris_user.1 < self.z_ris_user.0
        {
            return Err(Error::Config(
                "link distances must be positive with a valid range".into(),
            ));
        }
        if self.transmit_power <= 0.0 {
            return Err(Error::Config("transmit_power must be positive".into()));
        }
        if self.noise_variance < 0.0 {
            return Err(Error::Config("noise_variance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One propagation path: complex gain, scatter distances (used only when the
/// corresponding side is synthesized in the near-field regime), and the
/// arrival/departure angle pairs.
#[derive(Debug, Clone)]
pub struct PathParams {
    pub gain: Complex64,
    pub distance_rx: Option<f64>,
    pub distance_tx: Option<f64>,
    pub elevation_rx: f64,
    pub azimuth_rx: f64,
    pub elevation_tx: f64,
    pub azimuth_tx: f64,
}

/// Ground truth for one trial: `F`, the `H_k`'s, the effective cascades, and
/// the regimes and distances they were drawn with.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// BS-RIS channel, M x N.
    pub bs_ris: CMatrix,
    /// RIS-User channels, K entries of N x L.
    pub ris_user: Vec<CMatrix>,
    /// Effective cascades indexed `[k][l]`, each M x N.
    pub h_eff: Vec<Vec<CMatrix>>,
    pub regime_bs_ris: Regime,
    pub regime_ris_user: Vec<Regime>,
    pub user_distances: Vec<f64>,
}

/// Spherical-wavefront UPA response for a scatter at distance `d` and angles
/// `(theta, phi)`, using the second-order path-length expansion around the
/// array center. Elements are indexed horizontal-major; entries have modulus
/// `sqrt(1/X)` so the vector has unit norm.
///
/// # Panics
/// Panics if `d <= 0` or either array dimension is zero.
pub fn near_field_response(
    geom: ArrayGeometry,
    d: f64,
    theta: f64,
    phi: f64,
    wavelength: f64,
) -> CVector {
    assert!(d > 0.0, "near_field_response: distance must be positive");
    assert!(geom.count() > 0, "near_field_response: empty array");
    let x_count = geom.count() as f64;
    let scale = (1.0 / x_count).sqrt();
    let st = theta.sin();
    let (sp, cp) = (phi.sin(), phi.cos());
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let half = wavelength / 2.0;
    let mut entries = Vec::with_capacity(geom.count());
    for eh in 1..=geom.horizontal {
        let x = half * (eh as f64 - (geom.horizontal as f64 + 1.0) / 2.0);
        for ev in 1..=geom.vertical {
            let y = half * (ev as f64 - (geom.vertical as f64 + 1.0) / 2.0);
            let delta = -st * cp * x - st * sp * y
                + (1.0 - st * st * cp * cp) / (2.0 * d) * x * x
                + (1.0 - st * st * sp * sp) / (2.0 * d) * y * y
                - st * st * cp * sp / d * x * y;
            entries.push(Complex64::from_polar(scale, -k0 * delta));
        }
    }
    CVector::from_vec(entries)
}

/// Planar-wavefront UPA response; the `d -> inf` limit of
/// [`near_field_response`] up to a global phase. Same indexing convention.
pub fn far_field_response(geom: ArrayGeometry, theta: f64, phi: f64) -> CVector {
    assert!(geom.count() > 0, "far_field_response: empty array");
    let x_count = geom.count() as f64;
    let scale = (1.0 / x_count).sqrt();
    let u = theta.sin() * phi.cos();
    let v = theta.sin() * phi.sin();
    let mut entries = Vec::with_capacity(geom.count());
    for eh in 0..geom.horizontal {
        for ev in 0..geom.vertical {
            let phase = std::f64::consts::PI * (eh as f64 * u + ev as f64 * v);
            entries.push(Complex64::from_polar(scale, phase));
        }
    }
    CVector::from_vec(entries)
}

/// Rayleigh distance of the RIS aperture, `2 * D_RIS^2 / lambda` with
/// `D_RIS = (lambda/2) * N`.
pub fn rayleigh_distance(cfg: &SystemConfig) -> f64 {
    let d_ris = cfg.wavelength / 2.0 * cfg.ris_count() as f64;
    2.0 * d_ris * d_ris / cfg.wavelength
}

/// MIMO Rayleigh distance of the combined BS and RIS apertures,
/// `2 * (D_RIS + D_BS)^2 / lambda`.
pub fn mimo_rayleigh_distance(cfg: &SystemConfig) -> f64 {
    let d_ris = cfg.wavelength / 2.0 * cfg.ris_count() as f64;
    let d_bs = cfg.wavelength / 2.0 * cfg.bs_count() as f64;
    let d = d_ris + d_bs;
    2.0 * d * d / cfg.wavelength
}

/// Regime of a link at the given distance, honoring any forced override in
/// the config. Under the auto policy a link is near-field iff the distance
/// does not exceed the applicable Rayleigh distance.
///
/// # Panics
/// Panics if `distance <= 0`.
pub fn classify_regime(link: Link, distance: f64, cfg: &SystemConfig) -> Regime {
    assert!(distance > 0.0, "classify_regime: distance must be positive");
    let choice = match link {
        Link::BsRis => cfg.regime_policy.bs_ris,
        Link::RisUser => cfg.regime_policy.ris_user,
    };
    match choice {
        RegimeChoice::Near => Regime::Near,
        RegimeChoice::Far => Regime::Far,
        RegimeChoice::Auto => {
            let boundary = match link {
                Link::BsRis => mimo_rayleigh_distance(cfg),
                Link::RisUser => rayleigh_distance(cfg),
            };
            if distance <= boundary {
                Regime::Near
            } else {
                Regime::Far
            }
        }
    }
}

/// Per-path amplitude normalization: power split equally across the paths of
/// a link, `sqrt(NL/N_h)` for RIS-User and `sqrt(MN/N_f)` for BS-RIS.
pub fn path_gain_scale(cfg: &SystemConfig, link: Link) -> f64 {
    match link {
        Link::BsRis => ((cfg.bs_count() * cfg.ris_count()) as f64 / cfg.paths_bs_ris as f64).sqrt(),
        Link::RisUser => {
            ((cfg.ris_count() * cfg.user_count()) as f64 / cfg.paths_ris_user as f64).sqrt()
        }
    }
}

/// Power-law large-scale path loss, `10^-2 * z^-2.2` (linear power gain).
///
/// # Panics
/// Panics if `z <= 0`.
pub fn path_loss_powerlaw(z: f64) -> f64 {
    assert!(z > 0.0, "path_loss_powerlaw: distance must be positive");
    1e-2 * z.powf(-2.2)
}

/// Deterministic part of the shadowed log-distance path loss in dB:
/// `alpha + 10 * beta * log10(z)` with LOS parameters (61.4, 2) and NLOS
/// parameters (72.0, 2.92).
pub fn path_loss_lognormal_mean(z: f64, los: bool) -> f64 {
    assert!(z > 0.0, "path_loss_lognormal: distance must be positive");
    let (alpha, beta) = if los { (61.4, 2.0) } else { (72.0, 2.92) };
    alpha + 10.0 * beta * z.log10()
}

/// Shadowing standard deviation in dB for the log-distance model.
pub fn path_loss_shadowing_db(los: bool) -> f64 {
    if los {
        5.8
    } else {
        8.7
    }
}

/// Shadowed log-distance path loss in dB: the deterministic mean plus a
/// zero-mean Gaussian shadowing term.
pub fn path_loss_lognormal<R: Rng + ?Sized>(z: f64, los: bool, rng: &mut R) -> f64 {
    let eps: f64 = rng.sample::<f64, _>(StandardNormal) * path_loss_shadowing_db(los);
    path_loss_lognormal_mean(z, los) + eps
}

/// Draws the path parameters of one link. Angles are uniform on `[0, pi)`;
/// scatter distances are uniform on `[0.5, 1.5] * link_distance`; the gain
/// follows the configured [`GainModel`] (the first path is treated as LOS by
/// the lognormal model).
pub fn draw_paths<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SystemConfig,
    link: Link,
    link_distance: f64,
) -> Vec<PathParams> {
    use std::f64::consts::PI;
    let count = match link {
        Link::BsRis => cfg.paths_bs_ris,
        Link::RisUser => cfg.paths_ris_user,
    };
    let scale = path_gain_scale(cfg, link);
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let elevation_rx = rng.random_range(0.0..PI);
        let azimuth_rx = rng.random_range(0.0..PI);
        let elevation_tx = rng.random_range(0.0..PI);
        let azimuth_tx = rng.random_range(0.0..PI);
        let distance_rx = rng.random_range(0.5 * link_distance..1.5 * link_distance);
        let distance_tx = rng.random_range(0.5 * link_distance..1.5 * link_distance);
        let gain = match cfg.gain_model {
            GainModel::Synthetic => {
                let magnitude = scale * rng.random_range(0.0..PI);
                let phase = rng.random_range(0.0..2.0 * PI);
                Complex64::from_polar(magnitude, phase)
            }
            GainModel::SyntheticPowerlaw => {
                let magnitude =
                    scale * rng.random_range(0.0..PI) * path_loss_powerlaw(link_distance).sqrt();
                let phase = rng.random_range(0.0..2.0 * PI);
                Complex64::from_polar(magnitude, phase)
            }
            GainModel::Lognormal => {
                let pl_db = path_loss_lognormal(link_distance, i == 0, rng);
                let sigma = (scale * scale * 10f64.powf(-0.1 * pl_db) / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(sigma * re, sigma * im)
            }
        };
        paths.push(PathParams {
            gain,
            distance_rx: Some(distance_rx),
            distance_tx: Some(distance_tx),
            elevation_rx,
            azimuth_rx,
            elevation_tx,
            azimuth_tx,
        });
    }
    paths
}

/// RIS-User channel `H_k = sum_i alpha_i * rx_i * tx_i^H` (N x L). The RIS
/// side uses the near-field response in the near regime; the user side is
/// always far-field.
///
/// # Panics
/// Panics on an empty path list, or if the near regime is requested for a
/// path without a receive scatter distance.
pub fn gen_ris_user_channel(paths: &[PathParams], regime: Regime, cfg: &SystemConfig) -> CMatrix {
    assert!(!paths.is_empty(), "gen_ris_user_channel: no paths");
    let n = cfg.ris_count();
    let l = cfg.user_count();
    let mut h = CMatrix::zeros(n, l);
    for p in paths {
        let rx = match regime {
            Regime::Near => near_field_response(
                cfg.ris_elements,
                p.distance_rx.expect("near-field path requires distance_rx"),
                p.elevation_rx,
                p.azimuth_rx,
                cfg.wavelength,
            ),
            Regime::Far => far_field_response(cfg.ris_elements, p.elevation_rx, p.azimuth_rx),
        };
        let tx = far_field_response(cfg.user_antennas, p.elevation_tx, p.azimuth_tx);
        h += (rx * tx.adjoint()) * p.gain;
    }
    h
}

/// BS-RIS channel `F = sum_i alpha_i * rx_i * tx_i^H` (M x N). Both sides use
/// the near-field response in the near regime and the far-field response
/// otherwise.
///
/// # Panics
/// Panics on an empty path list, or if the near regime is requested for a
/// path without scatter distances.
pub fn gen_bs_ris_channel(paths: &[PathParams], regime: Regime, cfg: &SystemConfig) -> CMatrix {
    assert!(!paths.is_empty(), "gen_bs_ris_channel: no paths");
    let m = cfg.bs_count();
    let n = cfg.ris_count();
    let mut f = CMatrix::zeros(m, n);
    for p in paths {
        let (rx, tx) = match regime {
            Regime::Near => (
                near_field_response(
                    cfg.bs_antennas,
                    p.distance_rx.expect("near-field path requires distance_rx"),
                    p.elevation_rx,
                    p.azimuth_rx,
                    cfg.wavelength,
                ),
                near_field_response(
                    cfg.ris_elements,
                    p.distance_tx.expect("near-field path requires distance_tx"),
                    p.elevation_tx,
                    p.azimuth_tx,
                    cfg.wavelength,
                ),
            ),
            Regime::Far => (
                far_field_response(cfg.bs_antennas, p.elevation_rx, p.azimuth_rx),
                far_field_response(cfg.ris_elements, p.elevation_tx, p.azimuth_tx),
            ),
        };
        f += (rx * tx.adjoint()) * p.gain;
    }
    f
}

/// Effective cascades for one user: the l-th output is `F` with its n-th
/// column scaled by `H_k(n, l)`.
///
/// # Panics
/// Panics if `F` has a different column count than `H_k` has rows.
pub fn effective_channel(f: &CMatrix, h_k: &CMatrix) -> Vec<CMatrix> {
    assert_eq!(
        f.ncols(),
        h_k.nrows(),
        "effective_channel: F columns must match H_k rows"
    );
    (0..h_k.ncols())
        .map(|l| {
            let mut eff = f.clone();
            for n in 0..f.ncols() {
                let s = h_k[(n, l)];
                eff.column_mut(n).iter_mut().for_each(|v| *v *= s);
            }
            eff
        })
        .collect()
}

/// Relative floor below which an entry of the reference column `H_1(:,1)`
/// makes the realization unusable for the diagonal-ratio factorization.
const DEGENERATE_REF_FLOOR: f64 = 1e-9;
const MAX_REDRAWS: usize = 32;

impl ChannelRealization {
    /// Draws a complete realization: per-user distances, path parameters,
    /// `F`, the `H_k`'s, and the effective cascades. Realizations whose
    /// reference column `H_1(:,1)` contains an entry below
    /// `1e-9 * max |H_1(:,1)|` are redrawn (the diagonal ratios
    /// `H_k(n,l)/H_1(n,1)` would blow up); after 32 attempts this fails with
    /// a degenerate-realization error.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig) -> Result<Self> {
        for _ in 0..MAX_REDRAWS {
            let realization = Self::draw_once(rng, cfg);
            if !realization.reference_column_degenerate() {
                return Ok(realization);
            }
        }
        Err(Error::Degenerate(format!(
            "reference column H_1(:,1) still contains a near-zero entry after {MAX_REDRAWS} redraws"
        )))
    }

    /// Redraws only the RIS-User side, keeping `F` and its regime. Used by
    /// the two-phase protocol where the BS-RIS channel outlives many user
    /// coherence intervals.
    pub fn redraw_users<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &SystemConfig) -> Result<Self> {
        for _ in 0..MAX_REDRAWS {
            let mut out = self.clone();
            out.draw_users(rng, cfg);
            if !out.reference_column_degenerate() {
                return Ok(out);
            }
        }
        Err(Error::Degenerate(format!(
            "reference column H_1(:,1) still contains a near-zero entry after {MAX_REDRAWS} redraws"
        )))
    }

    fn draw_once<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig) -> Self {
        let regime_bs_ris = classify_regime(Link::BsRis, cfg.z_bs_ris, cfg);
        let paths_f = draw_paths(rng, cfg, Link::BsRis, cfg.z_bs_ris);
        let bs_ris = gen_bs_ris_channel(&paths_f, regime_bs_ris, cfg);
        let mut out = Self {
            bs_ris,
            ris_user: Vec::new(),
            h_eff: Vec::new(),
            regime_bs_ris,
            regime_ris_user: Vec::new(),
            user_distances: Vec::new(),
        };
        out.draw_users(rng, cfg);
        out
    }

    fn draw_users<R: Rng + ?Sized>(&mut self, rng: &mut R, cfg: &SystemConfig) {
        let (lo, hi) = cfg.z_ris_user;
        self.ris_user.clear();
        self.h_eff.clear();
        self.regime_ris_user.clear();
        self.user_distances.clear();
        for _ in 0..cfg.users {
            let z = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let regime = classify_regime(Link::RisUser, z, cfg);
            let paths = draw_paths(rng, cfg, Link::RisUser, z);
            let h_k = gen_ris_user_channel(&paths, regime, cfg);
            self.h_eff.push(effective_channel(&self.bs_ris, &h_k));
            self.ris_user.push(h_k);
            self.regime_ris_user.push(regime);
            self.user_distances.push(z);
        }
    }

    fn reference_column_degenerate(&self) -> bool {
        let reference = self.ris_user[0].column(0);
        let max = reference.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        reference
            .iter()
            .any(|v| v.norm() < DEGENERATE_REF_FLOOR * max)
    }

    /// The M x (N*L) horizontal stack of one user's effective cascades.
    pub fn h_eff_stacked(&self, k: usize) -> CMatrix {
        stack_columns(&self.h_eff[k])
    }
}

/// Horizontal concatenation of equally sized matrices.
pub fn stack_columns(mats: &[CMatrix]) -> CMatrix {
    assert!(!mats.is_empty(), "stack_columns: empty input");
    let rows = mats[0].nrows();
    let cols: usize = mats.iter().map(|m| m.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        assert_eq!(m.nrows(), rows, "stack_columns: row mismatch");
        out.view_mut((0, at), (rows, m.ncols())).copy_from(m);
        at += m.ncols();
    }
    out
}
