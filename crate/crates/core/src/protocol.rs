//! Two-part uplink training: schedule construction, subframe simulation, and
//! observation assembly.
//!
//! Part one spends `M_RF * B_c` subframes cycling the RF combiner through a
//! column partition of the full M x M DFT while holding one reflection vector
//! per block; stacking and re-mixing the per-subframe observations yields
//! `M_col`, whose column space matches that of `F`. Part two spends
//! `N * B_r` subframes sweeping the reflection vector through all N DFT
//! columns per block; unmixing on the RIS side yields the row-sampled
//! observations `M_row[k,l]` of each effective channel.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{stack_columns, ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, dft_matrix, CMatrix, CVector};

/// Combiner and reflection vector held constant for one subframe.
#[derive(Debug, Clone)]
pub struct Subframe {
    /// RF combining matrix, M x N_RF.
    pub combiner: CMatrix,
    /// RIS reflection vector, length N, unit-modulus entries.
    pub reflection: CVector,
}

/// The full training schedule: both parts plus the per-user pilot matrices.
#[derive(Debug, Clone)]
pub struct ProtocolSchedule {
    pub blocks_col: usize,
    pub blocks_row: usize,
    /// Pilot sequence length T (>= K*L).
    pub pilot_len: usize,
    /// First-part subframes, `M_RF * B_c` entries.
    pub first: Vec<Subframe>,
    /// Second-part subframes, `N * B_r` entries.
    pub second: Vec<Subframe>,
    /// Per-user pilots, K entries of L x T.
    pub pilots: Vec<CMatrix>,
}

impl ProtocolSchedule {
    /// Builds the schedule with the minimal pilot length `T = K * L`.
    pub fn build(cfg: &SystemConfig, blocks_col: usize, blocks_row: usize) -> Result<Self> {
        Self::build_with_pilot_len(cfg, blocks_col, blocks_row, cfg.users * cfg.user_count())
    }

    pub fn build_with_pilot_len(
        cfg: &SystemConfig,
        blocks_col: usize,
        blocks_row: usize,
        pilot_len: usize,
    ) -> Result<Self> {
        let first = schedule_first_phase(cfg, blocks_col)?;
        let second = schedule_second_phase(cfg, blocks_row)?;
        let pilots = build_pilots(cfg.users, cfg.user_count(), pilot_len, cfg.transmit_power)?;
        Ok(Self {
            blocks_col,
            blocks_row,
            pilot_len,
            first,
            second,
            pilots,
        })
    }

    /// Total training overhead `J = M_RF * B_c + N * B_r`.
    pub fn total_subframes(&self) -> usize {
        self.first.len() + self.second.len()
    }
}

/// Assembled observations ready for estimation.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    /// M x (B_c * K * L) column-sampled observations.
    pub m_col: CMatrix,
    /// Row-sampled observations, K*L entries of (N_RF * B_r) x N, indexed
    /// `k * L + l`.
    pub m_row: Vec<CMatrix>,
    /// Number of observed column vectors feeding the covariance (used as the
    /// sample count by the rank-selection criterion).
    pub sample_count: usize,
}

impl ObservationSet {
    pub fn m_row_at(&self, k: usize, l: usize, user_antennas: usize) -> &CMatrix {
        &self.m_row[k * user_antennas + l]
    }
}

/// Per-user orthogonal pilots: user k gets rows `[L(k-1)+1 : Lk]` of the
/// `sqrt(P*T)`-scaled adjoint of the T-point DFT block, so that
/// `X_k X_k^H = P*T*I_L` and `X_k X_k'^H = 0` for different users.
pub fn build_pilots(users: usize, l: usize, t: usize, power: f64) -> Result<Vec<CMatrix>> {
    let kl = users * l;
    if t < kl {
        return Err(Error::Parameter(format!(
            "pilot length T ({t}) must be at least K*L ({kl})"
        )));
    }
    if power <= 0.0 {
        return Err(Error::Parameter("transmit power must be positive".into()));
    }
    let phi = dft_matrix(t, kl)?;
    let stack = phi.adjoint() * Complex64::new((power * t as f64).sqrt(), 0.0);
    Ok((0..users)
        .map(|k| stack.rows(k * l, l).into_owned())
        .collect())
}

/// Rescales every entry to unit modulus, preserving phases.
fn unit_modulus(v: &CVector) -> CVector {
    v.map(|z| {
        let m = z.norm();
        assert!(m > 0.0, "unit_modulus: zero entry");
        z / m
    })
}

/// First-part subframes. Subframe `i` of every block uses combiner
/// `Phi_[M,M](:, [N_RF(i-1)+1 : N_RF*i])`; all `M_RF` subframes of block `b`
/// share the reflection vector `Phi_[N,B_c](:, b)` rescaled to unit modulus.
pub fn schedule_first_phase(cfg: &SystemConfig, blocks_col: usize) -> Result<Vec<Subframe>> {
    if blocks_col == 0 {
        return Err(Error::Parameter("B_c must be at least 1".into()));
    }
    let m = cfg.bs_count();
    let n = cfg.ris_count();
    if m % cfg.rf_chains != 0 {
        return Err(Error::Parameter(format!(
            "M ({m}) must be divisible by N_RF ({})",
            cfg.rf_chains
        )));
    }
    let m_rf = cfg.m_rf();
    let phi_m = dft_matrix(m, m)?;
    let phi_n = dft_matrix(n, blocks_col)?;
    let mut subframes = Vec::with_capacity(m_rf * blocks_col);
    for b in 0..blocks_col {
        let reflection = unit_modulus(&phi_n.column(b).into_owned());
        for i in 0..m_rf {
            subframes.push(Subframe {
                combiner: phi_m.columns(i * cfg.rf_chains, cfg.rf_chains).into_owned(),
                reflection: reflection.clone(),
            });
        }
    }
    Ok(subframes)
}

/// Second-part subframes. Within block `b`, subframe `i` uses combiner
/// `Phi_[M,N_RF*B_r](:, [N_RF(b-1)+1 : N_RF*b])` and reflection vector
/// `Phi_[N,N](:, i)` rescaled to unit modulus.
pub fn schedule_second_phase(cfg: &SystemConfig, blocks_row: usize) -> Result<Vec<Subframe>> {
    if blocks_row == 0 {
        return Err(Error::Parameter("B_r must be at least 1".into()));
    }
    let m = cfg.bs_count();
    let n = cfg.ris_count();
    let width = cfg.rf_chains * blocks_row;
    if width > m {
        return Err(Error::Parameter(format!(
            "N_RF * B_r ({width}) must not exceed M ({m})"
        )));
    }
    let phi_m = dft_matrix(m, width)?;
    let phi_n = dft_matrix(n, n)?;
    let mut subframes = Vec::with_capacity(n * blocks_row);
    for b in 0..blocks_row {
        let combiner = phi_m.columns(b * cfg.rf_chains, cfg.rf_chains).into_owned();
        for i in 0..n {
            subframes.push(Subframe {
                combiner: combiner.clone(),
                reflection: unit_modulus(&phi_n.column(i).into_owned()),
            });
        }
    }
    Ok(subframes)
}

/// Simulates one subframe and returns the per-user processed observations
/// `Z_[j,k] = Y_j X_[j,k]^H / (P*T)`, each N_RF x L.
///
/// The received block `Y_j = C_j^H (sum_k F diag(v_j) H_k X_[j,k] + U_j)` is
/// formed in full, with `U_j` drawn i.i.d. complex Gaussian of variance
/// sigma^2, so noise reaches the observations exactly along the physical
/// path.
pub fn simulate_subframe<R: Rng + ?Sized>(
    real: &ChannelRealization,
    subframe: &Subframe,
    pilots: &[CMatrix],
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    let m = cfg.bs_count();
    let n = cfg.ris_count();
    if real.bs_ris.shape() != (m, n) {
        return Err(Error::Dimension(format!(
            "realization F is {:?}, config expects ({m}, {n})",
            real.bs_ris.shape()
        )));
    }
    if pilots.len() != cfg.users || real.ris_user.len() != cfg.users {
        return Err(Error::Dimension("user count mismatch".into()));
    }
    let t = pilots[0].ncols();
    let power = cfg.transmit_power;
    let pt = power * t as f64;

    // F diag(v): scale the columns of F by the reflection coefficients.
    let mut f_v = real.bs_ris.clone();
    for col in 0..n {
        let s = subframe.reflection[col];
        f_v.column_mut(col).iter_mut().for_each(|z| *z *= s);
    }

    let mut received = complex_gaussian(rng, m, t, cfg.noise_variance)?;
    for (h_k, x_k) in real.ris_user.iter().zip(pilots.iter()) {
        received += &f_v * h_k * x_k;
    }
    let y = subframe.combiner.adjoint() * received;

    Ok(pilots
        .iter()
        .map(|x_k| (&y * x_k.adjoint()).unscale(pt))
        .collect())
}

/// Simulates every subframe of the schedule in order and assembles the
/// observation set.
pub fn simulate_protocol<R: Rng + ?Sized>(
    real: &ChannelRealization,
    schedule: &ProtocolSchedule,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ObservationSet> {
    let mut first = Vec::with_capacity(schedule.first.len());
    for sf in &schedule.first {
        first.push(simulate_subframe(real, sf, &schedule.pilots, cfg, rng)?);
    }
    let mut second = Vec::with_capacity(schedule.second.len());
    for sf in &schedule.second {
        second.push(simulate_subframe(real, sf, &schedule.pilots, cfg, rng)?);
    }
    let m_col = assemble_col_observations(&first, cfg, schedule.blocks_col)?;
    let m_row = assemble_row_observations(&second, cfg, schedule.blocks_row)?;
    let sample_count = m_col.ncols();
    Ok(ObservationSet {
        m_col,
        m_row,
        sample_count,
    })
}

/// Builds `M_col` from the first-part observations: per block, the `M_RF`
/// per-subframe observations are stacked vertically and re-mixed by
/// `Phi_[M,M]` (undoing the combiner partition); blocks are concatenated
/// horizontally into an M x (B_c * K * L) matrix.
pub fn assemble_col_observations(
    first_part: &[Vec<CMatrix>],
    cfg: &SystemConfig,
    blocks_col: usize,
) -> Result<CMatrix> {
    let m = cfg.bs_count();
    let m_rf = cfg.m_rf();
    if first_part.len() != m_rf * blocks_col {
        return Err(Error::Dimension(format!(
            "expected {} first-part subframes ({} blocks of {}), got {}",
            m_rf * blocks_col,
            blocks_col,
            m_rf,
            first_part.len()
        )));
    }
    let phi_m = dft_matrix(m, m)?;
    let kl = cfg.users * cfg.user_count();
    let mut blocks = Vec::with_capacity(blocks_col);
    for b in 0..blocks_col {
        let mut stacked = CMatrix::zeros(m, kl);
        for i in 0..m_rf {
            let z = stack_columns(&first_part[b * m_rf + i]);
            if z.shape() != (cfg.rf_chains, kl) {
                return Err(Error::Dimension(format!(
                    "subframe observation is {:?}, expected ({}, {kl})",
                    z.shape(),
                    cfg.rf_chains
                )));
            }
            stacked
                .view_mut((i * cfg.rf_chains, 0), (cfg.rf_chains, kl))
                .copy_from(&z);
        }
        blocks.push(&phi_m * stacked);
    }
    Ok(stack_columns(&blocks))
}

/// Builds the per-(user, antenna) row-sampled observations from the
/// second-part observations. For each (k, l), the N per-subframe columns of a
/// block form an N_RF x N matrix that is unmixed by `Phi_[N,N]^H` (and the
/// unit-modulus reflection scaling `sqrt(N)` divided back out); the B_r
/// blocks are stacked vertically.
pub fn assemble_row_observations(
    second_part: &[Vec<CMatrix>],
    cfg: &SystemConfig,
    blocks_row: usize,
) -> Result<Vec<CMatrix>> {
    let n = cfg.ris_count();
    if second_part.len() != n * blocks_row {
        return Err(Error::Dimension(format!(
            "expected {} second-part subframes ({} blocks of {}), got {}",
            n * blocks_row,
            blocks_row,
            n,
            second_part.len()
        )));
    }
    let l = cfg.user_count();
    let n_rf = cfg.rf_chains;
    let phi_n = dft_matrix(n, n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(cfg.users * l);
    for k in 0..cfg.users {
        for ell in 0..l {
            let mut rows = CMatrix::zeros(n_rf * blocks_row, n);
            for b in 0..blocks_row {
                let mut gathered = CMatrix::zeros(n_rf, n);
                for i in 0..n {
                    let z = &second_part[b * n + i][k];
                    gathered.column_mut(i).copy_from(&z.column(ell));
                }
                let unmixed = (gathered * phi_n.adjoint()).scale(scale);
                rows.view_mut((b * n_rf, 0), (n_rf, n)).copy_from(&unmixed);
            }
            out.push(rows);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ArrayGeometry, GainModel, Regime, RegimePolicy};
    use crate::numerics::numerical_rank;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn desk(noise: f64) -> SystemConfig {
        SystemConfig {
            noise_variance: noise,
            ..SystemConfig::desk_default()
        }
    }

    fn tiny(noise: f64) -> SystemConfig {
        SystemConfig {
            bs_antennas: ArrayGeometry::new(4, 2),
            ris_elements: ArrayGeometry::new(4, 2),
            user_antennas: ArrayGeometry::new(2, 1),
            users: 2,
            rf_chains: 4,
            paths_bs_ris: 2,
            paths_ris_user: 2,
            noise_variance: noise,
            ..SystemConfig::desk_default()
        }
    }

    #[test]
    fn pilots_scalar_case() {
        let pilots = build_pilots(1, 1, 1, 4.0).unwrap();
        assert_eq!(pilots.len(), 1);
        assert_eq!(pilots[0].shape(), (1, 1));
        assert!((pilots[0][(0, 0)].norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pilots_orthogonal_rows() {
        let p = 1.7;
        let (k, l, t) = (2, 2, 4);
        let pilots = build_pilots(k, l, t, p).unwrap();
        for (ki, xi) in pilots.iter().enumerate() {
            let gram = xi * xi.adjoint();
            let want = CMatrix::identity(l, l) * Complex64::new(p * t as f64, 0.0);
            assert!((gram - want).norm() < 1e-10, "user {ki} self-gram");
            for (kj, xj) in pilots.iter().enumerate() {
                if ki != kj {
                    assert!((xi * xj.adjoint()).norm() < 1e-10, "cross {ki},{kj}");
                }
            }
        }
    }

    #[test]
    fn pilots_full_stack_gram() {
        let p = 0.5;
        let (k, l, t) = (3, 2, 8);
        let pilots = build_pilots(k, l, t, p).unwrap();
        let stack = stack_columns(&pilots.iter().map(|x| x.transpose()).collect::<Vec<_>>())
            .transpose();
        let gram = &stack * stack.adjoint();
        let want = CMatrix::identity(k * l, k * l) * Complex64::new(p * t as f64, 0.0);
        assert!((gram - want).norm() < 1e-10);
    }

    #[test]
    fn pilots_reject_short_sequences() {
        assert!(matches!(
            build_pilots(2, 2, 3, 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn first_phase_combiners_partition_dft() {
        let cfg = desk(0.0);
        let subframes = schedule_first_phase(&cfg, 2).unwrap();
        assert_eq!(subframes.len(), cfg.m_rf() * 2);
        let phi_m = dft_matrix(cfg.bs_count(), cfg.bs_count()).unwrap();
        for b in 0..2 {
            let cols: Vec<CMatrix> = (0..cfg.m_rf())
                .map(|i| subframes[b * cfg.m_rf() + i].combiner.clone())
                .collect();
            let stacked = stack_columns(&cols);
            assert!((stacked - &phi_m).norm() < 1e-12, "block {b}");
        }
    }

    #[test]
    fn first_phase_single_block_shares_reflection() {
        let cfg = desk(0.0);
        let subframes = schedule_first_phase(&cfg, 1).unwrap();
        let v0 = &subframes[0].reflection;
        for sf in &subframes {
            assert!((sf.reflection.clone() - v0).norm() < 1e-14);
        }
    }

    #[test]
    fn first_phase_subframe_count() {
        let cfg = SystemConfig {
            bs_antennas: ArrayGeometry::new(4, 2),
            rf_chains: 4,
            ..SystemConfig::desk_default()
        };
        // M = 8, N_RF = 4 -> M_RF = 2; B_c = 2 -> 4 subframes.
        assert_eq!(schedule_first_phase(&cfg, 2).unwrap().len(), 4);
    }

    #[test]
    fn second_phase_counts_and_combiner_width() {
        let cfg = tiny(0.0);
        let n = cfg.ris_count();
        let one = schedule_second_phase(&cfg, 1).unwrap();
        assert_eq!(one.len(), n);
        let two = schedule_second_phase(&cfg, 2).unwrap();
        assert_eq!(two.len(), 2 * n);
        let phi = dft_matrix(cfg.bs_count(), 2 * cfg.rf_chains).unwrap();
        assert!(
            (two[n].combiner.clone() - phi.columns(cfg.rf_chains, cfg.rf_chains)).norm() < 1e-12
        );
    }

    #[test]
    fn reflections_have_unit_modulus() {
        let cfg = desk(0.0);
        for sf in schedule_first_phase(&cfg, 3)
            .unwrap()
            .iter()
            .chain(schedule_second_phase(&cfg, 1).unwrap().iter())
        {
            for v in sf.reflection.iter() {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_phase_reflections_form_scaled_unitary() {
        let cfg = tiny(0.0);
        let n = cfg.ris_count();
        let subframes = schedule_second_phase(&cfg, 1).unwrap();
        let v = stack_columns(
            &subframes
                .iter()
                .map(|sf| CMatrix::from_column_slice(n, 1, sf.reflection.as_slice()))
                .collect::<Vec<_>>(),
        );
        let gram = &v * v.adjoint();
        let want = CMatrix::identity(n, n) * Complex64::new(n as f64, 0.0);
        assert!((gram - want).norm() < 1e-10);
    }

    #[test]
    fn noiseless_subframe_matches_direct_product() {
        let cfg = tiny(0.0);
        let real = ChannelRealization::draw(&mut rng(1), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 2, 1).unwrap();
        let sf = &schedule.first[0];
        let zs = simulate_subframe(&real, sf, &schedule.pilots, &cfg, &mut rng(2)).unwrap();
        assert_eq!(zs.len(), cfg.users);
        for (k, z) in zs.iter().enumerate() {
            assert_eq!(z.shape(), (cfg.rf_chains, cfg.user_count()));
            let mut f_v = real.bs_ris.clone();
            for col in 0..cfg.ris_count() {
                let s = sf.reflection[col];
                f_v.column_mut(col).iter_mut().for_each(|x| *x *= s);
            }
            let direct = sf.combiner.adjoint() * f_v * &real.ris_user[k];
            assert!(
                (z.clone() - &direct).norm() <= 1e-12 * direct.norm(),
                "user {k}"
            );
        }
    }

    #[test]
    fn orthogonal_pilots_isolate_users() {
        let cfg = tiny(0.0);
        let real_a = ChannelRealization::draw(&mut rng(5), &cfg).unwrap();
        let mut real_b = real_a.clone();
        // Change only user 2's channel.
        real_b.ris_user[1] = real_a.ris_user[1].clone() * Complex64::new(3.0, -1.0);
        let schedule = ProtocolSchedule::build(&cfg, 1, 1).unwrap();
        let sf = &schedule.second[3];
        let za = simulate_subframe(&real_a, sf, &schedule.pilots, &cfg, &mut rng(6)).unwrap();
        let zb = simulate_subframe(&real_b, sf, &schedule.pilots, &cfg, &mut rng(6)).unwrap();
        assert!((za[0].clone() - &zb[0]).norm() < 1e-10);
        assert!((za[1].clone() - &zb[1]).norm() > 1e-3);
    }

    #[test]
    fn effective_noise_variance_propagates() {
        // With F = 0 the observation is pure processed noise whose entries
        // must have variance sigma^2 / (P*T).
        let mut cfg = tiny(2.0);
        cfg.transmit_power = 1.6;
        let mut real = ChannelRealization::draw(&mut rng(7), &cfg).unwrap();
        real.bs_ris.fill(Complex64::ZERO);
        let schedule = ProtocolSchedule::build(&cfg, 1, 1).unwrap();
        let mut r = rng(8);
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 10_000 {
            let zs = simulate_subframe(&real, &schedule.first[0], &schedule.pilots, &cfg, &mut r)
                .unwrap();
            for z in &zs {
                acc += z.iter().map(|v| v.norm_sqr()).sum::<f64>();
                count += z.len();
            }
        }
        let t = schedule.pilot_len as f64;
        let want = cfg.noise_variance / (cfg.transmit_power * t);
        let got = acc / count as f64;
        assert!((got - want).abs() < 0.05 * want, "variance {got} vs {want}");
    }

    #[test]
    fn schedule_overhead_accounting() {
        let cfg = desk(0.0);
        for (bc, br) in [(1, 1), (4, 1), (6, 2)] {
            let schedule = ProtocolSchedule::build(&cfg, bc, br).unwrap();
            assert_eq!(
                schedule.total_subframes(),
                cfg.m_rf() * bc + cfg.ris_count() * br
            );
        }
    }

    #[test]
    fn m_col_spans_f_column_space_noiselessly() {
        let cfg = desk(0.0);
        let real = ChannelRealization::draw(&mut rng(10), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 6, 1).unwrap();
        let obs = simulate_protocol(&real, &schedule, &cfg, &mut rng(11)).unwrap();
        assert_eq!(obs.m_col.shape(), (32, 6 * cfg.users * cfg.user_count()));
        // Projection residual onto the true column space of F.
        let svd = real.bs_ris.clone().svd(true, false);
        let u = svd.u.unwrap();
        let rank = numerical_rank(&real.bs_ris, 1e-10);
        let s = u.columns(0, rank).into_owned();
        let residual = (&obs.m_col - &s * (s.adjoint() * &obs.m_col)).norm();
        assert!(residual < 1e-8 * obs.m_col.norm(), "residual {residual}");
        assert_eq!(numerical_rank(&obs.m_col, 1e-10), rank);
    }

    #[test]
    fn m_col_matches_dense_oracle() {
        // Noiseless M_col block b equals F * diag(v_b) * H with the actual
        // unit-modulus reflection vector of that block.
        let cfg = tiny(0.0);
        let real = ChannelRealization::draw(&mut rng(14), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 2, 1).unwrap();
        let obs = simulate_protocol(&real, &schedule, &cfg, &mut rng(15)).unwrap();
        let h = stack_columns(&real.ris_user);
        let kl = cfg.users * cfg.user_count();
        for b in 0..2 {
            let v = &schedule.first[b * cfg.m_rf()].reflection;
            let mut q = h.clone();
            for row in 0..cfg.ris_count() {
                let s = v[row];
                q.row_mut(row).iter_mut().for_each(|x| *x *= s);
            }
            let want = &real.bs_ris * q;
            let got = obs.m_col.columns(b * kl, kl).into_owned();
            assert!((got - &want).norm() <= 1e-10 * want.norm(), "block {b}");
        }
    }

    #[test]
    fn m_col_single_user_single_antenna_shape() {
        let cfg = SystemConfig {
            users: 1,
            user_antennas: ArrayGeometry::new(1, 1),
            ..tiny(0.0)
        };
        let real = ChannelRealization::draw(&mut rng(12), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 1, 1).unwrap();
        let obs = simulate_protocol(&real, &schedule, &cfg, &mut rng(13)).unwrap();
        assert_eq!(obs.m_col.shape(), (cfg.bs_count(), 1));
    }

    #[test]
    fn m_row_matches_projected_effective_channel() {
        let cfg = desk(0.0);
        let real = ChannelRealization::draw(&mut rng(20), &cfg).unwrap();
        for br in [1, 2] {
            let schedule = ProtocolSchedule::build(&cfg, 1, br).unwrap();
            let obs = simulate_protocol(&real, &schedule, &cfg, &mut rng(21)).unwrap();
            let phi = dft_matrix(cfg.bs_count(), cfg.rf_chains * br).unwrap();
            for k in 0..cfg.users {
                for l in 0..cfg.user_count() {
                    let got = obs.m_row_at(k, l, cfg.user_count());
                    assert_eq!(got.shape(), (cfg.rf_chains * br, cfg.ris_count()));
                    let want = phi.adjoint() * &real.h_eff[k][l];
                    assert!(
                        (got.clone() - &want).norm() < 1e-10 * want.norm().max(1.0),
                        "B_r={br} k={k} l={l}"
                    );
                }
            }
        }
    }

    #[test]
    fn assemble_rejects_missing_subframes() {
        let cfg = tiny(0.0);
        let real = ChannelRealization::draw(&mut rng(30), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 2, 1).unwrap();
        let mut first = Vec::new();
        for sf in &schedule.first {
            first.push(simulate_subframe(&real, sf, &schedule.pilots, &cfg, &mut rng(31)).unwrap());
        }
        first.pop();
        assert!(matches!(
            assemble_col_observations(&first, &cfg, 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            assemble_row_observations(&first, &cfg, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn protocol_deterministic_under_seed() {
        let cfg = desk(1.0);
        let real = ChannelRealization::draw(&mut rng(40), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 2, 1).unwrap();
        let a = simulate_protocol(&real, &schedule, &cfg, &mut rng(41)).unwrap();
        let b = simulate_protocol(&real, &schedule, &cfg, &mut rng(41)).unwrap();
        assert_eq!(a.m_col, b.m_col);
        assert_eq!(a.m_row, b.m_row);
    }

    #[test]
    fn forced_far_category_still_assembles() {
        let mut cfg = tiny(0.0);
        cfg.regime_policy = RegimePolicy::forced(Regime::Far, Regime::Far);
        cfg.gain_model = GainModel::SyntheticPowerlaw;
        let real = ChannelRealization::draw(&mut rng(50), &cfg).unwrap();
        let schedule = ProtocolSchedule::build(&cfg, 2, 1).unwrap();
        let obs = simulate_protocol(&real, &schedule, &cfg, &mut rng(51)).unwrap();
        assert_eq!(obs.sample_count, 2 * cfg.users * cfg.user_count());
    }
}
