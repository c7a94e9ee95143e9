//! Collaborative low-rank channel estimators.
//!
//! Both estimators share a first part: the covariance of `M_col` is
//! eigendecomposed, the common column-space dimension is selected by the
//! minimum-description-length criterion, and per-(user, antenna) coefficient
//! matrices are recovered by least squares against the row-sampled
//! observations. `clra_ls` stops there. `clra_jo` then exploits the fact that
//! every effective channel is a diagonal rescaling of the reference channel:
//! it alternates closed-form updates of the per-(user, antenna) diagonal
//! scalings and of the shared coefficient matrix, which can only lower the
//! joint fitting objective.

use num_complex::Complex64;

use crate::channel::{stack_columns, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    dft_matrix, hermitian_eig_desc, numerical_rank, pseudo_inverse, CMatrix, CVector,
    DEFAULT_PINV_REL_TOL,
};
use crate::protocol::ObservationSet;

/// Eigenvalues smaller than this are floored before taking logarithms in the
/// rank-selection objective; noiseless runs produce exact zeros.
const MDL_EIGENVALUE_FLOOR: f64 = 1e-300;

/// Which estimator produced an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    ClraJo,
    ClraLs,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::ClraJo => "clra_jo",
            EstimatorKind::ClraLs => "clra_ls",
        }
    }
}

/// Result of the model-order selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MdlSelection {
    pub rank: usize,
    /// Set when every eigenvalue was zero and the selection fell back to 1.
    pub degenerate: bool,
}

/// Everything an estimator run produces.
#[derive(Debug, Clone)]
pub struct EstimatorOutput {
    /// Selected column-space dimension.
    pub rank_hat: usize,
    /// Set when the selected rank had to be clamped to `N_RF * B_r` to keep
    /// the least-squares step solvable.
    pub rank_clamped: bool,
    /// Set when rank selection saw an all-zero spectrum.
    pub mdl_degenerate: bool,
    /// Orthonormal column-space basis, M x rank_hat.
    pub s_hat: CMatrix,
    /// Shared coefficient matrix (reference user/antenna), rank_hat x N.
    pub t_hat: CMatrix,
    /// Diagonal scalings as length-N vectors, indexed `k * L + l`; the
    /// reference entry is identically all-ones.
    pub d_hat: Vec<CVector>,
    /// Reconstructed effective channels indexed `[k][l]`, each M x N.
    pub h_eff_hat: Vec<Vec<CMatrix>>,
    /// Joint objective before iterating and after each iteration
    /// (`t_max + 1` entries); non-increasing.
    pub loss_trajectory: Vec<f64>,
    /// Columns of the running coefficient matrix that had zero norm during
    /// diagonal updates (their scalings were set to zero).
    pub degenerate_columns: usize,
}

impl EstimatorOutput {
    /// The M x (N*L) horizontal stack of user k's reconstructed cascades.
    pub fn h_eff_stacked(&self, k: usize) -> CMatrix {
        stack_columns(&self.h_eff_hat[k])
    }
}

/// Complex-multiplication counts of the estimator stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ComplexityReport {
    pub delta_ls: u64,
    pub delta_d: u64,
    pub delta_t: u64,
    pub total: u64,
}

/// Selects the number of dominant eigenvalues by minimum description length:
/// the argmin over `n in [1, M-1]` of
/// `-(M-n) * S * log(geomean / mean)` of the trailing eigenvalues plus the
/// penalty `n(2M-n)/2 * log(S)`. Ties break toward the smallest `n`.
pub fn mdl_rank(eigvals: &[f64], sample_count: usize, m: usize) -> Result<MdlSelection> {
    if eigvals.len() != m {
        return Err(Error::Dimension(format!(
            "mdl_rank: expected {m} eigenvalues, got {}",
            eigvals.len()
        )));
    }
    if sample_count < 2 {
        return Err(Error::Parameter(format!(
            "mdl_rank: sample_count must be at least 2, got {sample_count}"
        )));
    }
    if eigvals
        .windows(2)
        .any(|w| w[1] > w[0] + 1e-9 * w[0].abs().max(1e-300))
    {
        return Err(Error::Parameter(
            "mdl_rank: eigenvalues must be sorted in non-increasing order".into(),
        ));
    }
    if eigvals.iter().all(|&v| v <= 0.0) {
        return Ok(MdlSelection {
            rank: 1,
            degenerate: true,
        });
    }
    if m == 1 {
        return Ok(MdlSelection {
            rank: 1,
            degenerate: false,
        });
    }

    let s = sample_count as f64;
    // Eigenvalues below 1e-10 * lambda_max are numerically zero; mapping them
    // all to the same floor keeps the geometric/arithmetic-mean ratio of an
    // all-zero tail at 1 (noiseless runs would otherwise leave the trailing
    // eigenvalues scattered across hundreds of orders of magnitude).
    let zero_cutoff = 1e-10 * eigvals[0];
    let floored: Vec<f64> = eigvals
        .iter()
        .map(|&v| {
            if v < zero_cutoff {
                MDL_EIGENVALUE_FLOOR
            } else {
                v.max(MDL_EIGENVALUE_FLOOR)
            }
        })
        .collect();
    let mut best_n = 1;
    let mut best_obj = f64::INFINITY;
    for n in 1..m {
        let tail = &floored[n..];
        let count = tail.len() as f64;
        let log_geo = tail.iter().map(|v| v.ln()).sum::<f64>() / count;
        let mean = tail.iter().sum::<f64>() / count;
        let likelihood = -(count * s) * (log_geo - mean.ln());
        let penalty = 0.5 * (n * (2 * m - n)) as f64 * s.ln();
        let obj = likelihood + penalty;
        if obj < best_obj {
            best_obj = obj;
            best_n = n;
        }
    }
    Ok(MdlSelection {
        rank: best_n,
        degenerate: false,
    })
}

/// Leading `rank_hat` eigenvectors of `M_col * M_col^H`: the closest
/// rank-constrained column space in Frobenius distance.
pub fn estimate_column_space(m_col: &CMatrix, rank_hat: usize) -> Result<CMatrix> {
    if rank_hat == 0 || rank_hat > m_col.nrows() {
        return Err(Error::Parameter(format!(
            "estimate_column_space: rank {rank_hat} out of range 1..={}",
            m_col.nrows()
        )));
    }
    let cov = m_col * m_col.adjoint();
    let eig = hermitian_eig_desc(&cov)?;
    Ok(eig.vectors.columns(0, rank_hat).into_owned())
}

/// The mixing matrix `P = Phi_[M, N_RF*B_r]^H * S_hat` through which the
/// row-sampled observations see the coefficient matrices.
pub fn ls_projection(s_hat: &CMatrix, blocks_row: usize, cfg: &SystemConfig) -> Result<CMatrix> {
    let rank = s_hat.ncols();
    let width = cfg.rf_chains * blocks_row;
    if width < rank {
        return Err(Error::RankDeficient(format!(
            "N_RF * B_r ({width}) is below the selected rank ({rank}); increase B_r"
        )));
    }
    let phi = dft_matrix(cfg.bs_count(), width)?;
    let p = phi.adjoint() * s_hat;
    if numerical_rank(&p, 1e-10) < rank {
        return Err(Error::RankDeficient(format!(
            "projection of the column-space basis onto the {width} combiner rows is rank-deficient; increase B_r"
        )));
    }
    Ok(p)
}

/// Individual least-squares coefficients for one (user, antenna) pair:
/// `T_LS = P^+ * M_row`, shape rank_hat x N.
pub fn ls_coefficients(
    s_hat: &CMatrix,
    m_row: &CMatrix,
    blocks_row: usize,
    cfg: &SystemConfig,
) -> Result<CMatrix> {
    let p = ls_projection(s_hat, blocks_row, cfg)?;
    if m_row.nrows() != p.nrows() {
        return Err(Error::Dimension(format!(
            "M_row has {} rows, expected N_RF * B_r = {}",
            m_row.nrows(),
            p.nrows()
        )));
    }
    Ok(pseudo_inverse(&p, DEFAULT_PINV_REL_TOL)? * m_row)
}

/// Outcome of one diagonal update.
#[derive(Debug, Clone)]
pub struct DiagonalUpdate {
    pub scales: CVector,
    /// Columns of `t_prev` with zero norm; their scales were set to zero.
    pub degenerate_columns: usize,
}

/// Closed-form minimizer of `||T_ls - T_prev * diag(d)||_F^2` over `d`: per
/// column, `d_n = <T_prev(:,n), T_ls(:,n)> / ||T_prev(:,n)||^2`.
///
/// # Panics
/// Panics if the two matrices have different shapes.
pub fn update_diagonal(t_prev: &CMatrix, t_ls: &CMatrix) -> DiagonalUpdate {
    assert_eq!(
        t_prev.shape(),
        t_ls.shape(),
        "update_diagonal: shape mismatch"
    );
    let n = t_prev.ncols();
    let mut scales = CVector::zeros(n);
    let mut degenerate = 0;
    for j in 0..n {
        let denom: f64 = t_prev.column(j).norm_squared();
        if denom > 0.0 {
            let inner = (t_prev.column(j).adjoint() * t_ls.column(j))[(0, 0)];
            scales[j] = inner / denom;
        } else {
            degenerate += 1;
        }
    }
    DiagonalUpdate {
        scales,
        degenerate_columns: degenerate,
    }
}

/// Closed-form minimizer of `sum_i ||T_ls[i] - T * diag(d_i)||_F^2` over `T`:
/// `T = (sum_i T_ls[i] diag(d_i)^H) * (sum_i diag(d_i) diag(d_i)^H)^-1`, the
/// inverse being entrywise on a positive diagonal (the all-ones reference
/// scaling puts at least 1 on every entry).
///
/// # Panics
/// Panics on empty input or mismatched shapes.
pub fn update_coefficient(t_ls_list: &[CMatrix], d_list: &[CVector]) -> CMatrix {
    assert!(!t_ls_list.is_empty(), "update_coefficient: empty input");
    assert_eq!(t_ls_list.len(), d_list.len());
    let (rank, n) = t_ls_list[0].shape();
    let mut numerator = CMatrix::zeros(rank, n);
    let mut denominator = vec![0.0f64; n];
    for (t_ls, d) in t_ls_list.iter().zip(d_list.iter()) {
        assert_eq!(t_ls.shape(), (rank, n));
        assert_eq!(d.len(), n);
        for j in 0..n {
            let dj = d[j];
            let conj = dj.conj();
            for i in 0..rank {
                numerator[(i, j)] += t_ls[(i, j)] * conj;
            }
            denominator[j] += dj.norm_sqr();
        }
    }
    for j in 0..n {
        let inv = 1.0 / denominator[j];
        numerator.column_mut(j).iter_mut().for_each(|v| *v *= inv);
    }
    numerator
}

/// The joint fitting objective `sum_i ||T_ls[i] - T * diag(d_i)||_F^2`.
pub fn joint_loss(t: &CMatrix, d_list: &[CVector], t_ls_list: &[CMatrix]) -> f64 {
    t_ls_list
        .iter()
        .zip(d_list.iter())
        .map(|(t_ls, d)| {
            let mut acc = 0.0;
            for j in 0..t.ncols() {
                let dj = d[j];
                for i in 0..t.nrows() {
                    acc += (t_ls[(i, j)] - t[(i, j)] * dj).norm_sqr();
                }
            }
            acc
        })
        .sum()
}

/// Rank selection plus the orthonormal column-space basis, the reusable part
/// of an estimate: under the two-phase protocol it is computed in the first
/// coherence slot of a window and kept for all later slots.
#[derive(Debug, Clone)]
pub struct ColumnSpaceEstimate {
    pub rank: usize,
    pub rank_clamped: bool,
    pub mdl_degenerate: bool,
    /// M x rank orthonormal basis.
    pub s_hat: CMatrix,
}

/// Eigendecomposes the covariance of `M_col`, selects the rank by MDL, and
/// returns the leading eigenvectors. The rank is clamped to `N_RF * B_r`
/// (and the clamp reported) so the later least-squares stage stays solvable.
pub fn estimate_basis(
    obs: &ObservationSet,
    cfg: &SystemConfig,
    blocks_row: usize,
) -> Result<ColumnSpaceEstimate> {
    let m = cfg.bs_count();
    let cov = &obs.m_col * obs.m_col.adjoint();
    let eig = hermitian_eig_desc(&cov)?;
    let selection = mdl_rank(&eig.values, obs.sample_count, m)?;

    let max_rank = cfg.rf_chains * blocks_row;
    let (rank, rank_clamped) = if selection.rank > max_rank {
        (max_rank, true)
    } else {
        (selection.rank, false)
    };
    Ok(ColumnSpaceEstimate {
        rank,
        rank_clamped,
        mdl_degenerate: selection.degenerate,
        s_hat: eig.vectors.columns(0, rank).into_owned(),
    })
}

/// Per-(user, antenna) LS coefficients against a fixed basis.
fn ls_all(
    basis: &ColumnSpaceEstimate,
    m_row: &[CMatrix],
    cfg: &SystemConfig,
    blocks_row: usize,
) -> Result<Vec<CMatrix>> {
    let p = ls_projection(&basis.s_hat, blocks_row, cfg)?;
    let p_pinv = pseudo_inverse(&p, DEFAULT_PINV_REL_TOL)?;
    let expected = cfg.users * cfg.user_count();
    if m_row.len() != expected {
        return Err(Error::Dimension(format!(
            "observation set has {} row samples, expected K*L = {expected}",
            m_row.len()
        )));
    }
    let mut t_ls = Vec::with_capacity(expected);
    for m in m_row {
        if m.nrows() != p.nrows() {
            return Err(Error::Dimension(format!(
                "M_row has {} rows, expected N_RF * B_r = {}",
                m.nrows(),
                p.nrows()
            )));
        }
        t_ls.push(&p_pinv * m);
    }
    Ok(t_ls)
}

fn reconstruct(s_hat: &CMatrix, t: &CMatrix, d: &CVector) -> CMatrix {
    let mut scaled = t.clone();
    for j in 0..t.ncols() {
        let s = d[j];
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    s_hat * scaled
}

/// Joint estimator against an already estimated basis: computes the LS
/// coefficients, alternates the diagonal and coefficient updates for `t_max`
/// iterations (the reference scaling held at the identity), and reconstructs
/// every cascade from the shared basis. With `t_max = 0` no iteration runs
/// and the reconstruction falls back to the per-(user, antenna) LS
/// coefficients.
pub fn clra_jo_with_basis(
    basis: &ColumnSpaceEstimate,
    m_row: &[CMatrix],
    cfg: &SystemConfig,
    blocks_row: usize,
    t_max: usize,
) -> Result<EstimatorOutput> {
    let t_ls = ls_all(basis, m_row, cfg, blocks_row)?;
    let count = t_ls.len();
    let n = cfg.ris_count();
    let ones = CVector::from_element(n, Complex64::new(1.0, 0.0));

    let mut t_hat = t_ls[0].clone();
    let mut d_hat = vec![ones.clone(); count];
    let mut degenerate_columns = 0;
    let mut loss_trajectory = Vec::with_capacity(t_max + 1);
    loss_trajectory.push(joint_loss(&t_hat, &d_hat, &t_ls));

    for _ in 0..t_max {
        for (idx, d) in d_hat.iter_mut().enumerate() {
            if idx == 0 {
                continue; // reference scaling stays at the identity
            }
            let update = update_diagonal(&t_hat, &t_ls[idx]);
            degenerate_columns += update.degenerate_columns;
            *d = update.scales;
        }
        t_hat = update_coefficient(&t_ls, &d_hat);
        loss_trajectory.push(joint_loss(&t_hat, &d_hat, &t_ls));
    }

    let ls_reconstruction = t_max == 0;
    let l = cfg.user_count();
    let h_eff_hat = (0..cfg.users)
        .map(|k| {
            (0..l)
                .map(|ell| {
                    let idx = k * l + ell;
                    if ls_reconstruction {
                        &basis.s_hat * &t_ls[idx]
                    } else {
                        reconstruct(&basis.s_hat, &t_hat, &d_hat[idx])
                    }
                })
                .collect()
        })
        .collect();
    Ok(EstimatorOutput {
        rank_hat: basis.rank,
        rank_clamped: basis.rank_clamped,
        mdl_degenerate: basis.mdl_degenerate,
        s_hat: basis.s_hat.clone(),
        t_hat,
        d_hat,
        h_eff_hat,
        loss_trajectory,
        degenerate_columns,
    })
}

/// Joint estimator: basis estimation from `M_col` followed by
/// [`clra_jo_with_basis`] on the row-sampled observations.
pub fn clra_jo(
    obs: &ObservationSet,
    cfg: &SystemConfig,
    blocks_row: usize,
    t_max: usize,
) -> Result<EstimatorOutput> {
    let basis = estimate_basis(obs, cfg, blocks_row)?;
    clra_jo_with_basis(&basis, &obs.m_row, cfg, blocks_row, t_max)
}

/// Ablation estimator: reconstructs every cascade directly from its own LS
/// coefficients, skipping the joint optimization.
pub fn clra_ls(
    obs: &ObservationSet,
    cfg: &SystemConfig,
    blocks_row: usize,
) -> Result<EstimatorOutput> {
    clra_jo(obs, cfg, blocks_row, 0)
}

/// Complex-multiplication counts of the LS, diagonal-update, and
/// coefficient-update stages, and the overall total
/// `M^3 + delta_ls + t_max * (delta_d + delta_t)`.
pub fn complexity_estimate(
    m: usize,
    n: usize,
    users: usize,
    l: usize,
    rank_hat: usize,
    t_max: usize,
) -> ComplexityReport {
    let (m, n, users, l, rank, t_max) = (
        m as u64,
        n as u64,
        users as u64,
        l as u64,
        rank_hat as u64,
        t_max as u64,
    );
    let kl = users * l;
    let delta_ls = n * rank * rank * kl;
    let delta_d = n * (3 * rank + 1) * kl;
    let delta_t = n * (rank + 2) * kl;
    ComplexityReport {
        delta_ls,
        delta_d,
        delta_t,
        total: m * m * m + delta_ls + t_max * (delta_d + delta_t),
    }
}
