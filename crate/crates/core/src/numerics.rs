//! Deterministic complex-matrix kernels shared by every other module.
//!
//! All operations are pure functions of their inputs; randomness enters only
//! through an explicitly passed generator. Matrices are dense
//! [`nalgebra::DMatrix`] over `Complex<f64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff used by [`pseudo_inverse`] when the caller
/// has no reason to override it.
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-12;

/// Eigenvalues (real, sorted non-increasing) with the matching eigenvector
/// columns of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// First `cols` columns of the `rows x rows` unitary DFT matrix.
///
/// Columns are orthonormal: the Gram matrix is the identity to machine
/// precision.
pub fn dft_matrix(rows: usize, cols: usize) -> Result<CMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "dft_matrix requires positive dimensions, got {rows}x{cols}"
        )));
    }
    if cols > rows {
        return Err(Error::Dimension(format!(
            "dft_matrix: cols ({cols}) must not exceed rows ({rows})"
        )));
    }
    let scale = 1.0 / (rows as f64).sqrt();
    let base = -2.0 * std::f64::consts::PI / rows as f64;
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        // exp(-2*pi*i*r*c/rows) / sqrt(rows); reduce r*c mod rows first so the
        // angle stays small and columns of large matrices remain orthonormal.
        let phase = base * ((r * c) % rows) as f64;
        Complex64::from_polar(scale, phase)
    }))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// non-increasing order (ties keep their original index order).
///
/// The input is symmetrized as `(A + A^H)/2` before factoring, so inputs that
/// are Hermitian only up to rounding are accepted. Eigenvalues that are
/// negative by no more than `1e-12 * |lambda|_max` are clamped to zero.
pub fn hermitian_eig_desc(a: &CMatrix) -> Result<EigenPair> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "hermitian_eig_desc requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_empty() {
        return Err(Error::Dimension("hermitian_eig_desc: empty matrix".into()));
    }
    let herm = (a + a.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();

    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let clamp = 1e-12 * max_abs;
    let values: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v < 0.0 && v >= -clamp {
                0.0
            } else {
                v
            }
        })
        .collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(EigenPair { values, vectors })
}

/// Moore–Penrose pseudo-inverse with singular values below
/// `rel_tol * sigma_max` treated as zero.
pub fn pseudo_inverse(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    if a.is_empty() {
        return Err(Error::Dimension("pseudo_inverse: empty matrix".into()));
    }
    if rel_tol <= 0.0 {
        return Err(Error::Parameter(format!(
            "pseudo_inverse: rel_tol must be positive, got {rel_tol}"
        )));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.pseudo_inverse(rel_tol * sigma_max)
        .map_err(|e| Error::Dimension(e.to_string()))
}

/// Kronecker product `A (x) B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Matrix with i.i.d. circularly symmetric complex Gaussian entries of the
/// given variance: real and imaginary parts are each `N(0, variance/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> Result<CMatrix> {
    if variance < 0.0 {
        return Err(Error::Parameter(format!(
            "complex_gaussian: variance must be nonnegative, got {variance}"
        )));
    }
    let sigma = (variance / 2.0).sqrt();
    // Column-major fill so the draw order matches the storage order.
    Ok(CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(sigma * re, sigma * im)
    }))
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = a.clone().singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * sigma_max).count()
}

/// Rejects matrices containing NaN or infinite entries.
pub fn check_finite(a: &CMatrix, what: &str) -> Result<()> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Parameter(format!("{what}: non-finite entries")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_cmatrix(seed: u64, rows: usize, cols: usize) -> CMatrix {
        complex_gaussian(&mut rng(seed), rows, cols, 1.0).unwrap()
    }

    #[test]
    fn dft_1x1_is_one() {
        let phi = dft_matrix(1, 1).unwrap();
        assert_relative_eq!(phi[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(phi[(0, 0)].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dft_2x2_matches_hand_values() {
        let phi = dft_matrix(2, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for (r, c, want) in [(0, 0, s), (0, 1, s), (1, 0, s), (1, 1, -s)] {
            assert_relative_eq!(phi[(r, c)].re, want, epsilon = 1e-15);
            assert!(phi[(r, c)].im.abs() < 1e-15);
        }
    }

    #[test]
    fn dft_8x3_columns_orthonormal() {
        let phi = dft_matrix(8, 3).unwrap();
        let gram = phi.adjoint() * &phi;
        let eye = CMatrix::identity(3, 3);
        assert!((gram - eye).norm() < 1e-12);
    }

    #[test]
    fn dft_square_is_unitary() {
        for n in [1, 2, 5, 16, 37] {
            let phi = dft_matrix(n, n).unwrap();
            let eye = CMatrix::identity(n, n);
            assert!((&phi * phi.adjoint() - &eye).norm() < 1e-12, "n={n}");
            assert!((phi.adjoint() * &phi - eye).norm() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn dft_rejects_cols_above_rows() {
        assert!(matches!(dft_matrix(3, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn eig_identity() {
        let eig = hermitian_eig_desc(&CMatrix::identity(3, 3)).unwrap();
        for v in &eig.values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let gram = eig.vectors.adjoint() * &eig.vectors;
        assert!((gram - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn eig_diagonal_sorted_descending() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(4.0, 0.0),
            Complex64::new(9.0, 0.0),
        ]));
        let eig = hermitian_eig_desc(&a).unwrap();
        assert_relative_eq!(eig.values[0], 9.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[1], 4.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_rank_two_by_construction() {
        let b = random_cmatrix(7, 5, 2);
        let a = &b * b.adjoint();
        let eig = hermitian_eig_desc(&a).unwrap();
        let lam_max = eig.values[0];
        let above = eig.values.iter().filter(|&&v| v > 1e-10 * lam_max).count();
        assert_eq!(above, 2);
    }

    #[test]
    fn eig_reconstructs_input() {
        for seed in 0..5u64 {
            let b = random_cmatrix(seed, 6, 6);
            let a = &b * b.adjoint();
            let eig = hermitian_eig_desc(&a).unwrap();
            let lam = CMatrix::from_diagonal(&CVector::from_iterator(
                eig.values.len(),
                eig.values.iter().map(|&v| Complex64::new(v, 0.0)),
            ));
            let recon = &eig.vectors * lam * eig.vectors.adjoint();
            assert!((recon - &a).norm() <= 1e-8 * a.norm(), "seed {seed}");
            let gram = eig.vectors.adjoint() * &eig.vectors;
            assert!((gram - CMatrix::identity(6, 6)).norm() < 1e-10);
        }
    }

    #[test]
    fn eig_rejects_nonsquare() {
        let a = random_cmatrix(0, 3, 4);
        assert!(matches!(hermitian_eig_desc(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn pinv_identity() {
        let pinv = pseudo_inverse(&CMatrix::identity(4, 4), 1e-12).unwrap();
        assert!((pinv - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn pinv_rank_deficient_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        let pinv = pseudo_inverse(&a, 1e-12).unwrap();
        assert_relative_eq!(pinv[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert!(pinv[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn pinv_left_inverse_of_tall_full_rank() {
        let a = random_cmatrix(11, 6, 3);
        let pinv = pseudo_inverse(&a, 1e-12).unwrap();
        assert!((pinv * &a - CMatrix::identity(3, 3)).norm() < 1e-8);
    }

    #[test]
    fn pinv_moore_penrose_identities() {
        let a = random_cmatrix(3, 5, 3);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        let tol = 1e-8 * a.norm();
        assert!((&a * &p * &a - &a).norm() < tol);
        assert!((&p * &a * &p - &p).norm() < tol);
        let ap = &a * &p;
        assert!((ap.adjoint() - &ap).norm() < tol);
        let pa = &p * &a;
        assert!((pa.adjoint() - &pa).norm() < tol);
    }

    #[test]
    fn pinv_involution_on_full_rank() {
        let a = random_cmatrix(5, 4, 4);
        let back = pseudo_inverse(&pseudo_inverse(&a, 1e-12).unwrap(), 1e-12).unwrap();
        assert!((back - &a).norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn pinv_rejects_empty() {
        let a = CMatrix::zeros(0, 0);
        assert!(matches!(pseudo_inverse(&a, 1e-12), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_identity_with_scalar() {
        let five = CMatrix::from_element(1, 1, Complex64::new(5.0, 0.0));
        let k = kron(&CMatrix::identity(2, 2), &five);
        assert_eq!(k.shape(), (2, 2));
        assert_relative_eq!(k[(0, 0)].re, 5.0);
        assert_relative_eq!(k[(1, 1)].re, 5.0);
        assert!(k[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn kron_row_vectors() {
        let a = CMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
        );
        let b = CMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)],
        );
        let k = kron(&a, &b);
        let want = [3.0, 4.0, 6.0, 8.0];
        for (i, w) in want.iter().enumerate() {
            assert_relative_eq!(k[(0, i)].re, *w, epsilon = 1e-15);
        }
    }

    #[test]
    fn kron_shape() {
        let a = random_cmatrix(1, 2, 2);
        let b = random_cmatrix(2, 3, 1);
        assert_eq!(kron(&a, &b).shape(), (6, 2));
    }

    #[test]
    fn kron_associative() {
        let a = random_cmatrix(4, 2, 2);
        let b = random_cmatrix(5, 2, 3);
        let c = random_cmatrix(6, 3, 2);
        let lhs = kron(&kron(&a, &b), &c);
        let rhs = kron(&a, &kron(&b, &c));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn gaussian_zero_variance_is_zero() {
        let z = complex_gaussian(&mut rng(1), 4, 3, 0.0).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn gaussian_deterministic_under_seed() {
        let a = complex_gaussian(&mut rng(42), 5, 5, 1.0).unwrap();
        let b = complex_gaussian(&mut rng(42), 5, 5, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_sample_variance_matches() {
        let z = complex_gaussian(&mut rng(7), 1000, 100, 2.0).unwrap();
        let var = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len() as f64;
        assert!((var - 2.0).abs() < 0.1, "sample variance {var}");
    }

    #[test]
    fn gaussian_rejects_negative_variance() {
        assert!(matches!(
            complex_gaussian(&mut rng(0), 2, 2, -1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rank_of_outer_product_sum() {
        let b = random_cmatrix(9, 8, 3);
        assert_eq!(numerical_rank(&b, 1e-8), 3);
        assert_eq!(numerical_rank(&CMatrix::zeros(4, 4), 1e-8), 0);
    }
}
