//! Dense rank-revealing decompositions, minimum-norm solves, and kernel
//! projections. Matrices here are small (k, n <= ~10), so everything is
//! SVD-based.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, thiserror::Error)]
pub enum NumError {
    #[error("non-finite entry in input")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inconsistent system: least-squares residual {residual:.3e} exceeds tolerance")]
    Inconsistent { residual: f64 },
    #[error("step size underflow at s = {s:.6e}")]
    StepUnderflow { s: f64 },
    #[error("maximum step count {max_steps} exceeded at s = {s:.6e}")]
    MaxStepsExceeded { max_steps: usize, s: f64 },
    #[error("field evaluation failed: {0}")]
    FieldEvaluation(String),
}

/// Rank-revealing factorization of a k x n matrix under a relative tolerance.
///
/// `row_space` and `col_space` hold the leading `rank` right/left singular
/// vectors; `kernel` is an orthonormal basis of the orthogonal complement of
/// the row space in R^n.
#[derive(Debug, Clone)]
pub struct RankFactorization {
    pub singular_values: Vec<f64>,
    pub row_space: Vec<DVector<f64>>,
    pub col_space: Vec<DVector<f64>>,
    pub kernel: Vec<DVector<f64>>,
    pub rank: usize,
    pub tol: f64,
}

impl RankFactorization {
    /// Reassemble sum sigma_i u_i v_i^T over the retained rank triples.
    pub fn reconstruct(&self, k: usize, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(k, n);
        for i in 0..self.rank {
            m += self.singular_values[i] * &self.col_space[i] * self.row_space[i].transpose();
        }
        m
    }

    /// Orthogonal projection of `v` onto the kernel subspace.
    pub fn project_onto_kernel(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for b in &self.kernel {
            out += b * b.dot(v);
        }
        out
    }
}

/// SVD-based factorization; numeric rank counts singular values above
/// `tol * sigma_max`.
pub fn factorize(m: &DMatrix<f64>, tol: f64) -> Result<RankFactorization, NumError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(NumError::NonFiniteInput);
    }
    let n = m.ncols();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra sorts descending already; make it an invariant regardless.
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cut = tol * sigma_max;
    let rank = singular_values.iter().filter(|s| **s > cut).count();

    let mut row_space = Vec::with_capacity(rank);
    let mut col_space = Vec::with_capacity(rank);
    for i in 0..rank {
        row_space.push(v_t.row(i).transpose().clone_owned());
        col_space.push(u.column(i).clone_owned());
    }

    // Kernel = orthogonal complement of the row space, via column-pivoted QR
    // of the complement projector. Deterministic and robust for repeated
    // singular values.
    let kernel_dim = n - rank;
    let mut kernel = Vec::with_capacity(kernel_dim);
    if kernel_dim > 0 {
        let mut proj = DMatrix::identity(n, n);
        for v in &row_space {
            proj -= v * v.transpose();
        }
        let qr = proj.col_piv_qr();
        let q = qr.q();
        for i in 0..kernel_dim {
            let mut col = q.column(i).clone_owned();
            // re-project to scrub the O(eps) row-space component
            for v in &row_space {
                let c = v.dot(&col);
                col -= v * c;
            }
            let norm = col.norm();
            col /= norm;
            kernel.push(col);
        }
    }

    Ok(RankFactorization {
        singular_values,
        row_space,
        col_space,
        kernel,
        rank,
        tol,
    })
}

/// Least-norm solution of `M x = b`: the unique solution orthogonal to
/// ker(M). Errors with `Inconsistent` when the least-squares residual shows
/// `b` is not in the image of `M` (relative tolerance `residual_tol`).
pub fn min_norm_solve(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    rank_tol: f64,
    residual_tol: f64,
) -> Result<DVector<f64>, NumError> {
    if b.len() != m.nrows() {
        return Err(NumError::DimensionMismatch {
            expected: m.nrows(),
            got: b.len(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) {
        return Err(NumError::NonFiniteInput);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cut = rank_tol * sigma_max;
    let n = m.ncols();
    let mut x = DVector::zeros(n);
    for i in 0..sigma.len() {
        if sigma[i] > cut {
            let coeff = u.column(i).dot(b) / sigma[i];
            x += v_t.row(i).transpose() * coeff;
        }
    }
    let residual = (m * &x - b).norm();
    let scale = b.norm().max(1.0);
    if residual > residual_tol * scale {
        return Err(NumError::Inconsistent { residual });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn factorize_rank_two_with_line_kernel() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, -1.0, 1.0, 0.0, 0.0]);
        let f = factorize(&m, 1e-10).unwrap();
        assert_eq!(f.rank, 2);
        assert_eq!(f.kernel.len(), 1);
        // kernel = span{(0,1,0)}
        let k = &f.kernel[0];
        assert!((k[0].abs()) < 1e-12 && (k[2].abs()) < 1e-12);
        assert!((k[1].abs() - 1.0).abs() < 1e-12);
        assert!((&m * k).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn factorize_zero_matrix_has_full_kernel() {
        let m = DMatrix::zeros(2, 3);
        let f = factorize(&m, 1e-10).unwrap();
        assert_eq!(f.rank, 0);
        assert_eq!(f.kernel.len(), 3);
        for (i, a) in f.kernel.iter().enumerate() {
            for (j, b) in f.kernel.iter().enumerate() {
                let dot = a.dot(b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factorize_rank_one_plane_kernel() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = factorize(&m, 1e-10).unwrap();
        assert_eq!(f.rank, 1);
        assert_eq!(f.kernel.len(), 2);
        // kernel = span{(0,1,0),(0,0,1)}: e1-component of both basis vectors vanishes
        for k in &f.kernel {
            assert!(k[0].abs() < 1e-12);
            assert!((&m * k).norm() < 1e-12);
        }
    }

    #[test]
    fn min_norm_identity_returns_rhs() {
        let m = DMatrix::identity(3, 3);
        let b = dvector![0.3, -0.2, 0.9];
        let x = min_norm_solve(&m, &b, 1e-10, 1e-8).unwrap();
        assert!((x - b).norm() < 1e-14);
    }

    #[test]
    fn min_norm_diagonal_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let x = min_norm_solve(&m, &dvector![0.0, 1.0], 1e-10, 1e-8).unwrap();
        assert!((x - dvector![0.0, 0.5]).norm() < 1e-14);
    }

    #[test]
    fn min_norm_underdetermined_sets_free_component_to_zero() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, -1.0, 1.0, 0.0, 0.0]);
        let x = min_norm_solve(&m, &dvector![0.0, 1.0], 1e-10, 1e-8).unwrap();
        assert!((x - dvector![1.0, 0.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn inconsistent_rhs_is_detected() {
        // column space of the zero row cannot reach b2 != 0
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let r = min_norm_solve(&m, &dvector![1.0, 1.0], 1e-10, 1e-8);
        assert!(matches!(r, Err(NumError::Inconsistent { .. })));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(factorize(&m, 1e-10), Err(NumError::NonFiniteInput)));
    }

    #[test]
    fn kernel_projection_on_coordinate_kernel() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, -1.0, 1.0, 0.0, 0.0]);
        let f = factorize(&m, 1e-10).unwrap();
        let p = f.project_onto_kernel(&dvector![3.0, -4.0, 5.0]);
        assert!((p - dvector![0.0, -4.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn kernel_projection_with_trivial_kernel_is_zero() {
        let m = DMatrix::identity(3, 3);
        let f = factorize(&m, 1e-10).unwrap();
        let p = f.project_onto_kernel(&dvector![1.0, 2.0, 3.0]);
        assert!(p.norm() < 1e-15);
    }

    #[test]
    fn kernel_projection_plane_kernel() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = factorize(&m, 1e-10).unwrap();
        let p = f.project_onto_kernel(&dvector![1.0, 2.0, 3.0]);
        assert!((p - dvector![0.0, 2.0, 3.0]).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_input() {
        let m = DMatrix::from_row_slice(
            3,
            4,
            &[
                0.3, -1.2, 0.7, 2.0, 1.1, 0.4, -0.9, 0.2, -0.5, 0.8, 1.6, -0.3,
            ],
        );
        let f = factorize(&m, 1e-10).unwrap();
        let r = f.reconstruct(3, 4);
        assert!((r - &m).norm() <= 1e-12 * m.norm());
    }
}
