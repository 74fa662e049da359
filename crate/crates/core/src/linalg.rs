//! Sparse LU and dense symmetric eigen wrappers over `faer`.
//!
//! All kernels run with sequential parallelism so results do not depend on
//! the thread count of the caller.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

/// Relative residual every accepted solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const REFINEMENT_TARGET: f64 = 1e-14;
const MAX_REFINEMENT_STEPS: usize = 3;

fn sequential() {
    faer::set_global_parallelism(Par::Seq);
}

fn power_of_two_reciprocal(x: f64) -> f64 {
    if x > 0.0 && x.is_finite() {
        (-(x.log2().round())).exp2()
    } else {
        1.0
    }
}

/// LU factorization of an equilibrated copy of a sparse matrix.
///
/// Rows and columns are scaled by powers of two (exact in floating point),
/// solves are followed by a few steps of iterative refinement, and the
/// reported residual is measured on the equilibrated system.
pub struct SparseLu {
    matrix: CsrMatrix,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl SparseLu {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        sequential();
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::Contract(format!(
                "LU of non-square {}x{} matrix",
                n,
                matrix.ncols()
            )));
        }
        let mut row_scale = vec![1.0; n];
        for (i, s) in row_scale.iter_mut().enumerate() {
            let (_, vals) = matrix.row(i);
            let m = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return Err(Error::Numerical(format!(
                    "row {i} of {n}x{n} system is identically zero"
                )));
            }
            *s = power_of_two_reciprocal(m);
        }
        let mut col_max = vec![0.0f64; n];
        for (i, j, v) in matrix.iter() {
            col_max[j] = col_max[j].max((row_scale[i] * v).abs());
        }
        if let Some(j) = col_max.iter().position(|&m| m == 0.0) {
            return Err(Error::Numerical(format!(
                "column {j} of {n}x{n} system is identically zero"
            )));
        }
        let col_scale: Vec<f64> = col_max
            .iter()
            .map(|&m| power_of_two_reciprocal(m))
            .collect();

        let scaled: Vec<_> = matrix
            .iter()
            .map(|(i, j, v)| faer::sparse::Triplet::new(i, j, row_scale[i] * v * col_scale[j]))
            .collect();
        let scaled = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &scaled)
            .map_err(|e| Error::Numerical(format!("sparse structure: {e:?}")))?;
        let lu = scaled.sp_lu().map_err(|e| {
            Error::Numerical(format!(
                "sparse LU of {n}x{n} system (nnz {}): {e:?}",
                matrix.nnz()
            ))
        })?;
        Ok(Self {
            matrix,
            row_scale,
            col_scale,
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut col = Mat::<f64>::zeros(n, 1);
        for i in 0..n {
            col[(i, 0)] = self.row_scale[i] * rhs[i];
        }
        self.lu.solve_in_place(col.as_mut());
        (0..n).map(|j| self.col_scale[j] * col[(j, 0)]).collect()
    }

    fn scaled_residual(&self, rhs: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        let ax = self.matrix.mul_vec(x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let num = norm2(
            &r.iter()
                .zip(&self.row_scale)
                .map(|(v, s)| v * s)
                .collect::<Vec<_>>(),
        );
        let den = norm2(
            &rhs.iter()
                .zip(&self.row_scale)
                .map(|(v, s)| v * s)
                .collect::<Vec<_>>(),
        );
        let rel = if den > 0.0 { num / den } else { num };
        (r, rel)
    }

    /// Solves `A x = b`; returns the solution and its relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if rhs.len() != self.dim() {
            return Err(Error::Contract(format!(
                "rhs length {} for system of size {}",
                rhs.len(),
                self.dim()
            )));
        }
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok((vec![0.0; self.dim()], 0.0));
        }
        let mut x = self.raw_solve(rhs);
        let (mut r, mut rel) = self.scaled_residual(rhs, &x);
        let mut steps = 0;
        while rel > REFINEMENT_TARGET && steps < MAX_REFINEMENT_STEPS && rel.is_finite() {
            let dx = self.raw_solve(&r);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let (r2, rel2) = self.scaled_residual(rhs, &candidate);
            if !(rel2 < rel) {
                break;
            }
            x = candidate;
            r = r2;
            rel = rel2;
            steps += 1;
        }
        if !rel.is_finite() || rel > RESIDUAL_TOLERANCE {
            return Err(Error::Numerical(format!(
                "linear solve of size {} reached relative residual {rel:e} (> {RESIDUAL_TOLERANCE:e}); matrix max |a_ij| = {:e}",
                self.dim(),
                self.matrix.max_abs()
            )));
        }
        Ok((x, rel))
    }
}

/// Eigen-decomposition of a dense symmetric matrix given row-major.
///
/// Returns eigenvalues in nondecreasing order and the eigenvectors as columns
/// (`vectors[k]` is the k-th eigenvector).
pub fn symmetric_eigen(n: usize, data: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    sequential();
    assert_eq!(data.len(), n * n);
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (data[i * n + j] + data[j * n + i]));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver did not converge: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|k| s[k]).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|i| u[(i, k)]).collect())
        .collect();
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletList;

    #[test]
    fn badly_scaled_block_system_solves_to_tolerance() {
        // flow-like rows at 1e-7, mechanics-like rows at 1e2
        let mut t = TripletList::new(4, 4);
        t.push(0, 0, 2e-7);
        t.push(0, 1, -1e-7);
        t.push(1, 0, -1e-7);
        t.push(1, 1, 2e-7);
        t.push(0, 2, 1e-3);
        t.push(2, 0, -1e-3);
        t.push(2, 2, 150.0);
        t.push(3, 3, 80.0);
        t.push(3, 1, -1e-3);
        t.push(1, 3, 1e-3);
        let a = t.build();
        let lu = SparseLu::new(a.clone()).unwrap();
        let b = [1e-7, 0.0, 0.0, 3.0];
        let (x, rel) = lu.solve(&b).unwrap();
        assert!(rel < 1e-13, "{rel}");
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1e-7));
        }
    }

    #[test]
    fn zero_row_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
        assert!(matches!(SparseLu::new(a), Err(Error::Numerical(_))));
    }

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let (vals, vecs) =
            symmetric_eigen(3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert!((vecs[0][1].abs() - 1.0).abs() < 1e-15);
    }
}
