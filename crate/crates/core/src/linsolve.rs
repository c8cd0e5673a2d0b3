//! Sparse direct solves for the (indefinite) step systems.
//!
//! Backed by faer's sparse LU with partial pivoting and a COLAMD fill-reducing
//! ordering. The symbolic analysis depends only on the sparsity pattern and is reused
//! across Picard iterates and time steps. faer is built without rayon, so every
//! factorization runs sequentially and produces identical bits for identical input.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{Error, Result};
use crate::fem::sparse::{norm_inf, CsrMatrix};

/// Fill-reducing ordering and elimination structure for one sparsity pattern.
#[derive(Clone)]
pub struct SymbolicStructure {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    inner: SymbolicLu<usize>,
}

impl std::fmt::Debug for SymbolicStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolicStructure").field("n", &self.n).field("nnz", &self.col_idx.len()).finish()
    }
}

impl SymbolicStructure {
    pub fn matches(&self, a: &CsrMatrix) -> bool {
        a.nrows() == self.n && a.row_ptr() == self.row_ptr.as_slice() && a.col_idx() == self.col_idx.as_slice()
    }
}

/// Numeric LU factors, reusable for any number of right-hand sides.
pub struct Factorization {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.n).finish()
    }
}

/// Zero pivots are reported relative to the largest matrix entry.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Largest tolerated error of the known-answer probe (entries of size 1..2).
const PROBE_TOLERANCE: f64 = 1e-4;

fn check_square(a: &CsrMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    Ok(())
}

// The CSR arrays of A are the CSC arrays of Aᵀ: faer factors Aᵀ and we solve with
// its transpose.
fn transposed_view(a: &CsrMatrix) -> SymbolicSparseColMatRef<'_, usize> {
    SymbolicSparseColMatRef::new_checked(a.ncols(), a.nrows(), a.row_ptr(), None, a.col_idx())
}

pub fn analyze(a: &CsrMatrix) -> Result<SymbolicStructure> {
    check_square(a)?;
    let inner = SymbolicLu::try_new(transposed_view(a)).map_err(|e| Error::SingularMatrix(format!("symbolic analysis failed: {e:?}")))?;
    Ok(SymbolicStructure { n: a.nrows(), row_ptr: a.row_ptr().to_vec(), col_idx: a.col_idx().to_vec(), inner })
}

/// Full factorization (analysis included).
pub fn factor(a: &CsrMatrix) -> Result<Factorization> {
    let symbolic = analyze(a)?;
    factor_with(&symbolic, a)
}

/// Numeric factorization reusing a symbolic analysis of the same pattern.
pub fn factor_with(symbolic: &SymbolicStructure, a: &CsrMatrix) -> Result<Factorization> {
    check_square(a)?;
    if !symbolic.matches(a) {
        return Err(Error::InvalidArgument("sparsity pattern differs from the analyzed one".into()));
    }
    let n = a.nrows();
    let lu = Lu::try_new_with_symbolic(symbolic.inner.clone(), SparseColMatRef::new(transposed_view(a), a.values()))
        .map_err(|e| Error::SingularMatrix(format!("structurally singular: {e:?}")))?;
    let f = Factorization { n, lu };
    f.check_pivots(a)?;
    Ok(f)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if self.n == 0 {
            return Ok(());
        }
        let n = self.n;
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu.solve_transpose_in_place(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("non-finite solution".into()));
        }
        Ok(())
    }

    /// faer does not expose its pivots, so a vanishing pivot is detected through a
    /// solve with a known answer: a pivot of relative size below the threshold either
    /// produces non-finite values or destroys the solution.
    fn check_pivots(&self, a: &CsrMatrix) -> Result<()> {
        let probe: Vec<f64> = (0..self.n).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
        let mut x = a.mul_vec(&probe);
        let n = self.n;
        self.lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("zero pivot".into()));
        }
        let err = x.iter().zip(&probe).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        if err > PROBE_TOLERANCE {
            return Err(Error::SingularMatrix(format!(
                "pivot below {PIVOT_THRESHOLD:e}·max|A| = {:e} (probe error {err:e})",
                PIVOT_THRESHOLD * a.max_abs()
            )));
        }
        Ok(())
    }
}

/// Relative residual `‖Ax − b‖∞ / max(‖b‖∞, ‖A‖_max‖x‖∞)`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = norm_inf(b).max(a.max_abs() * norm_inf(x));
    if scale == 0.0 {
        0.0
    } else {
        norm_inf(&r) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let f = factor(&CsrMatrix::identity(4)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(f.solve(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn permutation_needs_pivoting() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = factor(&a).unwrap().solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn small_saddle() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 0.0]]);
        let x = factor(&a).unwrap().solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn diagonal() {
        let a = CsrMatrix::identity(5).scaled(2.0);
        let x = factor(&a).unwrap().solve(&[1.0; 5]).unwrap();
        assert!(x.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>() + if i == j { n as f64 } else { 0.0 };
            }
        }
        let a = CsrMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = factor(&a).unwrap().solve(&b).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        let rel = crate::fem::sparse::norm2(&r) / crate::fem::sparse::norm2(&b);
        assert!(rel <= 1e-12, "{rel}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(factor(&a), Err(Error::SingularMatrix(_))));
        // a saddle system without the pressure constraint
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (0, 2, 0.0), (2, 0, 0.0), (1, 1, 1.0), (2, 2, 0.0)]);
        assert!(matches!(factor(&a), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let f = factor(&CsrMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
