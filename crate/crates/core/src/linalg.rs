//! Sparse direct solves, wrapping the `faer` supernodal LU.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

use crate::fem::sparse::{norm2, CsrMatrix};

#[derive(Debug, Error)]
pub enum LinearSolveError {
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("factorisation failed: {0}")]
    Factorisation(String),
    #[error("solution residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>, LinearSolveError> {
    let triplets: Vec<Triplet<usize, usize, f64>> = a.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|e| LinearSolveError::Factorisation(format!("{e:?}")))
}

/// Numeric LU factors of one matrix.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<SparseLu, LinearSolveError> {
        LuCache::default().factor(a)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Reuses the symbolic analysis while the sparsity pattern stays the same.
#[derive(Default)]
pub struct LuCache {
    pattern: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl LuCache {
    pub fn factor(&mut self, a: &CsrMatrix) -> Result<SparseLu, LinearSolveError> {
        if a.nrows() != a.ncols() {
            return Err(LinearSolveError::NotSquare(a.nrows(), a.ncols()));
        }
        let mat = to_faer(a)?;
        let reuse = matches!(&self.pattern, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !reuse {
            let sym = SymbolicLu::try_new(mat.symbolic()).map_err(|e| LinearSolveError::Factorisation(format!("{e:?}")))?;
            self.pattern = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), sym));
        }
        let sym = self.pattern.as_ref().unwrap().2.clone();
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref()).map_err(|e| LinearSolveError::Factorisation(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows() })
    }
}

/// Solves `a x = b`, applies one step of iterative refinement and checks
/// `|b - a x| <= tol * max(|b|, |a|_max |x|)`.
pub fn solve_checked(lu: &SparseLu, a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>, LinearSolveError> {
    let mut x = lu.solve(b);
    let residual = |x: &[f64]| -> Vec<f64> { a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let r = residual(&x);
    let dx = lu.solve(&r);
    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    let r = residual(&x);
    let amax = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = norm2(b).max(amax * norm2(&x));
    let rel = if scale > 0.0 { norm2(&r) / scale } else { norm2(&r) };
    if !(rel <= tol) {
        return Err(LinearSolveError::Residual { residual: rel, tolerance: tol });
    }
    Ok(x)
}
