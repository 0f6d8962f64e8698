//! Dense linear algebra oracles built on nalgebra.

use boussinesq::fem::CsrMatrix;
use nalgebra::{DMatrix, DVector};

pub fn to_dense(m: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.iter() {
        d[(r, c)] += v;
    }
    d
}

/// Generalized eigenvalues of `S q = lambda M q` with `S = B A^-1 B^T`, ascending.
pub fn schur_eigenvalues(a: &CsrMatrix, b: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
    let a = to_dense(a);
    let b = to_dense(b);
    let m = to_dense(m);
    let a_inv_bt = a.clone().lu().solve(&b.transpose()).expect("singular velocity stiffness");
    let s = &b * a_inv_bt;
    let s = 0.5 * (&s + s.transpose());
    let l = m.cholesky().expect("pressure mass not SPD").l();
    let l_inv = l.clone().try_inverse().unwrap();
    let c = &l_inv * s * l_inv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
