//! Symmetric elimination of prescribed DOFs with value lifting.
//!
//! Rows and columns of constrained DOFs are zeroed and a unit diagonal is
//! placed on them, while the known values are moved to the right-hand side.
//! Eliminated entries are kept as explicit zeros so the sparsity pattern, and
//! hence any cached symbolic factorisation, is unchanged.

use crate::fem::sparse::{CsrMatrix, TripletBuilder};
use crate::fem::system::{FeSystem, Space};
use crate::fem::FemError;

/// Constrains `matrix` and `rhs` so that `x[i] = v` for every `(i, v)` in `values`.
/// Indices refer to rows of `matrix`, which must be square.
pub fn constrain(matrix: &CsrMatrix, rhs: &mut [f64], values: &[(usize, f64)]) -> CsrMatrix {
    let n = matrix.nrows();
    assert_eq!(matrix.ncols(), n, "Dirichlet elimination needs a square matrix");
    assert_eq!(rhs.len(), n);
    if values.is_empty() {
        return matrix.clone();
    }
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &(i, v) in values {
        fixed[i] = Some(v);
    }
    let mut b = TripletBuilder::with_capacity(n, n, matrix.nnz() + values.len());
    for (r, c, v) in matrix.iter() {
        match (fixed[r], fixed[c]) {
            (None, None) => b.push(r, c, v),
            (None, Some(g)) => {
                rhs[r] -= v * g;
                b.push(r, c, 0.0);
            }
            (Some(_), _) => b.push(r, c, 0.0),
        }
    }
    for &(i, v) in values {
        b.push(i, i, 1.0);
        rhs[i] = v;
    }
    b.build()
}

impl FeSystem {
    /// Applies Dirichlet values on the DOFs of `space`. Every index must be a
    /// constrained DOF of that space: all boundary nodes for velocity, the
    /// `GammaN`/`GammaH` nodes for temperature. `offset` shifts the indices when
    /// the space is one block of a larger system.
    pub fn apply_dirichlet(
        &self,
        matrix: &CsrMatrix,
        rhs: &mut [f64],
        space: Space,
        offset: usize,
        values: &[(usize, f64)],
    ) -> Result<CsrMatrix, FemError> {
        let mask = self.dirichlet_mask(space);
        let mut shifted = Vec::with_capacity(values.len());
        for &(i, v) in values {
            if i >= mask.len() || !mask[i] {
                return Err(FemError::NotDirichlet { space, dof: i });
            }
            shifted.push((offset + i, v));
        }
        Ok(constrain(matrix, rhs, &shifted))
    }

    /// `(dof, 0)` for every constrained velocity DOF.
    pub fn homogeneous_velocity_values(&self) -> Vec<(usize, f64)> {
        self.dirichlet_mask(Space::Velocity)
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(i, _)| (i, 0.0))
            .collect()
    }
}
