//! Taylor-Hood spaces, quadrature and operator assembly.

pub mod dirichlet;
pub mod infsup;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod system;
pub mod trilinear;

use thiserror::Error;

pub use sparse::{CsrMatrix, TripletBuilder};
pub use system::{build_fe_system, FeSystem, FieldVector, Space};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("triangle {triangle} has a singular or inverted Jacobian")]
    DegenerateElement { triangle: usize },
    #[error("boundary edge {vertices:?} is not an edge of any triangle")]
    DanglingBoundaryEdge { vertices: [usize; 2] },
    #[error("expected a {expected:?} field, found {found:?}")]
    SpaceMismatch { expected: Space, found: Space },
    #[error("expected {expected} coefficients, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{space:?} DOF {dof} is not a Dirichlet DOF")]
    NotDirichlet { space: Space, dof: usize },
    #[error("node {node} lies on both GammaN and GammaH with different data")]
    ConflictingBoundaryData { node: usize },
    #[error("inf-sup iteration: {0}")]
    InfSup(String),
    #[error(transparent)]
    Linear(#[from] crate::linalg::LinearSolveError),
}
