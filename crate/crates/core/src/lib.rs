//! Taylor-Hood finite elements for two-dimensional Boussinesq convection in
//! a cavity, with wall-graded meshes, a discrete boundary lift for the
//! temperature, four BDF-type time steppers and energy bookkeeping.
//!
//! The guide in `book/` walks through the pipeline; its snippets run as
//! doc-tests of this crate.

pub mod experiment;
pub mod fem;
pub mod hopf;
pub mod linalg;
pub mod mesh;
pub mod scheme;
pub mod snapshot;
pub mod stability;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/meshes.md")]
    pub struct Meshes;
    #[doc = include_str!("../../../book/src/finite-elements.md")]
    pub struct FiniteElements;
    #[doc = include_str!("../../../book/src/boundary-lift.md")]
    pub struct BoundaryLift;
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    pub struct TimeStepping;
    #[doc = include_str!("../../../book/src/stability.md")]
    pub struct Stability;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
