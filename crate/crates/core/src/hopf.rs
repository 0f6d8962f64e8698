//! Discrete Hopf extension of the Dirichlet temperature data.
//!
//! `tau` carries the boundary data at the `GammaN`/`GammaH` nodes of the
//! temperature space and vanishes at every other node, so its support is the
//! single layer of triangles touching those walls. Splitting `T = theta + tau`
//! leaves an unknown `theta` with homogeneous Dirichlet data, and the
//! convective coupling through `tau` is bounded by the layer width:
//! `|b*(chi1, tau, chi2)| <= C delta (|grad chi1|^2 + |grad chi2|^2)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::fem::{FeSystem, FemError, FieldVector, Space};

#[derive(Debug, Error)]
pub enum HopfError {
    #[error("the mesh has no GammaN or GammaH nodes")]
    NoDirichletBoundary,
    #[error("no boundary datum for Dirichlet node {node}")]
    MissingBoundaryDatum { node: usize },
    #[error("node {node} is not on GammaN or GammaH")]
    NotOnDirichletBoundary { node: usize },
    #[error("node {node} has more than one datum")]
    DuplicateDatum { node: usize },
    #[error("boundary datum at node {node} is not finite")]
    NonFiniteDatum { node: usize },
    #[error("profile parameter out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfExtension {
    pub coefficients: FieldVector,
    /// Triangles with at least one node on the Dirichlet walls, ascending.
    pub support_elements: Vec<usize>,
    /// Distance of the first mesh line from the Dirichlet walls.
    pub delta: f64,
    /// Largest diameter among the support triangles.
    pub layer_diameter: f64,
    /// `(node, value)` pairs, sorted by node.
    pub boundary_data: Vec<(usize, f64)>,
}

/// Builds `tau = sum_i T_i psi_i` over the nodal basis functions of the Dirichlet nodes.
pub fn build_hopf_extension(system: &FeSystem, boundary_data: &[(usize, f64)]) -> Result<HopfExtension, HopfError> {
    let n = system.n_p2();
    let dirichlet = system.dirichlet_mask(Space::Temperature);
    if !dirichlet.iter().any(|&d| d) {
        return Err(HopfError::NoDirichletBoundary);
    }
    let mut value: Vec<Option<f64>> = vec![None; n];
    for &(node, v) in boundary_data {
        if node >= n || !dirichlet[node] {
            return Err(HopfError::NotOnDirichletBoundary { node });
        }
        if !v.is_finite() {
            return Err(HopfError::NonFiniteDatum { node });
        }
        if value[node].replace(v).is_some() {
            return Err(HopfError::DuplicateDatum { node });
        }
    }
    let mut coeffs = vec![0.0; n];
    let mut data = Vec::new();
    for i in 0..n {
        if dirichlet[i] {
            let v = value[i].ok_or(HopfError::MissingBoundaryDatum { node: i })?;
            coeffs[i] = v;
            data.push((i, v));
        }
    }
    let support_elements: Vec<usize> = system
        .dofs()
        .cells
        .iter()
        .enumerate()
        .filter(|(_, cell)| cell.iter().any(|&i| dirichlet[i]))
        .map(|(t, _)| t)
        .collect();
    let mesh = system.mesh();
    let layer_diameter = support_elements.iter().map(|&t| mesh.diameter(t)).fold(0.0, f64::max);
    Ok(HopfExtension {
        coefficients: FieldVector::new(Space::Temperature, coeffs),
        support_elements,
        delta: mesh.delta(),
        layer_diameter,
        boundary_data: data,
    })
}

impl HopfExtension {
    /// Nodes of the temperature space that belong to no support triangle.
    pub fn exterior_nodes(&self, system: &FeSystem) -> Vec<usize> {
        let mut touched = vec![false; system.n_p2()];
        for &t in &self.support_elements {
            for &i in &system.dofs().cells[t] {
                touched[i] = true;
            }
        }
        (0..system.n_p2()).filter(|&i| !touched[i]).collect()
    }

    /// Checks the trace, support and nodal-range properties exactly.
    pub fn verify(&self, system: &FeSystem) -> Result<(), String> {
        let c = self.coefficients.coeffs();
        for &(node, v) in &self.boundary_data {
            if c[node] != v {
                return Err(format!("trace mismatch at node {node}: {} != {v}", c[node]));
            }
        }
        let support: std::collections::HashSet<usize> = self.support_elements.iter().copied().collect();
        for (t, cell) in system.dofs().cells.iter().enumerate() {
            if !support.contains(&t) {
                if let Some(&i) = cell.iter().find(|&&i| c[i] != 0.0) {
                    return Err(format!("triangle {t} is outside the layer but node {i} carries {}", c[i]));
                }
            }
        }
        let lo = self.boundary_data.iter().map(|d| d.1).fold(0.0, f64::min);
        let hi = self.boundary_data.iter().map(|d| d.1).fold(0.0, f64::max);
        if let Some(i) = (0..c.len()).find(|&i| c[i] < lo || c[i] > hi) {
            return Err(format!("node {i} value {} outside [{lo}, {hi}]", c[i]));
        }
        Ok(())
    }
}

/// The classical one-dimensional Hopf profile on `[0, 1]`: linear from 1 to 1/2
/// across `[0, delta]`, constant 1/2 in the interior, linear from 1/2 to 0
/// across `[1 - delta, 1]`.
pub fn explicit_hopf_profile(delta: f64, x: f64) -> Result<f64, HopfError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(HopfError::OutOfRange(format!("delta = {delta} not in (0, 1/2)")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(HopfError::OutOfRange(format!("x = {x} not in [0, 1]")));
    }
    Ok(if x <= delta {
        (2.0 * delta - x) / (2.0 * delta)
    } else if x < 1.0 - delta {
        0.5
    } else {
        (1.0 - x) / (2.0 * delta)
    })
}

/// Sampling setup for [`estimate_hopf_bound_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfBoundOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Also zero `chi2` on every node of the support triangles.
    pub chi2_off_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfBoundEstimate {
    /// Largest sampled ratio.
    pub max: f64,
    pub median: f64,
    pub samples: usize,
    /// Samples whose denominator vanished.
    pub skipped: usize,
    pub delta: f64,
}

/// Samples `r = |b*(chi1, tau, chi2)| / (delta (|grad chi1|^2 + |grad chi2|^2))`
/// with i.i.d. standard normal coefficients on the free DOFs of the velocity
/// `chi1` and the temperature `chi2`; Dirichlet coefficients are zero.
pub fn estimate_hopf_bound_constant(
    system: &FeSystem,
    tau: &HopfExtension,
    options: HopfBoundOptions,
) -> Result<HopfBoundEstimate, HopfError> {
    if options.n_samples == 0 {
        return Err(HopfError::OutOfRange("n_samples must be at least 1".into()));
    }
    let vel_fixed = system.dirichlet_mask(Space::Velocity);
    let mut temp_fixed = system.dirichlet_mask(Space::Temperature);
    if options.chi2_off_support {
        for &t in &tau.support_elements {
            for &i in &system.dofs().cells[t] {
                temp_fixed[i] = true;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut draw = |fixed: &[bool], space: Space| {
        let c = fixed
            .iter()
            .map(|&f| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if f { 0.0 } else { z }
            })
            .collect();
        FieldVector::new(space, c)
    };
    let mut ratios = Vec::with_capacity(options.n_samples);
    let mut skipped = 0;
    for _ in 0..options.n_samples {
        let chi1 = draw(&vel_fixed, Space::Velocity);
        let chi2 = draw(&temp_fixed, Space::Temperature);
        let denom = tau.delta * (system.grad_inner(&chi1, &chi1) + system.grad_inner(&chi2, &chi2));
        if !(denom > 0.0) {
            skipped += 1;
            continue;
        }
        let num = system.trilinear_b_star(&chi1, &tau.coefficients, &chi2)?;
        ratios.push(num.abs() / denom);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let median = if ratios.is_empty() {
        0.0
    } else {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) }
    };
    Ok(HopfBoundEstimate { max, median, samples: ratios.len(), skipped, delta: tau.delta })
}
