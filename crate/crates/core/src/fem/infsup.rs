//! Numerical estimate of the discrete inf-sup constant
//!
//! `beta_h = inf_q sup_v (q, div v) / (|q| |grad v|)` over mean-free pressures
//! and velocities vanishing on the boundary. `beta_h^2` is the smallest
//! eigenvalue of `S q = lambda M_p q` with the Schur complement
//! `S = B A^-1 B^T`, restricted to the `M_p`-complement of the constants.
//!
//! The eigenproblem is solved by block inverse iteration with Rayleigh-Ritz.
//! Each application of `(S + eps M_p)^-1 M_p` is one solve with the
//! quasi-definite matrix `[A B^T; B -eps M_p]`, factored once. Eigenvalues
//! below [`KERNEL_THRESHOLD`] are locked and deflated as spurious pressure
//! modes; the estimate is the smallest eigenvalue above them.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::sparse::{CsrMatrix, TripletBuilder};
use crate::fem::system::{FeSystem, Space};
use crate::fem::FemError;
use crate::linalg::SparseLu;
use crate::mesh::Mesh;

/// Eigenvalues of `S` relative to `M_p` lie in `[0, 1]`; anything below this is a kernel mode.
pub const KERNEL_THRESHOLD: f64 = 1e-8;
const SHIFT: f64 = 1e-10;
const BLOCK: usize = 8;
const MAX_ITERS: usize = 2000;
const TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupEstimate {
    pub beta: f64,
    /// Spurious pressure modes found besides the constants.
    pub kernel_dim: usize,
    pub iterations: usize,
}

/// The blocks of a velocity-pressure pair needed by the estimator.
#[derive(Debug, Clone)]
pub struct SaddleBlocks {
    /// Velocity stiffness on free DOFs.
    pub stiffness: CsrMatrix,
    /// `(q, div v)` on pressure rows and free velocity columns.
    pub divergence: CsrMatrix,
    pub pressure_mass: CsrMatrix,
}

fn keep_columns(m: &CsrMatrix, keep: &[bool]) -> (CsrMatrix, Vec<usize>) {
    let mut map = vec![usize::MAX; keep.len()];
    let mut n = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            map[i] = n;
            n += 1;
        }
    }
    let mut b = TripletBuilder::with_capacity(m.nrows(), n, m.nnz());
    for (r, c, v) in m.iter() {
        if map[c] != usize::MAX {
            b.push(r, map[c], v);
        }
    }
    (b.build(), map)
}

fn keep_square(m: &CsrMatrix, keep: &[bool]) -> CsrMatrix {
    let (cols, map) = keep_columns(m, keep);
    let n = cols.ncols();
    let mut b = TripletBuilder::with_capacity(n, n, cols.nnz());
    for (r, c, v) in cols.iter() {
        if map[r] != usize::MAX {
            b.push(map[r], c, v);
        }
    }
    b.build()
}

impl SaddleBlocks {
    /// Restricts full operators to the velocity DOFs with `free[i] == true`.
    pub fn restrict(stiffness: &CsrMatrix, divergence: &CsrMatrix, pressure_mass: &CsrMatrix, free: &[bool]) -> Self {
        SaddleBlocks {
            stiffness: keep_square(stiffness, free),
            divergence: keep_columns(divergence, free).0,
            pressure_mass: pressure_mass.clone(),
        }
    }

    /// Taylor-Hood P2/P1 blocks of `system`.
    pub fn taylor_hood(system: &FeSystem) -> Self {
        let free: Vec<bool> = system.dirichlet_mask(Space::Velocity).iter().map(|d| !d).collect();
        Self::restrict(&system.velocity_stiffness(), system.divergence(), system.pressure_mass(), &free)
    }

    /// Equal-order P1/P1 blocks on `mesh`, a pair known to violate the inf-sup condition.
    pub fn equal_order_p1(mesh: &Mesh) -> Result<Self, FemError> {
        let nv = mesh.n_vertices();
        let mut a = TripletBuilder::new(nv, nv);
        let mut b = TripletBuilder::new(nv, 2 * nv);
        let mut m = TripletBuilder::new(nv, nv);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let geo = crate::fem::space::ElementGeometry::new(mesh.corners(t))
                .ok_or(FemError::DegenerateElement { triangle: t })?;
            let g = geo.grad_lambda;
            for i in 0..3 {
                for j in 0..3 {
                    a.push(tri[i], tri[j], geo.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
                    m.push(tri[i], tri[j], geo.area / 12.0 * if i == j { 2.0 } else { 1.0 });
                    for c in 0..2 {
                        b.push(tri[i], c * nv + tri[j], geo.area / 3.0 * g[j][c]);
                    }
                }
            }
        }
        let mut boundary = vec![false; nv];
        for e in mesh.boundary_edges() {
            boundary[e.vertices[0]] = true;
            boundary[e.vertices[1]] = true;
        }
        let free: Vec<bool> = boundary.iter().chain(&boundary).map(|b| !b).collect();
        Ok(Self::restrict(&a.build().block_diagonal(2), &b.build(), &m.build(), &free))
    }
}

/// `beta_h` for the Taylor-Hood pair of `system`.
pub fn estimate_inf_sup(system: &FeSystem) -> Result<InfSupEstimate, FemError> {
    estimate_inf_sup_blocks(&SaddleBlocks::taylor_hood(system))
}

fn m_dot(m: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    m.bilinear(x, y)
}

/// Removes the `M`-components along the `M`-orthonormal vectors in `basis`, twice.
fn deflate(m: &CsrMatrix, x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for d in basis {
            let c = m_dot(m, d, x);
            x.iter_mut().zip(d).for_each(|(xi, di)| *xi -= c * di);
        }
    }
}

fn m_normalize(m: &CsrMatrix, x: &mut [f64]) -> f64 {
    let n = m_dot(m, x, x).max(0.0).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Smallest nonzero `sqrt(lambda)` of `S q = lambda M_p q`.
pub fn estimate_inf_sup_blocks(blocks: &SaddleBlocks) -> Result<InfSupEstimate, FemError> {
    let nf = blocks.stiffness.nrows();
    let np = blocks.pressure_mass.nrows();
    if nf == 0 {
        return Err(FemError::InfSup("no free velocity DOFs; the mesh is too coarse".into()));
    }
    if np < 2 {
        return Err(FemError::InfSup("pressure space has no mean-free functions".into()));
    }
    let mp = &blocks.pressure_mass;
    let mut k = TripletBuilder::with_capacity(nf + np, nf + np, blocks.stiffness.nnz() + 2 * blocks.divergence.nnz() + mp.nnz());
    k.push_block(0, 0, &blocks.stiffness, 1.0);
    k.push_block(nf, 0, &blocks.divergence, 1.0);
    k.push_block_transposed(0, nf, &blocks.divergence, 1.0);
    k.push_block(nf, nf, mp, -SHIFT);
    let lu = SparseLu::factor(&k.build())?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut rhs = vec![0.0; nf + np];
        let mx = mp.mul_vec(x);
        rhs[nf..].iter_mut().zip(&mx).for_each(|(r, v)| *r = -v);
        lu.solve(&rhs)[nf..].to_vec()
    };

    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut constant = vec![1.0; np];
    m_normalize(mp, &mut constant);
    locked.push(constant);

    let block = BLOCK.min(np - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1f5u64);
    let mut random_vector = |locked: &[Vec<f64>]| {
        let mut x: Vec<f64> = (0..np).map(|_| rng.random::<f64>() - 0.5).collect();
        deflate(mp, &mut x, locked);
        x
    };
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| random_vector(&locked)).collect();
    orthonormalize(mp, &mut x, &locked);

    let mut previous = f64::NAN;
    for iter in 1..=MAX_ITERS {
        let y: Vec<Vec<f64>> = x.iter().map(|xi| apply(xi)).collect();
        let b = x.len();
        let h = Mat::<f64>::from_fn(b, b, |i, j| 0.5 * (m_dot(mp, &x[i], &y[j]) + m_dot(mp, &x[j], &y[i])));
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| FemError::InfSup(format!("{e:?}")))?;
        let s = evd.S();
        let u = evd.U();
        // Largest mu first: mu = 1 / (lambda + eps).
        let order: Vec<usize> = (0..b).rev().collect();
        let mut ritz: Vec<(f64, Vec<f64>)> = Vec::with_capacity(b);
        for &c in &order {
            let mu = s[c];
            let mut v = vec![0.0; np];
            for (r, yr) in y.iter().enumerate() {
                let w = u[(r, c)];
                v.iter_mut().zip(yr).for_each(|(vi, yi)| *vi += w * yi);
            }
            let lambda = if mu > 0.0 { 1.0 / mu - SHIFT } else { f64::INFINITY };
            ritz.push((lambda, v));
        }
        let mut next = Vec::with_capacity(b);
        let mut newly_locked = false;
        for (lambda, mut v) in ritz.iter().cloned() {
            if lambda < KERNEL_THRESHOLD {
                deflate(mp, &mut v, &locked);
                if m_normalize(mp, &mut v) > 0.0 {
                    locked.push(v);
                    newly_locked = true;
                }
            } else {
                next.push(v);
            }
        }
        let room = np.saturating_sub(locked.len());
        if room == 0 {
            return Err(FemError::InfSup("every pressure mode lies in the kernel".into()));
        }
        next.truncate(room);
        while next.len() < b.min(room) {
            next.push(random_vector(&locked));
        }
        orthonormalize(mp, &mut next, &locked);
        x = next;
        let lambda_min = ritz.iter().map(|r| r.0).filter(|&l| l >= KERNEL_THRESHOLD).fold(f64::INFINITY, f64::min);
        if !newly_locked && lambda_min.is_finite() && (lambda_min - previous).abs() <= TOL * lambda_min {
            return Ok(InfSupEstimate { beta: lambda_min.sqrt(), kernel_dim: locked.len() - 1, iterations: iter });
        }
        previous = if newly_locked { f64::NAN } else { lambda_min };
    }
    Err(FemError::InfSup(format!("no convergence after {MAX_ITERS} iterations")))
}

/// Modified Gram-Schmidt in the `M` inner product, after deflating `locked`.
fn orthonormalize(m: &CsrMatrix, x: &mut [Vec<f64>], locked: &[Vec<f64>]) {
    for i in 0..x.len() {
        let (done, rest) = x.split_at_mut(i);
        let xi = &mut rest[0];
        for _ in 0..2 {
            deflate(m, xi, locked);
            for d in done.iter() {
                let c = m_dot(m, d, xi);
                xi.iter_mut().zip(d).for_each(|(a, b)| *a -= c * b);
            }
        }
        m_normalize(m, xi);
    }
}
