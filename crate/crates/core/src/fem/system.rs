//! The discrete function spaces and all constant operators.

use crate::fem::quadrature::QuadratureRule;
use crate::fem::sparse::{CsrMatrix, TripletBuilder};
use crate::fem::space::{p2_gradients, p2_values, ElementGeometry, P2DofMap};
use crate::fem::FemError;
use crate::mesh::{BoundaryTag, Mesh};

/// Which discrete space a coefficient vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// Continuous P2, two components stored component-major: all `x` coefficients, then all `y`.
    Velocity,
    /// Continuous P1 on the mesh vertices.
    Pressure,
    /// Continuous P2.
    Temperature,
}

/// Coefficients of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    space: Space,
    coeffs: Vec<f64>,
}

impl FieldVector {
    pub fn new(space: Space, coeffs: Vec<f64>) -> FieldVector {
        FieldVector { space, coeffs }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &FieldVector, b: f64) -> FieldVector {
        assert_eq!(self.space, other.space, "combining fields from different spaces");
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        FieldVector { space: self.space, coeffs }
    }

    pub fn sub(&self, other: &FieldVector) -> FieldVector {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const TAG_N: u8 = 1;
const TAG_H: u8 = 2;
const TAG_2: u8 = 4;

fn tag_bit(tag: BoundaryTag) -> u8 {
    match tag {
        BoundaryTag::GammaN => TAG_N,
        BoundaryTag::GammaH => TAG_H,
        BoundaryTag::Gamma2 => TAG_2,
    }
}

/// Taylor-Hood P2/P1 velocity-pressure pair plus P2 temperature on one mesh.
#[derive(Debug, Clone)]
pub struct FeSystem {
    mesh: Mesh,
    dofs: P2DofMap,
    geometry: Vec<ElementGeometry>,
    quadrature: QuadratureRule,
    node_tags: Vec<u8>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    pressure_mass: CsrMatrix,
    divergence: CsrMatrix,
    pressure_integrals: Vec<f64>,
    p2_integrals: Vec<f64>,
}

/// Builds the spaces and assembles mass, stiffness and divergence operators.
pub fn build_fe_system(mesh: &Mesh) -> Result<FeSystem, FemError> {
    FeSystem::new(mesh.clone())
}

impl FeSystem {
    pub fn new(mesh: Mesh) -> Result<FeSystem, FemError> {
        let geometry = (0..mesh.n_triangles())
            .map(|t| ElementGeometry::new(mesh.corners(t)).ok_or(FemError::DegenerateElement { triangle: t }))
            .collect::<Result<Vec<_>, _>>()?;
        let dofs = P2DofMap::new(&mesh);
        let mut node_tags = vec![0u8; dofs.n_nodes()];
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices;
            let bit = tag_bit(e.tag);
            node_tags[a] |= bit;
            node_tags[b] |= bit;
            match dofs.midpoint_node(a, b) {
                Some(m) => node_tags[m] |= bit,
                None => return Err(FemError::DanglingBoundaryEdge { vertices: [a, b] }),
            }
        }
        let quadrature = QuadratureRule::degree5();
        let n = dofs.n_nodes();
        let np = mesh.n_vertices();
        let mut mass = TripletBuilder::with_capacity(n, n, 36 * geometry.len());
        let mut stiff = TripletBuilder::with_capacity(n, n, 36 * geometry.len());
        let mut pmass = TripletBuilder::with_capacity(np, np, 9 * geometry.len());
        let mut div = TripletBuilder::with_capacity(np, 2 * n, 36 * geometry.len());
        let mut pressure_integrals = vec![0.0; np];
        let mut p2_integrals = vec![0.0; n];
        for (t, geo) in geometry.iter().enumerate() {
            let cell = dofs.cells[t];
            let tri = mesh.triangles()[t];
            let mut me = [[0.0; 6]; 6];
            let mut ae = [[0.0; 6]; 6];
            let mut pe = [[0.0; 3]; 3];
            let mut be = [[[0.0; 6]; 2]; 3];
            let mut qe = [0.0; 3];
            let mut ie = [0.0; 6];
            for (l, w) in quadrature.points.iter().zip(&quadrature.weights) {
                let wq = w * geo.area;
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &geo.grad_lambda);
                for i in 0..6 {
                    ie[i] += wq * phi[i];
                    for j in 0..6 {
                        me[i][j] += wq * phi[i] * phi[j];
                        ae[i][j] += wq * (dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1]);
                    }
                }
                for q in 0..3 {
                    qe[q] += wq * l[q];
                    for r in 0..3 {
                        pe[q][r] += wq * l[q] * l[r];
                    }
                    for c in 0..2 {
                        for j in 0..6 {
                            be[q][c][j] += wq * l[q] * dphi[j][c];
                        }
                    }
                }
            }
            for i in 0..6 {
                p2_integrals[cell[i]] += ie[i];
                for j in 0..6 {
                    mass.push(cell[i], cell[j], me[i][j]);
                    stiff.push(cell[i], cell[j], ae[i][j]);
                }
            }
            for q in 0..3 {
                pressure_integrals[tri[q]] += qe[q];
                for r in 0..3 {
                    pmass.push(tri[q], tri[r], pe[q][r]);
                }
                for c in 0..2 {
                    for j in 0..6 {
                        div.push(tri[q], c * n + cell[j], be[q][c][j]);
                    }
                }
            }
        }
        Ok(FeSystem {
            mesh,
            dofs,
            geometry,
            quadrature,
            node_tags,
            mass: mass.build(),
            stiffness: stiff.build(),
            pressure_mass: pmass.build(),
            divergence: div.build(),
            pressure_integrals,
            p2_integrals,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dofs(&self) -> &P2DofMap {
        &self.dofs
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    /// Number of P2 nodes (one scalar DOF each).
    pub fn n_p2(&self) -> usize {
        self.dofs.n_nodes()
    }

    pub fn n_dofs(&self, space: Space) -> usize {
        match space {
            Space::Velocity => 2 * self.n_p2(),
            Space::Pressure => self.mesh.n_vertices(),
            Space::Temperature => self.n_p2(),
        }
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.dofs.coords
    }

    /// Coordinates of each DOF of `space`; velocity lists every node twice.
    pub fn dof_coords(&self, space: Space) -> Vec<[f64; 2]> {
        match space {
            Space::Velocity => self.dofs.coords.iter().chain(&self.dofs.coords).copied().collect(),
            Space::Pressure => self.mesh.vertices().to_vec(),
            Space::Temperature => self.dofs.coords.clone(),
        }
    }

    /// P2 node lies on the boundary.
    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.node_tags[node] != 0
    }

    /// P2 node lies on a `GammaN` or `GammaH` edge; corners shared with `Gamma2` count.
    pub fn is_temperature_dirichlet(&self, node: usize) -> bool {
        self.node_tags[node] & (TAG_N | TAG_H) != 0
    }

    pub fn node_on(&self, node: usize, tag: BoundaryTag) -> bool {
        self.node_tags[node] & tag_bit(tag) != 0
    }

    /// Dirichlet mask over the DOFs of `space`. Pressure has none.
    pub fn dirichlet_mask(&self, space: Space) -> Vec<bool> {
        match space {
            Space::Velocity => {
                let m: Vec<bool> = (0..self.n_p2()).map(|i| self.is_boundary_node(i)).collect();
                m.iter().chain(&m).copied().collect()
            }
            Space::Pressure => vec![false; self.mesh.n_vertices()],
            Space::Temperature => (0..self.n_p2()).map(|i| self.is_temperature_dirichlet(i)).collect(),
        }
    }

    pub fn temperature_dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_p2()).filter(|&i| self.is_temperature_dirichlet(i)).collect()
    }

    /// Nodal temperature data `T = 1` on `GammaN`, `T = 0` on `GammaH`.
    pub fn heated_wall_data(&self) -> Result<Vec<(usize, f64)>, FemError> {
        self.temperature_wall_data(1.0, 0.0)
    }

    /// Nodal temperature data with constant values on each Dirichlet wall.
    pub fn temperature_wall_data(&self, hot: f64, cold: f64) -> Result<Vec<(usize, f64)>, FemError> {
        let mut out = Vec::new();
        for i in 0..self.n_p2() {
            let tags = self.node_tags[i];
            match (tags & TAG_N != 0, tags & TAG_H != 0) {
                (true, true) if hot != cold => return Err(FemError::ConflictingBoundaryData { node: i }),
                (true, _) => out.push((i, hot)),
                (false, true) => out.push((i, cold)),
                _ => {}
            }
        }
        Ok(out)
    }

    /// Scalar P2 mass matrix `M_ij = (phi_j, phi_i)`.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Scalar P2 stiffness matrix `A_ij = (grad phi_j, grad phi_i)`.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// P1 pressure mass matrix.
    pub fn pressure_mass(&self) -> &CsrMatrix {
        &self.pressure_mass
    }

    /// `B_qj = (psi_q, div phi_j)`, pressure rows by velocity columns.
    pub fn divergence(&self) -> &CsrMatrix {
        &self.divergence
    }

    /// `m_q = integral of psi_q`; `m . p` is the integral of the pressure.
    pub fn pressure_integrals(&self) -> &[f64] {
        &self.pressure_integrals
    }

    /// Integrals of the scalar P2 basis functions.
    pub fn p2_integrals(&self) -> &[f64] {
        &self.p2_integrals
    }

    /// Velocity mass `blockdiag(M, M)`.
    pub fn velocity_mass(&self) -> CsrMatrix {
        self.mass.block_diagonal(2)
    }

    /// Velocity stiffness `blockdiag(A, A)`.
    pub fn velocity_stiffness(&self) -> CsrMatrix {
        self.stiffness.block_diagonal(2)
    }

    /// `G` with `v^T G T = (xi T, v)`, velocity rows by temperature columns.
    pub fn buoyancy_matrix(&self, xi: [f64; 2]) -> CsrMatrix {
        let n = self.n_p2();
        let mut b = TripletBuilder::with_capacity(2 * n, n, 2 * self.mass.nnz());
        b.push_block(0, 0, &self.mass, xi[0]);
        b.push_block(n, 0, &self.mass, xi[1]);
        b.build()
    }

    pub fn zeros(&self, space: Space) -> FieldVector {
        FieldVector::new(space, vec![0.0; self.n_dofs(space)])
    }

    pub fn check(&self, field: &FieldVector, space: Space) -> Result<(), FemError> {
        if field.space() != space {
            return Err(FemError::SpaceMismatch { expected: space, found: field.space() });
        }
        if field.len() != self.n_dofs(space) {
            return Err(FemError::LengthMismatch { expected: self.n_dofs(space), found: field.len() });
        }
        Ok(())
    }

    pub fn interpolate_scalar(&self, space: Space, f: impl Fn([f64; 2]) -> f64) -> FieldVector {
        assert!(space != Space::Velocity, "use interpolate_velocity for vector fields");
        FieldVector::new(space, self.dof_coords(space).into_iter().map(f).collect())
    }

    pub fn interpolate_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> FieldVector {
        let n = self.n_p2();
        let mut c = vec![0.0; 2 * n];
        for (i, x) in self.dofs.coords.iter().enumerate() {
            let v = f(*x);
            c[i] = v[0];
            c[n + i] = v[1];
        }
        FieldVector::new(Space::Velocity, c)
    }

    /// `(g, phi_i)` on P2 nodes by the element quadrature rule.
    pub fn load_scalar(&self, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut load = vec![0.0; self.n_p2()];
        self.for_each_quadrature_point(|cell, x, w, phi| {
            let gv = g(x) * w;
            for (i, p) in cell.iter().zip(phi) {
                load[*i] += gv * p;
            }
        });
        load
    }

    /// `(f, phi_i e_c)` on velocity DOFs.
    pub fn load_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let n = self.n_p2();
        let mut load = vec![0.0; 2 * n];
        self.for_each_quadrature_point(|cell, x, w, phi| {
            let fv = f(x);
            for (i, p) in cell.iter().zip(phi) {
                load[*i] += w * fv[0] * p;
                load[n + *i] += w * fv[1] * p;
            }
        });
        load
    }

    /// Visits `(cell dofs, point, weight * area, P2 values)` for every quadrature point.
    fn for_each_quadrature_point(&self, mut visit: impl FnMut(&[usize; 6], [f64; 2], f64, [f64; 6])) {
        for (k, geo) in self.geometry.iter().enumerate() {
            let c = self.mesh.corners(k);
            for (l, w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
                let x = [
                    l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
                    l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
                ];
                visit(&self.dofs.cells[k], x, w * geo.area, p2_values(*l));
            }
        }
    }

    /// `(a, b)` in L2 using the mass matrix of the field's space.
    pub fn l2_inner(&self, a: &FieldVector, b: &FieldVector) -> f64 {
        assert_eq!(a.space(), b.space());
        match a.space() {
            Space::Velocity => {
                let n = self.n_p2();
                self.mass.bilinear(&a.coeffs()[..n], &b.coeffs()[..n])
                    + self.mass.bilinear(&a.coeffs()[n..], &b.coeffs()[n..])
            }
            Space::Pressure => self.pressure_mass.bilinear(a.coeffs(), b.coeffs()),
            Space::Temperature => self.mass.bilinear(a.coeffs(), b.coeffs()),
        }
    }

    /// `(grad a, grad b)`.
    pub fn grad_inner(&self, a: &FieldVector, b: &FieldVector) -> f64 {
        assert_eq!(a.space(), b.space());
        match a.space() {
            Space::Velocity => {
                let n = self.n_p2();
                self.stiffness.bilinear(&a.coeffs()[..n], &b.coeffs()[..n])
                    + self.stiffness.bilinear(&a.coeffs()[n..], &b.coeffs()[n..])
            }
            Space::Temperature => self.stiffness.bilinear(a.coeffs(), b.coeffs()),
            Space::Pressure => panic!("pressure gradients are not assembled"),
        }
    }

    pub fn l2_norm(&self, a: &FieldVector) -> f64 {
        self.l2_inner(a, a).max(0.0).sqrt()
    }

    pub fn grad_norm(&self, a: &FieldVector) -> f64 {
        self.grad_inner(a, a).max(0.0).sqrt()
    }

    /// Integral of a scalar field over the domain.
    pub fn integral(&self, a: &FieldVector) -> f64 {
        match a.space() {
            Space::Pressure => crate::fem::sparse::dot(&self.pressure_integrals, a.coeffs()),
            Space::Temperature => crate::fem::sparse::dot(&self.p2_integrals, a.coeffs()),
            Space::Velocity => panic!("integral of a vector field"),
        }
    }

    /// Euclidean norm of `B u`, the discrete divergence residual.
    pub fn divergence_residual(&self, u: &FieldVector) -> f64 {
        crate::fem::sparse::norm2(&self.divergence.mul_vec(u.coeffs()))
    }

    /// Evaluates a P2 field (scalar, or one velocity component) at barycentric
    /// point `l` of triangle `t`.
    pub fn eval_p2(&self, coeffs: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let phi = p2_values(l);
        self.dofs.cells[t].iter().zip(phi).map(|(&i, p)| coeffs[i] * p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_uniform_mesh, CavityPreset};

    fn square(n: usize) -> FeSystem {
        let mesh = generate_uniform_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), n).unwrap();
        build_fe_system(&mesh).unwrap()
    }

    #[test]
    fn dof_counts() {
        let sys = square(2);
        // 9 vertices, 16 edges on the 2x2 crossed mesh.
        assert_eq!(sys.n_dofs(Space::Pressure), 9);
        assert_eq!(sys.n_dofs(Space::Velocity), 2 * (9 + 16));
        assert_eq!(sys.n_dofs(Space::Temperature), 25);
    }

    #[test]
    fn constants_against_mass_and_stiffness() {
        let sys = square(3);
        let one = sys.interpolate_scalar(Space::Temperature, |_| 1.0);
        assert!(sys.grad_inner(&one, &one).abs() < 1e-13);
        assert!((sys.l2_inner(&one, &one) - 1.0).abs() < 1e-14);
        let p = sys.interpolate_scalar(Space::Pressure, |_| 1.0);
        assert!((sys.l2_inner(&p, &p) - 1.0).abs() < 1e-14);
        assert!((sys.integral(&p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn operators_are_symmetric() {
        let sys = square(4);
        assert!(sys.mass().symmetry_defect() < 1e-13);
        assert!(sys.stiffness().symmetry_defect() < 1e-13);
        assert!(sys.pressure_mass().symmetry_defect() < 1e-13);
    }

    #[test]
    fn quadratic_fields_integrate_exactly() {
        let sys = square(3);
        let f = sys.interpolate_scalar(Space::Temperature, |x| x[0] * x[0] + x[0] * x[1]);
        // (x^2 + xy)^2 = x^4 + 2x^3 y + x^2 y^2.
        let exact = 1.0 / 5.0 + 2.0 / 8.0 + 1.0 / 9.0;
        assert!((sys.l2_inner(&f, &f) - exact).abs() < 1e-13);
        // |grad f|^2 = 5x^2 + 4xy + y^2.
        let g = 5.0 / 3.0 + 1.0 + 1.0 / 3.0;
        assert!((sys.grad_inner(&f, &f) - g).abs() < 1e-12, "{} vs {g}", sys.grad_inner(&f, &f));
    }

    #[test]
    fn divergence_of_interpolated_field() {
        let sys = square(3);
        // u = (x^2, -2xy) is divergence free; q = 1 + x.
        let u = sys.interpolate_velocity(|x| [x[0] * x[0], -2.0 * x[0] * x[1]]);
        let bu = sys.divergence().mul_vec(u.coeffs());
        assert!(bu.iter().all(|v| v.abs() < 1e-14));
        // u = (x y, 0): div = y; (1, y) = 1/2.
        let u = sys.interpolate_velocity(|x| [x[0] * x[1], 0.0]);
        let one = vec![1.0; sys.n_dofs(Space::Pressure)];
        assert!((crate::fem::sparse::dot(&one, &sys.divergence().mul_vec(u.coeffs())) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn heated_wall_data_tags_corners_as_dirichlet() {
        let sys = square(2);
        let data = sys.heated_wall_data().unwrap();
        for (i, v) in &data {
            let x = sys.node_coords()[*i];
            if x[0] == 0.0 {
                assert_eq!(*v, 1.0);
            } else {
                assert_eq!(x[0], 1.0);
                assert_eq!(*v, 0.0);
            }
        }
        // 5 nodes per vertical wall.
        assert_eq!(data.len(), 10);
    }
}
