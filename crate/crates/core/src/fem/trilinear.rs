//! Skew-symmetrised convection forms
//! `b(u, v, w) = 1/2 (u . grad v, w) - 1/2 (u . grad w, v)` and its scalar
//! counterpart `b*(u, T, S)`.

use crate::fem::space::{p2_gradients, p2_values};
use crate::fem::sparse::{CsrMatrix, TripletBuilder};
use crate::fem::system::{FeSystem, FieldVector, Space};
use crate::fem::FemError;

impl FeSystem {
    /// Values of the velocity `adv` at the quadrature points of triangle `t`.
    fn velocity_at_points(&self, adv: &[f64], t: usize) -> Vec<[f64; 2]> {
        let n = self.n_p2();
        let cell = self.dofs().cells[t];
        self.quadrature()
            .points
            .iter()
            .map(|l| {
                let phi = p2_values(*l);
                let mut a = [0.0; 2];
                for (k, &i) in cell.iter().enumerate() {
                    a[0] += adv[i] * phi[k];
                    a[1] += adv[n + i] * phi[k];
                }
                a
            })
            .collect()
    }

    /// Scalar P2 matrix `N` with `S^T N T = b*(adv, T, S)`; antisymmetric.
    ///
    /// The sparsity pattern is that of the mass matrix regardless of `adv`.
    pub fn trilinear_b_star_matrix(&self, adv: &FieldVector) -> Result<CsrMatrix, FemError> {
        self.check(adv, Space::Velocity)?;
        let n = self.n_p2();
        let mut b = TripletBuilder::with_capacity(n, n, 36 * self.mesh().n_triangles());
        for (t, geo) in self.geometry().iter().enumerate() {
            let cell = self.dofs().cells[t];
            let a_q = self.velocity_at_points(adv.coeffs(), t);
            // c[i][j] = 1/2 (adv . grad phi_j, phi_i)
            let mut c = [[0.0; 6]; 6];
            for ((l, w), a) in self.quadrature().points.iter().zip(&self.quadrature().weights).zip(&a_q) {
                let wq = 0.5 * w * geo.area;
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &geo.grad_lambda);
                for j in 0..6 {
                    let conv = a[0] * dphi[j][0] + a[1] * dphi[j][1];
                    for i in 0..6 {
                        c[i][j] += wq * conv * phi[i];
                    }
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    b.push(cell[i], cell[j], c[i][j] - c[j][i]);
                }
            }
        }
        Ok(b.build())
    }

    /// Velocity matrix `blockdiag(N, N)` with `w^T N v = b(adv, v, w)`.
    pub fn trilinear_b_matrix(&self, adv: &FieldVector) -> Result<CsrMatrix, FemError> {
        Ok(self.trilinear_b_star_matrix(adv)?.block_diagonal(2))
    }

    /// `b*(adv, t, s)` evaluated directly by quadrature.
    pub fn trilinear_b_star(&self, adv: &FieldVector, t: &FieldVector, s: &FieldVector) -> Result<f64, FemError> {
        self.check(adv, Space::Velocity)?;
        self.check(t, Space::Temperature)?;
        self.check(s, Space::Temperature)?;
        Ok(self.skew_form(adv.coeffs(), &[t.coeffs()], &[s.coeffs()]))
    }

    /// `b(adv, v, w)` evaluated directly by quadrature.
    pub fn trilinear_b(&self, adv: &FieldVector, v: &FieldVector, w: &FieldVector) -> Result<f64, FemError> {
        self.check(adv, Space::Velocity)?;
        self.check(v, Space::Velocity)?;
        self.check(w, Space::Velocity)?;
        let n = self.n_p2();
        let (vc, wc) = (v.coeffs(), w.coeffs());
        Ok(self.skew_form(adv.coeffs(), &[&vc[..n], &vc[n..]], &[&wc[..n], &wc[n..]]))
    }

    /// `1/2 sum_c (adv . grad v_c, w_c) - (adv . grad w_c, v_c)` over scalar P2 components.
    fn skew_form(&self, adv: &[f64], v: &[&[f64]], w: &[&[f64]]) -> f64 {
        let mut total = 0.0;
        for (t, geo) in self.geometry().iter().enumerate() {
            let cell = self.dofs().cells[t];
            let a_q = self.velocity_at_points(adv, t);
            let mut elem = 0.0;
            for ((l, wt), a) in self.quadrature().points.iter().zip(&self.quadrature().weights).zip(&a_q) {
                let phi = p2_values(*l);
                let dphi = p2_gradients(*l, &geo.grad_lambda);
                let mut point = 0.0;
                for (vc, wc) in v.iter().zip(w) {
                    let (mut vv, mut ww) = (0.0, 0.0);
                    let (mut gv, mut gw) = ([0.0; 2], [0.0; 2]);
                    for k in 0..6 {
                        let (x, y) = (vc[cell[k]], wc[cell[k]]);
                        vv += x * phi[k];
                        ww += y * phi[k];
                        gv[0] += x * dphi[k][0];
                        gv[1] += x * dphi[k][1];
                        gw[0] += y * dphi[k][0];
                        gw[1] += y * dphi[k][1];
                    }
                    let conv_v = a[0] * gv[0] + a[1] * gv[1];
                    let conv_w = a[0] * gw[0] + a[1] * gw[1];
                    point += conv_v * ww - conv_w * vv;
                }
                elem += wt * point;
            }
            total += 0.5 * geo.area * elem;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use crate::fem::system::{build_fe_system, Space};
    use crate::mesh::{generate_graded_mesh, CavityPreset, GradingParams};

    fn system() -> crate::fem::system::FeSystem {
        let params = GradingParams { n_core: 4, delta: 0.05, n_layers: 2, stretch: 2.0 };
        let mesh = generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap();
        build_fe_system(&mesh).unwrap()
    }

    #[test]
    fn zero_advection_gives_zero_matrix() {
        let sys = system();
        let n = sys.trilinear_b_star_matrix(&sys.zeros(Space::Velocity)).unwrap();
        assert!(n.values().iter().all(|&v| v == 0.0));
        assert_eq!(n.nnz(), sys.mass().nnz());
    }

    #[test]
    fn matrix_matches_scalar_form() {
        let sys = system();
        let adv = sys.interpolate_velocity(|x| [x[1] * (1.0 - x[1]), x[0].sin()]);
        let t = sys.interpolate_scalar(Space::Temperature, |x| x[0] * x[0] - x[1]);
        let s = sys.interpolate_scalar(Space::Temperature, |x| (3.0 * x[0] * x[1]).cos());
        let n = sys.trilinear_b_star_matrix(&adv).unwrap();
        let direct = sys.trilinear_b_star(&adv, &t, &s).unwrap();
        let via = n.bilinear(s.coeffs(), t.coeffs());
        assert!((direct - via).abs() < 1e-13 * direct.abs().max(1.0), "{direct} vs {via}");
    }

    #[test]
    fn matrix_is_exactly_antisymmetric() {
        let sys = system();
        let adv = sys.interpolate_velocity(|x| [x[0] + x[1], x[0] * x[1]]);
        let n = sys.trilinear_b_star_matrix(&adv).unwrap();
        for (r, c, v) in n.iter() {
            assert_eq!(v, -n.get(c, r));
        }
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let sys = system();
        let t = sys.zeros(Space::Temperature);
        assert!(sys.trilinear_b_star_matrix(&t).is_err());
    }
}
