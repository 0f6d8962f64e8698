//! Independent P2 evaluation: basis functions come from a monomial fit at the
//! six element nodes and integrals from a collapsed tensor Gauss-Legendre rule.
//! Nothing here reuses the library's basis or quadrature.

use boussinesq::fem::{FeSystem, FieldVector};
use nalgebra::{Matrix6, Vector6};

/// Gauss-Legendre nodes and weights on `[0, 1]`, 4 points (exact to degree 7).
fn gauss4() -> ([f64; 4], [f64; 4]) {
    let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let wa = (18.0 + 30f64.sqrt()) / 36.0;
    let wb = (18.0 - 30f64.sqrt()) / 36.0;
    let x = [-b, -a, a, b].map(|t| 0.5 * (t + 1.0));
    let w = [wb, wa, wa, wb].map(|t| 0.5 * t);
    (x, w)
}

/// Physical quadrature points and weights on a triangle, exact for degree <= 6.
pub fn triangle_rule(c: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss4();
    let jac = ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs();
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let s = x[i];
            let t = x[j] * (1.0 - s);
            let wt = w[i] * w[j] * (1.0 - s) * jac;
            let p = [
                c[0][0] + s * (c[1][0] - c[0][0]) + t * (c[2][0] - c[0][0]),
                c[0][1] + s * (c[1][1] - c[0][1]) + t * (c[2][1] - c[0][1]),
            ];
            out.push((p, wt));
        }
    }
    out
}

fn monomials(p: [f64; 2]) -> Vector6<f64> {
    Vector6::new(1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1])
}

fn monomial_gradients(p: [f64; 2]) -> [Vector6<f64>; 2] {
    [
        Vector6::new(0.0, 1.0, 0.0, 2.0 * p[0], p[1], 0.0),
        Vector6::new(0.0, 0.0, 1.0, 0.0, p[0], 2.0 * p[1]),
    ]
}

/// Local quadratic interpolant of one scalar P2 field on one triangle.
/// Monomials are taken in coordinates centred on the element and scaled by its size.
pub struct LocalQuadratic {
    coef: Vector6<f64>,
    centre: [f64; 2],
    scale: f64,
}

impl LocalQuadratic {
    fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.centre[0]) / self.scale, (p[1] - self.centre[1]) / self.scale]
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        self.coef.dot(&monomials(self.to_local(p)))
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let g = monomial_gradients(self.to_local(p));
        [self.coef.dot(&g[0]) / self.scale, self.coef.dot(&g[1]) / self.scale]
    }
}

/// Fits the quadratic through the six nodal values of triangle `t`.
pub fn local(system: &FeSystem, coeffs: &[f64], t: usize) -> LocalQuadratic {
    let cell = system.dofs().cells[t];
    let coords = system.node_coords();
    let c = system.mesh().corners(t);
    let centre = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
    let scale = system.mesh().diameter(t);
    let mut out = LocalQuadratic { coef: Vector6::zeros(), centre, scale };
    let mut v = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for (k, &i) in cell.iter().enumerate() {
        v.set_row(k, &monomials(out.to_local(coords[i])).transpose());
        rhs[k] = coeffs[i];
    }
    out.coef = v.lu().solve(&rhs).expect("degenerate P2 node set");
    out
}

fn split(system: &FeSystem, f: &FieldVector) -> Vec<Vec<f64>> {
    let n = system.n_p2();
    if f.len() == 2 * n {
        vec![f.coeffs()[..n].to_vec(), f.coeffs()[n..].to_vec()]
    } else {
        vec![f.coeffs().to_vec()]
    }
}

/// Integrates `g(adv, grad adv, v_c, grad v_c, w_c, grad w_c)` summed over components.
fn integrate_triple(
    system: &FeSystem,
    adv: &FieldVector,
    v: &FieldVector,
    w: &FieldVector,
    g: impl Fn([f64; 2], f64, f64, [f64; 2], f64, [f64; 2]) -> f64,
) -> f64 {
    let a = split(system, adv);
    let vs = split(system, v);
    let ws = split(system, w);
    let mut total = 0.0;
    for t in 0..system.mesh().n_triangles() {
        let ax = local(system, &a[0], t);
        let ay = local(system, &a[1], t);
        let vl: Vec<_> = vs.iter().map(|c| local(system, c, t)).collect();
        let wl: Vec<_> = ws.iter().map(|c| local(system, c, t)).collect();
        for (p, wt) in triangle_rule(system.mesh().corners(t)) {
            let av = [ax.value(p), ay.value(p)];
            let div = ax.gradient(p)[0] + ay.gradient(p)[1];
            for (vc, wc) in vl.iter().zip(&wl) {
                total += wt * g(av, div, vc.value(p), vc.gradient(p), wc.value(p), wc.gradient(p));
            }
        }
    }
    total
}

/// `(adv . grad v, w) + 1/2 ((div adv) v, w)`, for vector or scalar `v`, `w`.
pub fn convective_form(system: &FeSystem, adv: &FieldVector, v: &FieldVector, w: &FieldVector) -> f64 {
    integrate_triple(system, adv, v, w, |a, div, vv, gv, ww, _| (a[0] * gv[0] + a[1] * gv[1]) * ww + 0.5 * div * vv * ww)
}

/// `1/2 (adv . grad v, w) - 1/2 (adv . grad w, v)`, for vector or scalar `v`, `w`.
pub fn skew_form(system: &FeSystem, adv: &FieldVector, v: &FieldVector, w: &FieldVector) -> f64 {
    integrate_triple(system, adv, v, w, |a, _, vv, gv, ww, gw| {
        0.5 * (a[0] * gv[0] + a[1] * gv[1]) * ww - 0.5 * (a[0] * gw[0] + a[1] * gw[1]) * vv
    })
}

/// `|grad f|^2` summed over components.
pub fn grad_norm_sq(system: &FeSystem, f: &FieldVector) -> f64 {
    let mut total = 0.0;
    for c in split(system, f) {
        for t in 0..system.mesh().n_triangles() {
            let l = local(system, &c, t);
            for (p, wt) in triangle_rule(system.mesh().corners(t)) {
                let g = l.gradient(p);
                total += wt * (g[0] * g[0] + g[1] * g[1]);
            }
        }
    }
    total
}

/// `|f|^2` summed over components.
pub fn l2_norm_sq(system: &FeSystem, f: &FieldVector) -> f64 {
    let mut total = 0.0;
    for c in split(system, f) {
        for t in 0..system.mesh().n_triangles() {
            let l = local(system, &c, t);
            for (p, wt) in triangle_rule(system.mesh().corners(t)) {
                total += wt * l.value(p).powi(2);
            }
        }
    }
    total
}

/// `(adv . grad v, w)` and `1/2 ((div adv) v, w)` separately.
pub fn convective_parts(system: &FeSystem, adv: &FieldVector, v: &FieldVector, w: &FieldVector) -> (f64, f64) {
    let transport = integrate_triple(system, adv, v, w, |a, _, _, gv, ww, _| (a[0] * gv[0] + a[1] * gv[1]) * ww);
    let dilation = integrate_triple(system, adv, v, w, |_, div, vv, _, ww, _| 0.5 * div * vv * ww);
    (transport, dilation)
}
