//! Degree-of-freedom maps and reference basis functions.
//!
//! P2 nodes are numbered vertices first, then edge midpoints in order of first
//! appearance while walking triangles `0..m` and their local edges `(0,1)`,
//! `(1,2)`, `(2,0)`. The local P2 ordering on a triangle is
//! `v0, v1, v2, m01, m12, m20`, the same as the VTK quadratic triangle.

use std::collections::HashMap;

use crate::mesh::Mesh;

/// Local vertex pairs of the three edges of a triangle.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[derive(Debug, Clone, PartialEq)]
pub struct P2DofMap {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub cells: Vec<[usize; 6]>,
    pub coords: Vec<[f64; 2]>,
    edge_index: HashMap<[usize; 2], usize>,
}

impl P2DofMap {
    pub fn new(mesh: &Mesh) -> P2DofMap {
        let nv = mesh.n_vertices();
        let mut edge_index = HashMap::new();
        let mut edges = Vec::new();
        let mut cells = Vec::with_capacity(mesh.n_triangles());
        for tri in mesh.triangles() {
            let mut cell = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (k, [i, j]) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (tri[*i], tri[*j]);
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                cell[3 + k] = nv + e;
            }
            cells.push(cell);
        }
        let mut coords = mesh.vertices().to_vec();
        for [a, b] in &edges {
            let (pa, pb) = (mesh.vertices()[*a], mesh.vertices()[*b]);
            coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        P2DofMap { n_vertices: nv, edges, cells, coords, edge_index }
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// P2 node at the midpoint of the edge between two vertices, if that edge exists.
    pub fn midpoint_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&[a.min(b), a.max(b)]).map(|e| self.n_vertices + e)
    }
}

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    /// `None` when the signed area is not positive.
    pub fn new(c: [[f64; 2]; 3]) -> Option<ElementGeometry> {
        let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        let grad_lambda = [
            [(c[1][1] - c[2][1]) * inv, (c[2][0] - c[1][0]) * inv],
            [(c[2][1] - c[0][1]) * inv, (c[0][0] - c[2][0]) * inv],
            [(c[0][1] - c[1][1]) * inv, (c[1][0] - c[0][0]) * inv],
        ];
        Some(ElementGeometry { area: 0.5 * det, grad_lambda })
    }
}

/// P2 basis values at barycentric point `l`.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// P2 basis gradients at barycentric point `l`.
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (k, [i, j]) in LOCAL_EDGES.iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[*j] * g[*i][0] + l[*i] * g[*j][0]),
            4.0 * (l[*j] * g[*i][1] + l[*i] * g[*j][1]),
        ];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_basis_is_nodal() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (j, l) in nodes.iter().enumerate() {
            let v = p2_values(*l);
            for (i, vi) in v.iter().enumerate() {
                assert_eq!(*vi, if i == j { 1.0 } else { 0.0 }, "phi_{i} at node {j}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]];
        let geo = ElementGeometry::new(c).unwrap();
        let to_bary = |x: [f64; 2]| {
            let mut l = [0.0; 3];
            for i in 0..3 {
                let j = (i + 1) % 3;
                l[i] = geo.grad_lambda[i][0] * (x[0] - c[j][0]) + geo.grad_lambda[i][1] * (x[1] - c[j][1]);
            }
            l
        };
        let x = [0.6, 0.5];
        let grads = p2_gradients(to_bary(x), &geo.grad_lambda);
        let h = 1e-6;
        for i in 0..6 {
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let fd = (p2_values(to_bary(xp))[i] - p2_values(to_bary(xm))[i]) / (2.0 * h);
                assert!((fd - grads[i][d]).abs() < 1e-7, "basis {i} dir {d}: {fd} vs {}", grads[i][d]);
            }
        }
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        assert!(ElementGeometry::new([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_none());
        assert!(ElementGeometry::new([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_none());
    }
}
