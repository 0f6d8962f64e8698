//! Symmetric 7-point triangle rule, exact for polynomials of degree 5.
//!
//! The highest-degree integrand assembled anywhere is the trilinear term
//! `P2 * grad P2 * P2`, which is degree 5, so one rule serves every operator.

/// Quadrature points in barycentric coordinates with weights normalised to sum to one.
/// The integral over a triangle `K` is `|K| * sum_q w_q f(x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn degree5() -> QuadratureRule {
        let s = 15f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let b1 = (9.0 + 2.0 * s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let b2 = (9.0 - 2.0 * s) / 21.0;
        let w0 = 9.0 / 40.0;
        let w1 = (155.0 - s) / 1200.0;
        let w2 = (155.0 + s) / 1200.0;
        let third = 1.0 / 3.0;
        QuadratureRule {
            points: vec![
                [third, third, third],
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![w0, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrates `f` over the triangle with corners `c`, where `f` receives physical coordinates.
    pub fn integrate(&self, c: [[f64; 2]; 3], f: impl Fn([f64; 2]) -> f64) -> f64 {
        let area = 0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]));
        let mut sum = 0.0;
        for (l, w) in self.points.iter().zip(&self.weights) {
            let x = [
                l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
                l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
            ];
            sum += w * f(x);
        }
        area.abs() * sum
    }
}
