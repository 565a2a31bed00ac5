//! Lagrange P1/P2 shape functions in barycentric coordinates.
//!
//! Local P2 ordering: vertices 0, 1, 2, then the edges opposite vertices
//! 0, 1, 2, i.e. (1,2), (2,0), (0,1).

use crate::geometry::mesh::{signed_area, Point};

#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub pts: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(pts: [Point; 3]) -> Self {
        let area = signed_area(pts[0], pts[1], pts[2]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            grad_lambda[i] = [
                (pts[j][1] - pts[k][1]) / (2.0 * area),
                (pts[k][0] - pts[j][0]) / (2.0 * area),
            ];
        }
        Self { pts, area, grad_lambda }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        [
            l[0] * self.pts[0][0] + l[1] * self.pts[1][0] + l[2] * self.pts[2][0],
            l[0] * self.pts[0][1] + l[1] * self.pts[1][1] + l[2] * self.pts[2][1],
        ]
    }

    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let l1 = signed_area(self.pts[0], p, self.pts[2]) / self.area;
        let l2 = signed_area(self.pts[0], self.pts[1], p) / self.area;
        [1.0 - l1 - l2, l1, l2]
    }
}

pub fn local_dofs(order: usize) -> usize {
    if order == 1 {
        3
    } else {
        6
    }
}

pub fn values(order: usize, l: [f64; 3]) -> [f64; 6] {
    if order == 1 {
        return [l[0], l[1], l[2], 0.0, 0.0, 0.0];
    }
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

pub fn gradients(order: usize, el: &Element, l: [f64; 3]) -> [[f64; 2]; 6] {
    let g = &el.grad_lambda;
    let mut out = [[0.0; 2]; 6];
    if order == 1 {
        out[..3].copy_from_slice(g);
        return out;
    }
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
    }
    for (slot, (a, b)) in [(3, (1, 2)), (4, (2, 0)), (5, (0, 1))] {
        out[slot] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    out
}

/// Shape values along a boundary edge at parameter `t ∈ [0,1]` from its first
/// to its second vertex, ordered (first, second, midpoint).
pub fn edge_values(order: usize, t: f64) -> [f64; 3] {
    let (a, b) = (1.0 - t, t);
    if order == 1 {
        [a, b, 0.0]
    } else {
        [a * (2.0 * a - 1.0), b * (2.0 * b - 1.0), 4.0 * a * b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_partition_of_unity_and_nodal() {
        let l = [0.2, 0.3, 0.5];
        let v = values(2, l);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let nodes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
        for (i, n) in nodes.iter().enumerate() {
            let v = values(2, *n);
            for (j, &vj) in v.iter().enumerate() {
                assert!((vj - f64::from(u8::from(i == j))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_sum_to_zero() {
        let el = Element::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]);
        for order in [1, 2] {
            let g = gradients(order, &el, [0.1, 0.6, 0.3]);
            let sx: f64 = g.iter().map(|v| v[0]).sum();
            let sy: f64 = g.iter().map(|v| v[1]).sum();
            assert!(sx.abs() < 1e-14 && sy.abs() < 1e-14);
        }
    }

    #[test]
    fn barycentric_round_trip() {
        let el = Element::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]);
        let l = [0.25, 0.35, 0.4];
        let back = el.barycentric(el.point(l));
        for k in 0..3 {
            assert!((back[k] - l[k]).abs() < 1e-14);
        }
    }
}
