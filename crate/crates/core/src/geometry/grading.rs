//! Geometric corner grading by longest-edge bisection.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::mesh::{
    point_segment_distance, point_triangle_distance, BoundaryEdge, BoundaryLabel, Mesh, Point,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingSpec {
    pub corner: Point,
    pub target_h_min: f64,
    pub ratio: f64,
    pub background_h: f64,
}

impl GradingSpec {
    pub fn new(corner: Point, target_h_min: f64, ratio: f64, background_h: f64) -> Result<Self> {
        let g = Self { corner, target_h_min, ratio, background_h };
        g.validate()?;
        Ok(g)
    }

    /// A grading that leaves any mesh with sizes `≤ background_h` untouched.
    pub fn none(corner: Point, background_h: f64) -> Self {
        Self { corner, target_h_min: background_h, ratio: 0.5, background_h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_h_min > 0.0 && self.target_h_min <= self.background_h) {
            return Err(Error::InvalidInput(format!(
                "grading target {} must lie in (0, background {}]",
                self.target_h_min, self.background_h
            )));
        }
        if !(0.3..=0.9).contains(&self.ratio) {
            return Err(Error::InvalidInput(format!("grading ratio {} outside [0.3, 0.9]", self.ratio)));
        }
        Ok(())
    }

    /// Largest admissible element diameter at distance `d` from the corner.
    pub fn allowed(&self, d: f64) -> f64 {
        let bg = self.background_h;
        if d >= bg {
            return f64::INFINITY;
        }
        let floor = self.target_h_min / bg;
        if d <= 0.0 {
            return bg * floor;
        }
        let level = ((d / bg).ln() / self.ratio.ln()).ceil();
        bg * self.ratio.powf(level).max(floor)
    }
}

/// Bisects triangles near `grading.corner` until every element satisfies
/// `diameter ≤ grading.allowed(distance to corner)`.
///
/// The longest edge of a marked triangle is always split first, and marks are
/// propagated so that the result stays conforming. New vertices on `Bottom`
/// edges are moved onto `mesh.bottom_curve` when one is attached.
pub fn refine_toward_corner(mesh: &Mesh, grading: &GradingSpec) -> Result<Mesh> {
    grading.validate()?;
    let on_boundary = mesh.boundary_edges.iter().any(|e| {
        let a = mesh.vertices[e.vertices[0]];
        let b = mesh.vertices[e.vertices[1]];
        point_segment_distance(grading.corner, a, b) <= 1e-9
    });
    if !on_boundary {
        return Err(Error::InvalidInput(format!(
            "grading corner {:?} is not on the mesh boundary",
            grading.corner
        )));
    }
    let mut m = mesh.clone();
    for _round in 0..200 {
        let marked: Vec<usize> = (0..m.triangles.len())
            .filter(|&t| {
                let [a, b, c] = m.triangle_points(t);
                let d = point_triangle_distance(grading.corner, a, b, c);
                m.diameter(t) > grading.allowed(d) * (1.0 + 1e-12)
            })
            .collect();
        if marked.is_empty() {
            return Ok(m);
        }
        m = bisect(&m, &marked)?;
    }
    Err(Error::Mesh("corner refinement did not terminate".into()))
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn longest_local_edge(m: &Mesh, tri: [usize; 3]) -> usize {
    // Local edge k joins tri[k] and tri[(k + 1) % 3]. Ties break on vertex ids so
    // neighbours agree on the choice.
    let len = |k: usize| {
        let a = m.vertices[tri[k]];
        let b = m.vertices[tri[(k + 1) % 3]];
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
    };
    let mut best = 0;
    for k in 1..3 {
        let (lk, lb) = (len(k), len(best));
        if lk > lb || (lk == lb && key(tri[k], tri[(k + 1) % 3]) > key(tri[best], tri[(best + 1) % 3])) {
            best = k;
        }
    }
    best
}

fn bisect(m: &Mesh, marked: &[usize]) -> Result<Mesh> {
    let edge_tris = m.edge_triangles();
    let mut refine_edge: HashMap<(usize, usize), usize> = HashMap::new();
    let mut queue: Vec<usize> = marked.to_vec();
    let mut longest_marked = vec![false; m.triangles.len()];
    while let Some(t) = queue.pop() {
        if longest_marked[t] {
            continue;
        }
        longest_marked[t] = true;
        let tri = m.triangles[t];
        let k = longest_local_edge(m, tri);
        let e = key(tri[k], tri[(k + 1) % 3]);
        if refine_edge.contains_key(&e) {
            continue;
        }
        refine_edge.insert(e, usize::MAX);
        for &n in &edge_tris[&e] {
            if !longest_marked[n] {
                queue.push(n);
            }
        }
    }
    // Any triangle with some marked edge must also split its longest edge.
    loop {
        let mut changed = false;
        for (t, tri) in m.triangles.iter().enumerate() {
            if longest_marked[t] {
                continue;
            }
            let has_mark = (0..3).any(|k| refine_edge.contains_key(&key(tri[k], tri[(k + 1) % 3])));
            if has_mark {
                longest_marked[t] = true;
                let k = longest_local_edge(m, *tri);
                let e = key(tri[k], tri[(k + 1) % 3]);
                if !refine_edge.contains_key(&e) {
                    refine_edge.insert(e, usize::MAX);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = Mesh {
        vertices: m.vertices.clone(),
        triangles: Vec::with_capacity(m.triangles.len() * 2),
        boundary_edges: Vec::with_capacity(m.boundary_edges.len()),
        periodic_pairs: m.periodic_pairs.clone(),
        bottom_curve: m.bottom_curve.clone(),
    };
    let bottom_edges: std::collections::HashSet<(usize, usize)> = m
        .edges_with_label(BoundaryLabel::Bottom)
        .map(|e| key(e.vertices[0], e.vertices[1]))
        .collect();
    let mut keys: Vec<(usize, usize)> = refine_edge.keys().copied().collect();
    keys.sort_unstable();
    for e in keys {
        let a = m.vertices[e.0];
        let b = m.vertices[e.1];
        let mut mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if bottom_edges.contains(&e) {
            if let Some(curve) = &m.bottom_curve {
                mid[1] = curve.eval(mid[0]);
            }
        }
        refine_edge.insert(e, out.vertices.len());
        out.vertices.push(mid);
    }

    for (t, tri) in m.triangles.iter().enumerate() {
        if !longest_marked[t] {
            out.triangles.push(*tri);
            continue;
        }
        split_triangle(m, *tri, &refine_edge, &mut out.triangles);
    }

    for be in &m.boundary_edges {
        let [a, b] = be.vertices;
        match refine_edge.get(&key(a, b)) {
            Some(&mid) => {
                out.boundary_edges.push(BoundaryEdge { vertices: [a, mid], label: be.label });
                out.boundary_edges.push(BoundaryEdge { vertices: [mid, b], label: be.label });
            }
            None => out.boundary_edges.push(be.clone()),
        }
    }

    for (t, _) in out.triangles.iter().enumerate() {
        if out.area(t) <= 0.0 {
            return Err(Error::DegenerateTriangle { triangle: t, area: out.area(t) });
        }
    }
    Ok(out)
}

/// Splits `tri` on its longest edge, then recursively on any other marked edge
/// of the two children.
fn split_triangle(
    m: &Mesh,
    tri: [usize; 3],
    refine_edge: &HashMap<(usize, usize), usize>,
    out: &mut Vec<[usize; 3]>,
) {
    let k = longest_local_edge(m, tri);
    let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
    let Some(&mid) = refine_edge.get(&key(a, b)) else {
        out.push(tri);
        return;
    };
    // Children (a, mid, c) and (mid, b, c); remaining marked edges are c–a and b–c.
    for (child, other) in [([a, mid, c], key(c, a)), ([mid, b, c], key(b, c))] {
        match refine_edge.get(&other) {
            Some(&m2) => {
                if other == key(c, a) {
                    out.push([a, mid, m2]);
                    out.push([m2, mid, c]);
                } else {
                    out.push([mid, b, m2]);
                    out.push([mid, m2, c]);
                }
            }
            None => out.push(child),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshgen::build_unit_square_mesh;

    #[test]
    fn allowed_size_law() {
        let g = GradingSpec::new([0.0, 0.0], 0.01, 0.5, 0.1).unwrap();
        assert_eq!(g.allowed(0.2), f64::INFINITY);
        assert!((g.allowed(0.0) - 0.01).abs() < 1e-15);
        assert!((g.allowed(0.05) - 0.05).abs() < 1e-12);
        assert!((g.allowed(0.04) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grading() {
        assert!(GradingSpec::new([0.0, 0.0], 0.2, 0.5, 0.1).is_err());
        assert!(GradingSpec::new([0.0, 0.0], 0.01, 0.95, 0.1).is_err());
    }

    #[test]
    fn no_op_when_target_equals_background() {
        let m = build_unit_square_mesh(0.25).unwrap();
        let g = GradingSpec::none([1.0, 0.0], 0.5);
        let r = refine_toward_corner(&m, &g).unwrap();
        assert_eq!(r.triangles, m.triangles);
        assert_eq!(r.vertices, m.vertices);
    }

    #[test]
    fn refinement_reaches_target_and_conforms() {
        let m = build_unit_square_mesh(0.125).unwrap();
        let g = GradingSpec::new([1.0, 0.0], 0.002, 0.5, 0.2).unwrap();
        let r = refine_toward_corner(&m, &g).unwrap();
        r.validate().unwrap();
        assert!(r.num_triangles() > m.num_triangles());
        let near = r.h_min_near([1.0, 0.0], 0.01).unwrap();
        assert!(near <= 0.002 * (1.0 + 1e-9), "h near corner {near}");
        assert!((r.total_area() - 1.0).abs() < 1e-12);
        let far = r.stats().h_max;
        assert!(far <= 2.0 * m.stats().h_max);
    }

    #[test]
    fn corner_must_be_on_boundary() {
        let m = build_unit_square_mesh(0.5).unwrap();
        let g = GradingSpec::new([0.5, 0.5], 0.01, 0.5, 0.1).unwrap();
        assert!(refine_toward_corner(&m, &g).is_err());
    }
}
