//! Mesh builders for the unit square, the cell strip, the quarter-planes and
//! the rough sub-layer.
//!
//! Unstructured pieces are constrained Delaunay triangulations (via `spade`)
//! of polygonal blocks whose boundaries are subdivided here and kept intact
//! during refinement. Blocks that share a side are glued on bit-identical
//! vertices.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::domain::{DomainKind, DomainSpec, Side};
use crate::geometry::grading::{refine_toward_corner, GradingSpec};
use crate::geometry::mesh::{distance, signed_area, BottomCurve, BoundaryEdge, BoundaryLabel, Mesh, Point};
use crate::geometry::profile::BottomSampling;

/// Minimum angle requested from Delaunay refinement.
const ANGLE_LIMIT_DEG: f64 = 25.0;

/// Points on the segment `a → b`, both ends included, at spacing `≤ h`.
///
/// The interior points are computed from the lexicographically smaller end, so
/// the two blocks sharing a side produce identical coordinates.
pub fn subdivide(a: Point, b: Point, h: f64) -> Vec<Point> {
    let n = ((distance(a, b) / h) - 1e-9).ceil().max(1.0) as usize;
    let flip = (b[0], b[1]) < (a[0], a[1]);
    let (p, q) = if flip { (b, a) } else { (a, b) };
    let mut pts: Vec<Point> = (0..=n)
        .map(|k| {
            if k == 0 {
                p
            } else if k == n {
                q
            } else {
                let t = k as f64 / n as f64;
                [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
            }
        })
        .collect();
    if flip {
        pts.reverse();
    }
    pts
}

/// A closed polygon meshed at a uniform target size.
#[derive(Debug, Clone, Default)]
pub struct Block {
    ring: Vec<Point>,
    labels: Vec<Option<BoundaryLabel>>,
    seeds: Vec<Point>,
    h: f64,
}

impl Block {
    pub fn new(h: f64) -> Self {
        Self { h, ..Default::default() }
    }

    /// Appends a side given as a point chain. Consecutive sides must share end
    /// points; the ring closes back onto the first point.
    pub fn side(mut self, pts: Vec<Point>, label: Option<BoundaryLabel>) -> Self {
        let skip = usize::from(self.ring.last().is_some_and(|l| *l == pts[0]));
        for p in pts.into_iter().skip(skip) {
            self.ring.push(p);
            self.labels.push(label);
        }
        self
    }

    /// Interior points inserted before refinement.
    pub fn seeds(mut self, pts: Vec<Point>) -> Self {
        self.seeds.extend(pts);
        self
    }

    fn close(&mut self) {
        if self.ring.len() > 1 && self.ring.first() == self.ring.last() {
            self.ring.pop();
            let closing = self.labels.pop().unwrap();
            self.labels[0] = closing;
        }
        // labels[i] belongs to the edge ending at ring[i]; rotate so it names i → i+1.
        self.labels.rotate_left(1);
    }
}

fn bits(p: Point) -> (u64, u64) {
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

struct Assembler {
    vertices: Vec<Point>,
    index: HashMap<(u64, u64), usize>,
    triangles: Vec<[usize; 3]>,
    labels: HashMap<(usize, usize), BoundaryLabel>,
}

impl Assembler {
    fn new() -> Self {
        Self { vertices: Vec::new(), index: HashMap::new(), triangles: Vec::new(), labels: HashMap::new() }
    }

    fn vertex(&mut self, p: Point) -> usize {
        let next = self.vertices.len();
        let id = *self.index.entry(bits(p)).or_insert(next);
        if id == next {
            self.vertices.push(p);
        }
        id
    }

    fn add_block(&mut self, block: &Block) -> Result<()> {
        let mut block = block.clone();
        block.close();
        let n = block.ring.len();
        if n < 3 {
            return Err(Error::Mesh("block ring needs at least 3 points".into()));
        }
        let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
        let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| {
            cdt.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Mesh(format!("cannot insert {p:?}: {e:?}")))
        };
        let ring_handles = block
            .ring
            .iter()
            .map(|&p| insert(&mut cdt, p))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..n {
            let (a, b) = (ring_handles[i], ring_handles[(i + 1) % n]);
            if !cdt.can_add_constraint(a, b) {
                return Err(Error::Mesh(format!("block side {:?} crosses another side", block.ring[i])));
            }
            cdt.add_constraint(a, b);
        }
        for &p in &block.seeds {
            insert(&mut cdt, p)?;
        }
        let area = polygon_area(&block.ring).abs();
        let tri_area = 3f64.sqrt() / 4.0 * block.h * block.h;
        let budget = (8.0 * area / tri_area) as usize + 20 * cdt.num_vertices() + 100;
        let result = cdt.refine(
            RefinementParameters::new()
                .with_angle_limit(AngleLimit::from_deg(ANGLE_LIMIT_DEG))
                .with_max_allowed_area(tri_area)
                .with_max_additional_vertices(budget)
                .keep_constraint_edges()
                .exclude_outer_faces(true),
        );
        if !result.refinement_complete {
            log::warn!("block refinement hit its vertex budget ({budget})");
        }
        let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();
        for face in cdt.inner_faces() {
            if excluded.contains(&face.fix()) {
                continue;
            }
            let p = face.positions().map(|q| [q.x, q.y]);
            let mut ids = p.map(|q| self.vertex(q));
            if signed_area(p[0], p[1], p[2]) < 0.0 {
                ids.swap(1, 2);
            }
            self.triangles.push(ids);
        }
        for i in 0..n {
            if let Some(label) = block.labels[i] {
                let a = self.vertex(block.ring[i]);
                let b = self.vertex(block.ring[(i + 1) % n]);
                self.labels.insert(edge_key(a, b), label);
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Mesh> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if count[&edge_key(a, b)] == 1 {
                    let label = *self.labels.get(&edge_key(a, b)).ok_or_else(|| {
                        Error::Mesh(format!(
                            "boundary edge {:?}–{:?} has no label",
                            self.vertices[a], self.vertices[b]
                        ))
                    })?;
                    boundary_edges.push(BoundaryEdge { vertices: [a, b], label });
                }
            }
        }
        Ok(Mesh {
            vertices: self.vertices,
            triangles: self.triangles,
            boundary_edges,
            periodic_pairs: None,
            bottom_curve: None,
        })
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn polygon_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (p, q) = (ring[i], ring[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Meshes and glues a set of blocks.
pub fn mesh_blocks(blocks: &[Block]) -> Result<Mesh> {
    let mut asm = Assembler::new();
    for b in blocks {
        asm.add_block(b)?;
    }
    asm.finish()
}

/// Structured grid on `[0,1]²` with `⌈1/H⌉` cells per side, each cut along the
/// diagonal from its lower-left to its upper-right corner.
pub fn build_unit_square_mesh(h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidInput(format!("grid size {h} outside (0, 1]")));
    }
    let n = unit_square_cells(h);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let coord = |i: usize| i as f64 / n as f64;
    let mut mesh = Mesh::default();
    for j in 0..=n {
        for i in 0..=n {
            mesh.vertices.push([coord(i), coord(j)]);
        }
    }
    for j in 0..n {
        for i in 0..n {
            mesh.triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            mesh.triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    for i in 0..n {
        let edge = |a, b, label| BoundaryEdge { vertices: [a, b], label };
        mesh.boundary_edges.push(edge(id(i, 0), id(i + 1, 0), BoundaryLabel::Bottom));
        mesh.boundary_edges.push(edge(id(n, i), id(n, i + 1), BoundaryLabel::Right));
        mesh.boundary_edges.push(edge(id(i + 1, n), id(i, n), BoundaryLabel::Top));
        mesh.boundary_edges.push(edge(id(0, i + 1), id(0, i), BoundaryLabel::Left));
    }
    Ok(mesh)
}

/// Number of cells per side used by [`build_unit_square_mesh`].
pub fn unit_square_cells(h: f64) -> usize {
    ((1.0 / h) - 1e-9).ceil().max(1.0) as usize
}

/// Bottom sampling used for every mesh of a profile at micro size `h`.
pub fn sampling_for(spec: &DomainSpec, h: f64) -> BottomSampling {
    BottomSampling::new(&spec.profile, h, h * h / 8.0)
}

/// Labels of the four outer sides of a tensor-product block layout.
#[derive(Debug, Clone, Copy)]
struct SideLabels {
    x_min: BoundaryLabel,
    x_max: BoundaryLabel,
    top: BoundaryLabel,
}

/// Tensor layout over `xs`: one rough bottom row from the polygonal bottom up
/// to `ys[0]` at size `h(0, 0)`, then rectangular rows `ys[j−1] < y₂ < ys[j]`
/// whose block `i` has target size `h(i, j)`.
fn layered_blocks(
    sampling: &BottomSampling,
    xs: &[f64],
    ys: &[f64],
    labels: SideLabels,
    h: impl Fn(usize, usize) -> f64,
) -> Vec<Block> {
    let nx = xs.len() - 1;
    let rows = ys.len();
    let h0 = h(0, 0);
    let hh = |i: usize, j: usize| if j == 0 { h0 } else { h(i, j) };
    let mut blocks = Vec::new();

    let bottom = sampling.polyline(xs[0], xs[nx]);
    let (b0, b1) = (bottom[0], *bottom.last().unwrap());
    let y0 = ys[0];
    let mut rough = Block::new(h0)
        .side(bottom, Some(BoundaryLabel::Bottom))
        .side(subdivide(b1, [xs[nx], y0], h0), Some(labels.x_max));
    let top_label = (rows == 1).then_some(labels.top);
    for i in (0..nx).rev() {
        let hs = if rows > 1 { h0.min(hh(i, 1)) } else { h0 };
        rough = rough.side(subdivide([xs[i + 1], y0], [xs[i], y0], hs), top_label);
    }
    blocks.push(rough.side(subdivide([xs[0], y0], b0, h0), Some(labels.x_min)));

    for j in 1..rows {
        let (y_bot, y_top) = (ys[j - 1], ys[j]);
        for i in 0..nx {
            let (x0, x1) = (xs[i], xs[i + 1]);
            let hb = hh(i, j);
            let h_left = if i == 0 { hb } else { hb.min(hh(i - 1, j)) };
            let h_right = if i + 1 == nx { hb } else { hb.min(hh(i + 1, j)) };
            let h_top = if j + 1 == rows { hb } else { hb.min(hh(i, j + 1)) };
            let h_below = hb.min(hh(i, j - 1));
            let block = Block::new(hb)
                .side(subdivide([x0, y_bot], [x1, y_bot], h_below), None)
                .side(subdivide([x1, y_bot], [x1, y_top], h_right), (i + 1 == nx).then_some(labels.x_max))
                .side(subdivide([x1, y_top], [x0, y_top], h_top), (j + 1 == rows).then_some(labels.top))
                .side(subdivide([x0, y_top], [x0, y_bot], h_left), (i == 0).then_some(labels.x_min));
            blocks.push(block);
        }
    }
    blocks
}

/// `0 = s₀ < s₁ < …` breakpoints `0, 1, 2, 4, 8, …` capped at `l`.
fn dyadic_breaks(l: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut next = 1.0;
    while next < l - 1e-9 {
        v.push(next);
        next *= 2.0;
    }
    v.push(l);
    v
}

/// Truncated periodic cell `(0,1) × (f, L)` with identical lateral node sets.
///
/// The strip is cut at `y₂ = 0, 2, 4`; the blocks below `y₂ = 4` do not depend
/// on `L`, so truncations share their near-bottom mesh.
pub fn build_cell_mesh(spec: &DomainSpec, h: f64) -> Result<Mesh> {
    if spec.kind != DomainKind::CellTruncated {
        return Err(Error::InvalidInput(format!("expected a cell domain, got {:?}", spec.kind)));
    }
    spec.validate()?;
    if !(h > 0.0 && h <= 0.2) {
        return Err(Error::InvalidInput(format!("cell mesh size {h} outside (0, 0.2]")));
    }
    let l = spec.truncation()?;
    let sampling = sampling_for(spec, h);
    let mut ys = vec![0.0];
    for cut in [2.0, 4.0] {
        if cut < l - 1e-9 {
            ys.push(cut);
        }
    }
    ys.push(l);
    let sizes = [h, h, 2.0 * h, 4.0 * h];
    let labels = SideLabels {
        x_min: BoundaryLabel::Left,
        x_max: BoundaryLabel::Right,
        top: BoundaryLabel::ArtificialTop,
    };
    let blocks = layered_blocks(&sampling, &[0.0, 1.0], &ys, labels, |_, j| sizes[j.min(3)]);
    let mut mesh = mesh_blocks(&blocks)?;
    mesh.detect_periodic_pairs();
    if mesh.periodic_pairs.is_none() {
        return Err(Error::Mesh("lateral sides of the cell mesh do not pair up".into()));
    }
    let profile = spec.profile.clone();
    mesh.bottom_curve = Some(BottomCurve(Arc::new(move |y| profile.eval(y))));
    Ok(mesh)
}

/// Truncated rough quarter-plane: `(0, L)` (inlet) or `(−L, 0)` (outlet) in
/// `y₁`, from the bottom up to `y₂ = L`, sizes doubling with `0, 1, 2, 4, …`
/// from the vertical edge `E`. `E` carries the label `Left` on both sides.
pub fn build_quarter_plane_mesh(spec: &DomainSpec, h: f64, grading: &GradingSpec) -> Result<Mesh> {
    let side = match spec.kind {
        DomainKind::QuarterPlaneIn => Side::In,
        DomainKind::QuarterPlaneOut => Side::Out,
        other => return Err(Error::InvalidInput(format!("expected a quarter-plane domain, got {other:?}"))),
    };
    spec.validate()?;
    let l = spec.truncation()?;
    let breaks = dyadic_breaks(l);
    let level = |k: usize| k as i32;
    let cap = 1.0f64.max(h);
    // Neighbouring blocks differ by at most a factor 2, including the rough row.
    let size = move |a: usize, b: usize| (h * 2f64.powi(level(a).min(level(b) + 1))).min(cap);
    let sampling = sampling_for(spec, h);
    let mut ys = vec![0.0];
    ys.extend_from_slice(&breaks[1..]);
    let mesh = match side {
        Side::In => {
            let labels = SideLabels {
                x_min: BoundaryLabel::Left,
                x_max: BoundaryLabel::ArtificialSide,
                top: BoundaryLabel::ArtificialTop,
            };
            let blocks = layered_blocks(&sampling, &breaks, &ys, labels, |i, j| if j == 0 { h } else { size(i, j - 1) });
            mesh_blocks(&blocks)?
        }
        Side::Out => {
            let xs: Vec<f64> = breaks.iter().rev().map(|&x| -x).collect();
            let nx = xs.len() - 1;
            let labels = SideLabels {
                x_min: BoundaryLabel::ArtificialSide,
                x_max: BoundaryLabel::Left,
                top: BoundaryLabel::ArtificialTop,
            };
            let blocks = layered_blocks(&sampling, &xs, &ys, labels, |i, j| {
                if j == 0 { h } else { size(nx - 1 - i, j - 1) }
            });
            mesh_blocks(&blocks)?
        }
    };
    let mut mesh = mesh;
    let profile = spec.profile.clone();
    mesh.bottom_curve = Some(BottomCurve(Arc::new(move |y| profile.eval(y))));
    refine_toward_corner(&mesh, grading)
}

/// Sizes and grading of the rough sub-layer mesh.
///
/// `grading.background_h` is the sub-layer size away from the corner.
pub fn build_sublayer_mesh(spec: &DomainSpec, top_cells: usize, grading: &GradingSpec) -> Result<Mesh> {
    let eps = spec.epsilon()?;
    spec.validate()?;
    let bg = grading.background_h;
    let top = eps / 10.0;
    if top < 2.0 * grading.target_h_min {
        return Err(Error::InvalidInput(format!(
            "overlap height ε/10 = {top:e} is below twice the corner target {:e}",
            grading.target_h_min
        )));
    }
    let coarse = 1.0 / top_cells as f64;
    if top >= coarse {
        return Err(Error::InvalidInput(format!(
            "overlap height ε/10 = {top:e} must be below the top grid step {coarse:e}"
        )));
    }
    let micro = sampling_for(spec, bg / eps);
    let mut bottom: Vec<Point> = micro
        .polyline(0.0, 1.0 / eps)
        .into_iter()
        .map(|p| [eps * p[0], eps * p[1]])
        .collect();
    bottom[0][0] = 0.0;
    bottom.last_mut().unwrap()[0] = 1.0;
    let (b0, b1) = (bottom[0], *bottom.last().unwrap());

    // Top-grid nodes on x₂ = 0, and on x₂ = ε/10 the crossings of the top grid's
    // vertical lines and diagonals, so both traces are exactly representable.
    // The points above each top-grid edge midpoint keep the band triangles isosceles.
    let grid_x: Vec<f64> = (0..=top_cells).map(|i| i as f64 / top_cells as f64).collect();
    let zero_line: Vec<Point> = grid_x.iter().map(|&x| [x, 0.0]).collect();
    let mut breaks: Vec<f64> = grid_x.clone();
    breaks.extend(grid_x[..top_cells].iter().map(|&x| x + top));
    breaks.extend(grid_x[..top_cells].iter().map(|&x| x + 0.5 * coarse));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut interface: Vec<Point> = vec![[1.0, top]];
    for w in breaks.windows(2).rev() {
        let seg = subdivide([w[1], top], [w[0], top], bg);
        interface.extend(seg.into_iter().skip(1));
    }
    // Mirror image of the interface points below x₂ = 0, where the bottom allows.
    let seeds: Vec<Point> = interface
        .iter()
        .filter(|p| p[0] > 0.0 && p[0] < 1.0)
        .map(|p| [p[0], -p[1]])
        .filter(|p| p[1] > eps * micro.value_at(p[0] / eps) + 0.5 * top)
        .collect();

    let mut zero_back = zero_line.clone();
    zero_back.reverse();
    let rough = Block::new(bg)
        .side(bottom, Some(BoundaryLabel::Bottom))
        .side(subdivide(b1, [1.0, 0.0], bg), Some(BoundaryLabel::Right))
        .side(zero_back, None)
        .side(subdivide([0.0, 0.0], b0, bg), Some(BoundaryLabel::Left))
        .seeds(seeds);
    let band = Block::new(bg)
        .side(zero_line, None)
        .side(subdivide([1.0, 0.0], [1.0, top], bg), Some(BoundaryLabel::Right))
        .side(interface, Some(BoundaryLabel::Interface))
        .side(subdivide([0.0, top], [0.0, 0.0], bg), Some(BoundaryLabel::Left));
    let mut mesh = mesh_blocks(&[rough, band])?;
    let profile = spec.profile.clone();
    mesh.bottom_curve = Some(BottomCurve(Arc::new(move |x| eps * profile.eval(x / eps))));
    refine_toward_corner(&mesh, grading)
}

/// Overlapping pair (top grid on `Ω⁰` at size `H`, rough sub-layer below `ε/10`).
pub fn build_rough_composite(spec: &DomainSpec, h_top: f64, grading: &GradingSpec) -> Result<(Mesh, Mesh)> {
    if spec.kind != DomainKind::RoughFull && spec.kind != DomainKind::Sublayer {
        return Err(Error::InvalidInput(format!("expected a rough domain, got {:?}", spec.kind)));
    }
    let top = build_unit_square_mesh(h_top)?;
    let sub = build_sublayer_mesh(spec, unit_square_cells(h_top), grading)?;
    Ok((top, sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::profile::RoughProfile;

    #[test]
    fn unit_square_counts() {
        for (h, nv, nt) in [(0.5, 9, 8), (1.0, 4, 2), (0.1, 121, 200)] {
            let m = build_unit_square_mesh(h).unwrap();
            m.validate().unwrap();
            assert_eq!((m.num_vertices(), m.num_triangles()), (nv, nt));
        }
        assert!(build_unit_square_mesh(0.0).is_err());
        assert!(build_unit_square_mesh(1.5).is_err());
    }

    #[test]
    fn subdivide_is_direction_independent() {
        let a = [0.1, 0.3];
        let b = [0.7, 2.9];
        let mut fwd = subdivide(a, b, 0.13);
        let back = subdivide(b, a, 0.13);
        fwd.reverse();
        assert_eq!(fwd, back);
    }

    #[test]
    fn flat_cell_is_a_strip() {
        let spec = DomainSpec::cell(RoughProfile::flat(), 2.0);
        let m = build_cell_mesh(&spec, 0.2).unwrap();
        m.validate().unwrap();
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        let pairs = m.periodic_pairs.as_ref().unwrap();
        assert_eq!(pairs.len(), m.vertices_with_label(BoundaryLabel::Left).len());
    }

    #[test]
    fn sine_cell_is_valid_and_fitted() {
        let spec = DomainSpec::cell(RoughProfile::sine(), 10.0);
        let m = build_cell_mesh(&spec, 0.1).unwrap();
        m.validate().unwrap();
        for v in m.vertices_with_label(BoundaryLabel::Bottom) {
            let [x, y] = m.vertices[v];
            assert!((y - spec.profile.eval(x)).abs() <= 1e-12);
        }
        let mut left: Vec<f64> = m.vertices_with_label(BoundaryLabel::Left).iter().map(|&v| m.vertices[v][1]).collect();
        let mut right: Vec<f64> = m.vertices_with_label(BoundaryLabel::Right).iter().map(|&v| m.vertices[v][1]).collect();
        left.sort_by(f64::total_cmp);
        right.sort_by(f64::total_cmp);
        assert_eq!(left, right);
        assert!(m.stats().min_quality > 0.2);
    }

    #[test]
    fn flat_quarter_plane() {
        let spec = DomainSpec::quarter_plane(Side::In, RoughProfile::flat(), 3.0);
        let g = GradingSpec::none([0.0, -1.0], 0.25);
        let m = build_quarter_plane_mesh(&spec, 0.25, &g).unwrap();
        m.validate().unwrap();
        assert!((m.total_area() - 12.0).abs() < 1e-12);
        let e = m.vertices_with_label(BoundaryLabel::Left);
        let ys: Vec<f64> = e.iter().map(|&v| m.vertices[v][1]).collect();
        assert!(e.iter().all(|&v| m.vertices[v][0] == 0.0));
        assert_eq!(ys.iter().cloned().fold(f64::INFINITY, f64::min), -1.0);
        assert_eq!(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 3.0);
    }

    #[test]
    fn flat_sublayer_is_a_strip() {
        let eps = 0.5;
        let spec = DomainSpec::rough(RoughProfile::flat(), eps);
        let g = GradingSpec::new([1.0, -eps], eps / 64.0, 0.5, eps / 16.0).unwrap();
        let (top, sub) = build_rough_composite(&spec, 0.5 * eps.powf(1.25), &g).unwrap();
        top.validate().unwrap();
        sub.validate().unwrap();
        assert!((sub.total_area() - 1.1 * eps).abs() < 1e-12);
        let (lo, hi) = sub.bounding_box();
        assert_eq!((lo[1], hi[1]), (-eps, eps / 10.0));
    }

    #[test]
    fn sine_sublayer_graded() {
        let eps = 0.25;
        let spec = DomainSpec::rough(RoughProfile::sine(), eps);
        let corner = spec.outlet_corner().unwrap();
        let target = 0.05 * eps.powf(2.29);
        let g = GradingSpec::new(corner, target, 0.5, eps / 16.0).unwrap();
        let (_, sub) = build_rough_composite(&spec, 0.5 * eps.powf(1.25), &g).unwrap();
        sub.validate().unwrap();
        let near = sub.h_min_near(corner, eps).unwrap();
        assert!(near <= target * (1.0 + 1e-9));
        for v in sub.vertices_with_label(BoundaryLabel::Bottom) {
            let [x, y] = sub.vertices[v];
            assert!((y - eps * spec.profile.eval(x / eps)).abs() <= 1e-12, "{x} {y}");
        }
    }
}
