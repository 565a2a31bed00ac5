use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::element::{local_dofs, Element};
use crate::geometry::mesh::{point_triangle_distance, BoundaryEdge, Mesh, Point};

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Lagrange space of order 1 or 2 on a triangle mesh.
///
/// Dofs `0..nv` are the mesh vertices; for order 2 the edge midpoints follow.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    order: usize,
    cell_dofs: Vec<[usize; 6]>,
    dof_coords: Vec<Point>,
    edge_dof: HashMap<(usize, usize), usize>,
    locator: Locator,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, order: usize) -> Result<Arc<Self>> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidInput(format!("unsupported element order {order}")));
        }
        for t in 0..mesh.num_triangles() {
            let area = mesh.area(t);
            if !(area >= 1e-14) {
                return Err(Error::DegenerateTriangle { triangle: t, area });
            }
        }
        let mut dof_coords = mesh.vertices.clone();
        let mut edge_dof = HashMap::new();
        let mut cell_dofs = Vec::with_capacity(mesh.num_triangles());
        for tri in &mesh.triangles {
            let mut d = [tri[0], tri[1], tri[2], 0, 0, 0];
            if order == 2 {
                for (slot, (a, b)) in [(3, (1, 2)), (4, (2, 0)), (5, (0, 1))] {
                    let key = edge_key(tri[a], tri[b]);
                    let next = dof_coords.len();
                    let id = *edge_dof.entry(key).or_insert(next);
                    if id == next {
                        let (p, q) = (mesh.vertices[key.0], mesh.vertices[key.1]);
                        dof_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    }
                    d[slot] = id;
                }
            }
            cell_dofs.push(d);
        }
        let locator = Locator::new(&mesh);
        Ok(Arc::new(Self { mesh, order, cell_dofs, dof_coords, edge_dof, locator }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dof_count(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn local_count(&self) -> usize {
        local_dofs(self.order)
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t][..self.local_count()]
    }

    pub fn element(&self, t: usize) -> Element {
        Element::new(self.mesh.triangle_points(t))
    }

    /// Midpoint dof of the edge `a–b`, order 2 only.
    pub fn edge_dof(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_dof.get(&edge_key(a, b)).copied()
    }

    /// `[first, second]` for P1, `[first, second, midpoint]` for P2.
    pub fn boundary_edge_dofs(&self, e: &BoundaryEdge) -> Vec<usize> {
        let [a, b] = e.vertices;
        let mut d = vec![a, b];
        if let Some(m) = self.edge_dof(a, b) {
            d.push(m);
        }
        d
    }

    /// Containing triangle and barycentric coordinates of `p`.
    pub fn locate(&self, p: Point) -> Result<(usize, [f64; 3])> {
        self.locator.locate(&self.mesh, p)
    }
}

/// Uniform bucket grid over the mesh bounding box; each bucket lists the
/// triangles whose bounding boxes overlap it.
#[derive(Debug)]
struct Locator {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let n = mesh.num_triangles().max(1);
        let side = ((n as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let w = (hi[0] - lo[0]).max(1e-300);
        let h = (hi[1] - lo[1]).max(1e-300);
        let aspect = w / h;
        let nx = ((side as f64 * aspect.sqrt()).round() as usize).clamp(1, 2048);
        let ny = ((side as f64 / aspect.sqrt()).round() as usize).clamp(1, 2048);
        let cell = [w / nx as f64, h / ny as f64];
        let mut buckets = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.num_triangles() {
            let pts = mesh.triangle_points(t);
            let (mut bl, mut bh) = (pts[0], pts[0]);
            for p in &pts[1..] {
                for k in 0..2 {
                    bl[k] = bl[k].min(p[k]);
                    bh[k] = bh[k].max(p[k]);
                }
            }
            let i0 = clamp((bl[0] - lo[0]) / cell[0], nx);
            let i1 = clamp((bh[0] - lo[0]) / cell[0], nx);
            let j0 = clamp((bl[1] - lo[1]) / cell[1], ny);
            let j1 = clamp((bh[1] - lo[1]) / cell[1], ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        Self { origin: lo, cell, dims: [nx, ny], buckets }
    }

    fn locate(&self, mesh: &Mesh, p: Point) -> Result<(usize, [f64; 3])> {
        let [nx, ny] = self.dims;
        let fi = (p[0] - self.origin[0]) / self.cell[0];
        let fj = (p[1] - self.origin[1]) / self.cell[1];
        if fi >= -1.0 && fj >= -1.0 && fi <= nx as f64 + 1.0 && fj <= ny as f64 + 1.0 {
            let i = (fi.floor().max(0.0) as usize).min(nx - 1);
            let j = (fj.floor().max(0.0) as usize).min(ny - 1);
            let mut best: Option<(usize, [f64; 3], f64)> = None;
            for &t in &self.buckets[j * nx + i] {
                let t = t as usize;
                let l = Element::new(mesh.triangle_points(t)).barycentric(p);
                let worst = l[0].min(l[1]).min(l[2]);
                if best.map_or(true, |b| worst > b.2) {
                    best = Some((t, l, worst));
                }
            }
            if let Some((t, l, worst)) = best {
                if worst >= -1e-12 {
                    return Ok((t, clamp_bary(l)));
                }
            }
        }
        // Exhaustive scan for points on or just outside the hull.
        let mut nearest = (usize::MAX, f64::INFINITY);
        for t in 0..mesh.num_triangles() {
            let [a, b, c] = mesh.triangle_points(t);
            let d = point_triangle_distance(p, a, b, c);
            if d < nearest.1 {
                nearest = (t, d);
            }
        }
        if nearest.1 <= 1e-9 {
            let l = Element::new(mesh.triangle_points(nearest.0)).barycentric(p);
            return Ok((nearest.0, clamp_bary(l)));
        }
        Err(Error::PointOutside { x: p[0], y: p[1], distance: nearest.1 })
    }
}

fn clamp_bary(l: [f64; 3]) -> [f64; 3] {
    if l.iter().all(|&v| v >= 0.0) {
        return l;
    }
    let c = [l[0].max(0.0), l[1].max(0.0), l[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}
