use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::element::{gradients, values};
use crate::fem::quadrature::{gauss_legendre, triangle_degree5};
use crate::fem::space::FeSpace;
use crate::fem::system::{outward_normal, ScalarFn};
use crate::geometry::mesh::{BoundaryLabel, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H1Semi,
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub min: Point,
    pub max: Point,
}

impl BoxRegion {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<FeSpace>,
    pub coefficients: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<FeSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dof_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} coefficients, space has {} dofs",
                coefficients.len(),
                space.dof_count()
            )));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("field coefficient {i} is not finite")));
        }
        Ok(Self { space, coefficients })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.dof_count();
        Self { space, coefficients: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: Arc<FeSpace>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let c = space.dof_coords().iter().map(|&p| f(p)).collect();
        Self::new(space, c)
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    fn local(&self, t: usize, l: [f64; 3]) -> (f64, [f64; 2]) {
        let order = self.space.order();
        let el = self.space.element(t);
        let phi = values(order, l);
        let g = gradients(order, &el, l);
        let mut u = 0.0;
        let mut du = [0.0; 2];
        for (a, &d) in self.space.cell_dofs(t).iter().enumerate() {
            let c = self.coefficients[d];
            u += c * phi[a];
            du[0] += c * g[a][0];
            du[1] += c * g[a][1];
        }
        (u, du)
    }

    pub fn evaluate(&self, p: Point) -> Result<f64> {
        let (t, l) = self.space.locate(p)?;
        let tri = self.space.mesh().triangles[t];
        for &v in &tri {
            let q = self.space.mesh().vertices[v];
            if q[0].to_bits() == p[0].to_bits() && q[1].to_bits() == p[1].to_bits() {
                return Ok(self.coefficients[v]);
            }
        }
        Ok(self.local(t, l).0)
    }

    pub fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let (t, l) = self.space.locate(p)?;
        Ok(self.local(t, l).1)
    }

    /// `∫ g(x, u, ∇u)` over triangles whose centroid lies in `region`.
    pub fn integrate(
        &self,
        region: Option<&BoxRegion>,
        g: impl Fn(Point, f64, [f64; 2]) -> f64,
    ) -> Result<f64> {
        let rule = triangle_degree5();
        let mesh = self.space.mesh();
        let mut total = 0.0;
        let mut hit = false;
        for t in 0..mesh.num_triangles() {
            let el = self.space.element(t);
            if let Some(r) = region {
                if !r.contains(el.point([1.0 / 3.0; 3])) {
                    continue;
                }
            }
            hit = true;
            for &(l, w) in &rule {
                let (u, du) = self.local(t, l);
                total += w * el.area * g(el.point(l), u, du);
            }
        }
        if !hit {
            return Err(Error::EmptyDomain(format!("no triangle centroid inside {region:?}")));
        }
        Ok(total)
    }

    pub fn norm(&self, kind: NormKind, region: Option<&BoxRegion>) -> Result<f64> {
        let s = self.integrate(region, |_, u, du| integrand(kind, u, du))?;
        Ok(s.max(0.0).sqrt())
    }

    /// Norm of `self − exact`, where `exact` returns value and gradient.
    pub fn error_norm(&self, kind: NormKind, exact: &dyn Fn(Point) -> (f64, [f64; 2])) -> Result<f64> {
        self.error_norm_in(kind, exact, None)
    }

    pub fn error_norm_in(
        &self,
        kind: NormKind,
        exact: &dyn Fn(Point) -> (f64, [f64; 2]),
        region: Option<&BoxRegion>,
    ) -> Result<f64> {
        let s = self.integrate(region, |x, u, du| {
            let (e, de) = exact(x);
            integrand(kind, u - e, [du[0] - de[0], du[1] - de[1]])
        })?;
        Ok(s.max(0.0).sqrt())
    }

    /// Weighted Sobolev norm of order `m ∈ {0, 1}`: each derivative of order
    /// `k` is weighted by `(1 + ρ²)^{(alpha + k − m)/2}`, `ρ = |x|`.
    pub fn weighted_norm(&self, m: u32, alpha: f64) -> Result<f64> {
        if m > 1 {
            return Err(Error::InvalidInput(format!("weighted norm order {m} not supported")));
        }
        let m = f64::from(m);
        let s = self.integrate(None, |x, u, du| {
            let w = 1.0 + x[0] * x[0] + x[1] * x[1];
            let mut v = u * u * w.powf(alpha - m);
            if m == 1.0 {
                v += (du[0] * du[0] + du[1] * du[1]) * w.powf(alpha);
            }
            v
        })?;
        Ok(s.sqrt())
    }

    /// `∇u · n` sampled at three Gauss points of each boundary edge carrying
    /// `label`, with `n` the outward unit normal.
    pub fn boundary_normal_derivative(&self, label: BoundaryLabel) -> Result<TraceFunction> {
        if self.space.order() == 1 {
            log::warn!("normal derivative of a P1 field is piecewise constant");
        }
        let mesh = self.space.mesh();
        let owners = mesh.edge_triangles();
        let gauss = gauss_legendre(3);
        let mut segments = Vec::new();
        for e in mesh.edges_with_label(label) {
            let [a, b] = e.vertices;
            let key = if a < b { (a, b) } else { (b, a) };
            let t = owners[&key][0];
            let n = outward_normal(&self.space, a, b, t);
            let el = self.space.element(t);
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let mut samples = [(0.0, 0.0); 3];
            for (k, &(s, _)) in gauss.iter().enumerate() {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let (_, du) = self.local(t, el.barycentric(x));
                samples[k] = (s, du[0] * n[0] + du[1] * n[1]);
            }
            segments.push(TraceSegment { a: pa, b: pb, samples });
        }
        if segments.is_empty() {
            return Err(Error::BoundaryCondition(format!("mesh has no edges labelled {label}")));
        }
        Ok(TraceFunction { label, segments })
    }

    /// Text format: `field order O dofs N` followed by one coefficient per line.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "field order {} dofs {}", self.space.order(), self.coefficients.len())?;
        for c in &self.coefficients {
            writeln!(out, "{c:.16e}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R, space: Arc<FeSpace>) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (order, n) = match words.as_slice() {
            ["field", "order", o, "dofs", n] => (
                o.parse::<usize>().map_err(|e| Error::Parse(format!("order: {e}")))?,
                n.parse::<usize>().map_err(|e| Error::Parse(format!("dofs: {e}")))?,
            ),
            _ => return Err(Error::Parse(format!("bad field header `{header}`"))),
        };
        if order != space.order() || n != space.dof_count() {
            return Err(Error::Parse(format!(
                "field is P{order} with {n} dofs, space is P{} with {}",
                space.order(),
                space.dof_count()
            )));
        }
        let mut c = Vec::with_capacity(n);
        for line in lines.take(n) {
            let line = line?;
            c.push(line.trim().parse::<f64>().map_err(|e| Error::Parse(format!("coefficient: {e}")))?);
        }
        Self::new(space, c)
    }
}

fn integrand(kind: NormKind, u: f64, du: [f64; 2]) -> f64 {
    let g = du[0] * du[0] + du[1] * du[1];
    match kind {
        NormKind::L2 => u * u,
        NormKind::H1 => u * u + g,
        NormKind::H1Semi => g,
    }
}

/// Quadratic interpolant of three samples `(t, value)` along the segment
/// `a → b`.
#[derive(Debug, Clone, Copy)]
pub struct TraceSegment {
    pub a: Point,
    pub b: Point,
    pub samples: [(f64, f64); 3],
}

impl TraceSegment {
    pub fn value(&self, t: f64) -> f64 {
        let s = &self.samples;
        let mut v = 0.0;
        for i in 0..3 {
            let mut li = 1.0;
            for j in 0..3 {
                if i != j {
                    li *= (t - s[j].0) / (s[i].0 - s[j].0);
                }
            }
            v += li * s[i].1;
        }
        v
    }

    pub fn length(&self) -> f64 {
        ((self.b[0] - self.a[0]).powi(2) + (self.b[1] - self.a[1]).powi(2)).sqrt()
    }

    pub fn point(&self, t: f64) -> Point {
        [self.a[0] + t * (self.b[0] - self.a[0]), self.a[1] + t * (self.b[1] - self.a[1])]
    }
}

/// Piecewise-quadratic boundary data on the edges of one label.
#[derive(Debug, Clone)]
pub struct TraceFunction {
    pub label: BoundaryLabel,
    pub segments: Vec<TraceSegment>,
}

impl TraceFunction {
    /// Value at the point whose coordinate `axis` equals `s`; zero where no
    /// segment covers `s`.
    pub fn along(&self, axis: usize, s: f64) -> f64 {
        let mut best: Option<(f64, f64)> = None;
        for seg in &self.segments {
            let (lo, hi) = (seg.a[axis].min(seg.b[axis]), seg.a[axis].max(seg.b[axis]));
            let span = hi - lo;
            if span <= 0.0 {
                continue;
            }
            let tol = 1e-12 * span.max(1.0);
            if s >= lo - tol && s <= hi + tol {
                let t = ((s - seg.a[axis]) / (seg.b[axis] - seg.a[axis])).clamp(0.0, 1.0);
                let dist = if s < lo { lo - s } else if s > hi { s - hi } else { 0.0 };
                if best.map_or(true, |b| dist < b.0) {
                    best = Some((dist, seg.value(t)));
                }
            }
        }
        best.map_or(0.0, |b| b.1)
    }

    /// Boundary data keyed by the coordinate along `axis`, shifted by
    /// `shift` and scaled by `scale`: `x ↦ scale · along(axis, x[axis] − shift)`.
    pub fn to_fn(&self, axis: usize, shift: f64, scale: f64) -> ScalarFn {
        let me = self.clone();
        Arc::new(move |x: Point| scale * me.along(axis, x[axis] - shift))
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for seg in &mut self.segments {
            for s in &mut seg.samples {
                s.1 *= factor;
            }
        }
        self
    }

    pub fn integral(&self) -> f64 {
        let g = gauss_legendre(3);
        self.segments
            .iter()
            .map(|s| s.length() * s.samples.iter().zip(&g).map(|(p, (_, w))| w * p.1).sum::<f64>())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.samples.iter().map(|p| p.1.abs()))
            .fold(0.0, f64::max)
    }

    /// All samples as `(point, value)` pairs.
    pub fn samples(&self) -> Vec<(Point, f64)> {
        self.segments.iter().flat_map(|s| s.samples.iter().map(move |&(t, v)| (s.point(t), v))).collect()
    }
}

/// Values of `field` at the dofs lying on `label`, keyed by dof index.
pub fn boundary_dof_values(field: &Field, label: BoundaryLabel) -> HashMap<usize, f64> {
    let space = field.space();
    space
        .mesh()
        .edges_with_label(label)
        .flat_map(|e| space.boundary_edge_dofs(e))
        .map(|d| (d, field.coefficients[d]))
        .collect()
}
