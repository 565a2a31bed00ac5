//! Conforming triangulations with labelled boundary edges.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    Bottom,
    Top,
    Left,
    Right,
    ArtificialTop,
    ArtificialSide,
    Interface,
}

impl BoundaryLabel {
    pub const ALL: [BoundaryLabel; 7] = [
        BoundaryLabel::Bottom,
        BoundaryLabel::Top,
        BoundaryLabel::Left,
        BoundaryLabel::Right,
        BoundaryLabel::ArtificialTop,
        BoundaryLabel::ArtificialSide,
        BoundaryLabel::Interface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryLabel::Bottom => "Bottom",
            BoundaryLabel::Top => "Top",
            BoundaryLabel::Left => "Left",
            BoundaryLabel::Right => "Right",
            BoundaryLabel::ArtificialTop => "ArtificialTop",
            BoundaryLabel::ArtificialSide => "ArtificialSide",
            BoundaryLabel::Interface => "Interface",
        }
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundaryLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown boundary label `{s}`")))
    }
}

/// The exact bottom curve `y = g(x)` a mesh was fitted to. Refinement uses it to
/// place new bottom vertices on the curve; it is not part of the file format.
#[derive(Clone)]
pub struct BottomCurve(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for BottomCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BottomCurve(..)")
    }
}

impl BottomCurve {
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// `(left vertex, right vertex)` pairs identified by periodicity.
    pub periodic_pairs: Option<Vec<(usize, usize)>>,
    pub bottom_curve: Option<BottomCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub min_quality: f64,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `2 r / R` (1 for the equilateral triangle).
pub fn triangle_quality(a: Point, b: Point, c: Point) -> f64 {
    let la = distance(b, c);
    let lb = distance(c, a);
    let lc = distance(a, b);
    let area = signed_area(a, b, c).abs();
    if area == 0.0 {
        return 0.0;
    }
    let s = 0.5 * (la + lb + lc);
    let inradius = area / s;
    let circumradius = la * lb * lc / (4.0 * area);
    2.0 * inradius / circumradius
}

pub fn triangle_diameter(a: Point, b: Point, c: Point) -> f64 {
    distance(a, b).max(distance(b, c)).max(distance(c, a))
}

/// Distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: Point, a: Point, b: Point, c: Point) -> f64 {
    let s0 = signed_area(p, a, b);
    let s1 = signed_area(p, b, c);
    let s2 = signed_area(p, c, a);
    let inside = (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0);
    if inside {
        return 0.0;
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, c, a))
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    distance(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        triangle_diameter(a, b, c)
    }

    pub fn quality(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        triangle_quality(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn stats(&self) -> MeshStats {
        let mut h_min = f64::INFINITY;
        let mut h_max: f64 = 0.0;
        let mut q_min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let d = self.diameter(t);
            h_min = h_min.min(d);
            h_max = h_max.max(d);
            q_min = q_min.min(self.quality(t));
        }
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            h_min,
            h_max,
            min_quality: q_min,
        }
    }

    /// Smallest triangle diameter among triangles within `radius` of `point`.
    pub fn h_min_near(&self, point: Point, radius: f64) -> Option<f64> {
        (0..self.triangles.len())
            .filter(|&t| {
                let [a, b, c] = self.triangle_points(t);
                point_triangle_distance(point, a, b, c) <= radius
            })
            .map(|t| self.diameter(t))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Map from undirected edge to the triangles that share it.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
            }
        }
        map
    }

    pub fn edges_with_label(&self, label: BoundaryLabel) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.label == label)
    }

    pub fn labels(&self) -> Vec<BoundaryLabel> {
        let mut labels: Vec<_> = self.boundary_edges.iter().map(|e| e.label).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Vertices on edges carrying `label`, sorted and deduplicated.
    pub fn vertices_with_label(&self, label: BoundaryLabel) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges_with_label(label)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks conformity, orientation, boundary labelling and periodic pairing.
    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let area = self.area(t);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {t} {:?} has non-positive signed area {area:e}",
                    self.triangle_points(t)
                )));
            }
        }
        let edges = self.edge_triangles();
        let mut labelled: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            *labelled.entry(edge_key(e.vertices[0], e.vertices[1])).or_default() += 1;
        }
        for (key, tris) in &edges {
            match tris.len() {
                1 => match labelled.get(key) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(Error::Mesh(format!("boundary edge {key:?} carries {n} labels")))
                    }
                    None => return Err(Error::Mesh(format!("boundary edge {key:?} has no label"))),
                },
                2 => {
                    if labelled.contains_key(key) {
                        return Err(Error::Mesh(format!("interior edge {key:?} is labelled")));
                    }
                }
                n => return Err(Error::Mesh(format!("edge {key:?} shared by {n} triangles"))),
            }
        }
        for key in labelled.keys() {
            if !edges.contains_key(key) {
                return Err(Error::Mesh(format!("labelled edge {key:?} is not a mesh edge")));
            }
        }
        if let Some(pairs) = &self.periodic_pairs {
            for &(l, r) in pairs {
                let dy = (self.vertices[l][1] - self.vertices[r][1]).abs();
                if dy > 1e-12 {
                    return Err(Error::Mesh(format!(
                        "periodic pair ({l}, {r}) differs in height by {dy:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text format: `vertices N triangles M edges K`, then vertex, triangle and
    /// labelled-edge lines. Floats use 17 significant digits and round-trip exactly.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "vertices {} triangles {} edges {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        )?;
        for v in &self.vertices {
            writeln!(out, "{:.16e} {:.16e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.boundary_edges {
            writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.label)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Mesh> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh file".into()))??;
        let words: Vec<&str> = header.split_whitespace().collect();
        if words.len() != 6 || words[0] != "vertices" || words[2] != "triangles" || words[4] != "edges" {
            return Err(Error::Parse(format!("bad mesh header `{header}`")));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad count `{s}`")));
        let (nv, nt, ne) = (count(words[1])?, count(words[3])?, count(words[5])?);
        let mut next_fields = |what: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("mesh file truncated in {what}")))??;
            Ok(line.split_whitespace().map(str::to_string).collect())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad float `{s}`")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad index `{s}`")));
        let mut mesh = Mesh::default();
        for _ in 0..nv {
            let f = next_fields("vertices")?;
            if f.len() != 2 {
                return Err(Error::Parse("vertex line needs 2 fields".into()));
            }
            mesh.vertices.push([num(&f[0])?, num(&f[1])?]);
        }
        for _ in 0..nt {
            let f = next_fields("triangles")?;
            if f.len() != 3 {
                return Err(Error::Parse("triangle line needs 3 fields".into()));
            }
            mesh.triangles.push([idx(&f[0])?, idx(&f[1])?, idx(&f[2])?]);
        }
        for _ in 0..ne {
            let f = next_fields("edges")?;
            if f.len() != 3 {
                return Err(Error::Parse("edge line needs 3 fields".into()));
            }
            mesh.boundary_edges.push(BoundaryEdge {
                vertices: [idx(&f[0])?, idx(&f[1])?],
                label: f[2].parse()?,
            });
        }
        Ok(mesh)
    }

    /// Rebuilds periodic pairs between `Left` and `Right` vertices of equal height.
    pub fn detect_periodic_pairs(&mut self) {
        let left = self.vertices_with_label(BoundaryLabel::Left);
        let right = self.vertices_with_label(BoundaryLabel::Right);
        let mut pairs = Vec::new();
        for &l in &left {
            if let Some(&r) = right
                .iter()
                .find(|&&r| (self.vertices[r][1] - self.vertices[l][1]).abs() <= 1e-12)
            {
                pairs.push((l, r));
            }
        }
        if !pairs.is_empty() && pairs.len() == left.len() && left.len() == right.len() {
            self.periodic_pairs = Some(pairs);
        }
    }
}
