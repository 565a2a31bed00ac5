use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::element::{edge_values, gradients, values};
use crate::fem::field::Field;
use crate::fem::quadrature::{gauss_legendre, triangle_degree2, triangle_degree5};
use crate::fem::space::FeSpace;
use crate::fem::sparse::{conjugate_gradient, relative_residual, Cholesky, CsrMatrix};
use crate::geometry::mesh::{BoundaryLabel, Point};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DIRECT_LIMIT: usize = 200_000;

#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(ScalarFn),
    /// Prescribed outward flux `∂u/∂n = q`.
    NeumannFlux(ScalarFn),
    /// `u + α ∂u/∂n = 0` with the outward normal, `α > 0`.
    Robin { alpha: f64 },
    /// Identifies `Left` with `Right` through the mesh's periodic pairs.
    Periodic,
    Natural,
}

impl BoundaryCondition {
    pub fn dirichlet(g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::Dirichlet(Arc::new(g))
    }

    pub fn flux(q: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::NeumannFlux(Arc::new(q))
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Dirichlet(_) => "Dirichlet",
            Self::NeumannFlux(_) => "NeumannFlux",
            Self::Robin { .. } => "Robin",
            Self::Periodic => "Periodic",
            Self::Natural => "Natural",
        }
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Robin { alpha } => write!(f, "Robin {{ alpha: {alpha} }}"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BcSpec {
    entries: Vec<(BoundaryLabel, BoundaryCondition)>,
}

impl BcSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: BoundaryLabel, bc: BoundaryCondition) -> Self {
        self.entries.push((label, bc));
        self
    }

    pub fn get(&self, label: BoundaryLabel) -> Option<&BoundaryCondition> {
        self.entries.iter().find(|(l, _)| *l == label).map(|(_, b)| b)
    }

    /// Every mesh label must appear exactly once; extra labels are ignored.
    pub fn check_coverage(&self, labels: &[BoundaryLabel]) -> Result<()> {
        for &label in labels {
            let n = self.entries.iter().filter(|(l, _)| *l == label).count();
            if n != 1 {
                return Err(Error::BoundaryCondition(format!(
                    "label {label} is covered {n} times (expected exactly once)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Constraints {
    full_to_reduced: Vec<usize>,
    representative: Vec<usize>,
    is_dirichlet: Vec<bool>,
    values: Vec<f64>,
    base_rhs: Vec<f64>,
    coupling: CsrMatrix,
}

/// Linear system over a finite-element space. Before `apply_bcs` it is the raw
/// `dof_count²` operator; afterwards it lives on the reduced (merged) dofs.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraint_log: Vec<String>,
    space: Arc<FeSpace>,
    constraints: Option<Constraints>,
}

impl SparseSystem {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_constrained(&self) -> bool {
        self.constraints.is_some()
    }

    /// Adds `∫ f φ_i` to the right-hand side of an unconstrained system.
    pub fn add_source(&mut self, f: &dyn Fn(Point) -> f64) -> Result<()> {
        if self.constraints.is_some() {
            return Err(Error::InvalidInput("source must be added before boundary conditions".into()));
        }
        let space = self.space.clone();
        let order = space.order();
        let rule = triangle_degree5();
        for t in 0..space.mesh().num_triangles() {
            let el = space.element(t);
            let dofs = space.cell_dofs(t);
            for &(l, w) in &rule {
                let fx = f(el.point(l)) * w * el.area;
                let phi = values(order, l);
                for (a, &i) in dofs.iter().enumerate() {
                    self.rhs[i] += fx * phi[a];
                }
            }
        }
        self.constraint_log.push("volume source added".into());
        Ok(())
    }

    /// Replaces Dirichlet values. `g(full_dof, coordinate)` returns the new
    /// value, or `None` to keep the current one. The factorization of
    /// `matrix` stays valid.
    pub fn update_dirichlet(&mut self, g: impl Fn(usize, Point) -> Option<f64>) -> Result<()> {
        let c = self
            .constraints
            .as_mut()
            .ok_or_else(|| Error::InvalidInput("system has no boundary conditions".into()))?;
        let coords = self.space.dof_coords();
        for r in 0..c.values.len() {
            if c.is_dirichlet[r] {
                let d = c.representative[r];
                if let Some(v) = g(d, coords[d]) {
                    c.values[r] = v;
                }
            }
        }
        self.rhs = lifted_rhs(c);
        Ok(())
    }

    /// Full-length coefficients from a reduced solution vector.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        match &self.constraints {
            Some(c) => c.full_to_reduced.iter().map(|&r| reduced[r]).collect(),
            None => reduced.to_vec(),
        }
    }
}

fn lifted_rhs(c: &Constraints) -> Vec<f64> {
    let lift = c.coupling.mul_vec(&c.values);
    (0..c.values.len())
        .map(|r| if c.is_dirichlet[r] { c.values[r] } else { c.base_rhs[r] - lift[r] })
        .collect()
}

/// Stiffness matrix `∫ ∇φ_i · ∇φ_j` with zero right-hand side.
pub fn assemble_laplace(space: &Arc<FeSpace>) -> Result<SparseSystem> {
    let order = space.order();
    let rule = if order == 1 { triangle_degree2() } else { triangle_degree5() };
    let nl = space.local_count();
    let mesh = space.mesh();
    let mut trips = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    for t in 0..mesh.num_triangles() {
        let el = space.element(t);
        if !(el.area >= 1e-14) {
            return Err(Error::DegenerateTriangle { triangle: t, area: el.area });
        }
        let mut k = [[0.0; 6]; 6];
        for &(l, w) in &rule {
            let g = gradients(order, &el, l);
            for a in 0..nl {
                for b in 0..nl {
                    k[a][b] += w * el.area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        let dofs = space.cell_dofs(t);
        for a in 0..nl {
            for b in 0..nl {
                trips.push((dofs[a], dofs[b], k[a][b]));
            }
        }
    }
    let n = space.dof_count();
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, n, trips),
        rhs: vec![0.0; n],
        constraint_log: vec![format!("assembled P{order} Laplacian, {n} dofs")],
        space: space.clone(),
        constraints: None,
    })
}

/// Outward unit normal of boundary edge `a–b`, using the owning triangle.
pub(crate) fn outward_normal(space: &FeSpace, a: usize, b: usize, owner: usize) -> [f64; 2] {
    let mesh = space.mesh();
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let tri = mesh.triangles[owner];
    let c = tri.iter().copied().find(|&v| v != a && v != b).unwrap();
    let pc = mesh.vertices[c];
    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
    let len = (dx * dx + dy * dy).sqrt();
    let mut n = [dy / len, -dx / len];
    let to_c = [pc[0] - pa[0], pc[1] - pa[1]];
    if n[0] * to_c[0] + n[1] * to_c[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

pub fn apply_bcs(system: SparseSystem, bcs: &BcSpec) -> Result<SparseSystem> {
    if system.constraints.is_some() {
        return Err(Error::InvalidInput("boundary conditions already applied".into()));
    }
    let SparseSystem { matrix, mut rhs, mut constraint_log, space, .. } = system;
    let mesh = space.mesh().clone();
    let labels = mesh.labels();
    bcs.check_coverage(&labels)?;
    let n = space.dof_count();
    let order = space.order();
    let gauss = gauss_legendre(3);

    let mut extra: Vec<(usize, usize, f64)> = Vec::new();
    let mut dirichlet: BTreeMap<usize, f64> = BTreeMap::new();
    let mut robin_edges = 0usize;
    let mut periodic = false;

    for &label in &labels {
        let bc = bcs.get(label).unwrap();
        let edges: Vec<_> = mesh.edges_with_label(label).collect();
        match bc {
            BoundaryCondition::Natural => {
                constraint_log.push(format!("{label}: natural"));
            }
            BoundaryCondition::Dirichlet(g) => {
                let coords = space.dof_coords();
                for e in &edges {
                    for d in space.boundary_edge_dofs(e) {
                        dirichlet.entry(d).or_insert_with(|| g(coords[d]));
                    }
                }
                constraint_log.push(format!("{label}: Dirichlet on {} edges", edges.len()));
            }
            BoundaryCondition::NeumannFlux(q) => {
                for e in &edges {
                    let [a, b] = e.vertices;
                    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    let dofs = space.boundary_edge_dofs(e);
                    for &(t, w) in &gauss {
                        let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                        let qv = q(x) * w * len;
                        let phi = edge_values(order, t);
                        for (k, &d) in dofs.iter().enumerate() {
                            rhs[d] += qv * phi[k];
                        }
                    }
                }
                constraint_log.push(format!("{label}: flux on {} edges", edges.len()));
            }
            BoundaryCondition::Robin { alpha } => {
                if *alpha == 0.0 {
                    return Err(Error::BoundaryCondition(format!(
                        "Robin coefficient on {label} is zero; use a Dirichlet condition"
                    )));
                }
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::BoundaryCondition(format!(
                        "Robin coefficient on {label} must be positive, got {alpha}"
                    )));
                }
                for e in &edges {
                    let [a, b] = e.vertices;
                    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    let dofs = space.boundary_edge_dofs(e);
                    for &(t, w) in &gauss {
                        let phi = edge_values(order, t);
                        for (i, &di) in dofs.iter().enumerate() {
                            for (j, &dj) in dofs.iter().enumerate() {
                                extra.push((di, dj, w * len * phi[i] * phi[j] / alpha));
                            }
                        }
                    }
                }
                robin_edges += edges.len();
                constraint_log.push(format!("{label}: Robin alpha={alpha:e} on {} edges", edges.len()));
            }
            BoundaryCondition::Periodic => {
                if label != BoundaryLabel::Left && label != BoundaryLabel::Right {
                    return Err(Error::BoundaryCondition(format!(
                        "periodic condition on {label}; only Left/Right can be periodic"
                    )));
                }
                periodic = true;
            }
        }
    }

    // master[d] = representative dof of d after periodic identification.
    let mut master: Vec<usize> = (0..n).collect();
    if periodic {
        for side in [BoundaryLabel::Left, BoundaryLabel::Right] {
            if !matches!(bcs.get(side), Some(BoundaryCondition::Periodic)) {
                return Err(Error::BoundaryCondition(format!(
                    "periodic condition needs both Left and Right, {side} is {:?}",
                    bcs.get(side)
                )));
            }
        }
        let pairs = mesh
            .periodic_pairs
            .as_ref()
            .ok_or_else(|| Error::BoundaryCondition("mesh has no periodic pairs".into()))?;
        let to_right: HashMap<usize, usize> = pairs.iter().copied().collect();
        for &(l, r) in pairs {
            master[r] = l;
        }
        let mut merged = pairs.len();
        if order == 2 {
            for e in mesh.edges_with_label(BoundaryLabel::Left) {
                let [a, b] = e.vertices;
                let (Some(&ra), Some(&rb)) = (to_right.get(&a), to_right.get(&b)) else {
                    return Err(Error::BoundaryCondition(format!("left edge {a}-{b} is not paired")));
                };
                let (Some(ml), Some(mr)) = (space.edge_dof(a, b), space.edge_dof(ra, rb)) else {
                    return Err(Error::BoundaryCondition(format!(
                        "left edge {a}-{b} has no right partner {ra}-{rb}"
                    )));
                };
                master[mr] = ml;
                merged += 1;
            }
        }
        constraint_log.push(format!("Left/Right: periodic, {merged} dofs merged"));
    }

    if dirichlet.is_empty() && robin_edges == 0 {
        return Err(Error::Singular(
            "pure Neumann problem: constants lie in the kernel; pin a value with a Dirichlet condition".into(),
        ));
    }

    let mut full_to_reduced = vec![usize::MAX; n];
    let mut representative = Vec::new();
    for d in 0..n {
        if master[d] == d {
            full_to_reduced[d] = representative.len();
            representative.push(d);
        }
    }
    for d in 0..n {
        full_to_reduced[d] = full_to_reduced[master[d]];
    }
    let nr = representative.len();
    let mut is_dirichlet = vec![false; nr];
    let mut values = vec![0.0; nr];
    for (&d, &v) in &dirichlet {
        let r = full_to_reduced[d];
        if !is_dirichlet[r] || master[d] == d {
            values[r] = v;
        }
        is_dirichlet[r] = true;
    }

    let mut base_rhs = vec![0.0; nr];
    for d in 0..n {
        base_rhs[full_to_reduced[d]] += rhs[d];
    }
    let mut kept = Vec::with_capacity(matrix.nnz() + extra.len());
    let mut coupling = Vec::new();
    for (i, j, v) in matrix.triplets().into_iter().chain(extra) {
        let (ri, rj) = (full_to_reduced[i], full_to_reduced[j]);
        match (is_dirichlet[ri], is_dirichlet[rj]) {
            (false, false) => kept.push((ri, rj, v)),
            (false, true) => coupling.push((ri, rj, v)),
            _ => {}
        }
    }
    for r in 0..nr {
        if is_dirichlet[r] {
            kept.push((r, r, 1.0));
        }
    }
    let nd = is_dirichlet.iter().filter(|&&b| b).count();
    constraint_log.push(format!("{nd} Dirichlet dofs eliminated, {nr} reduced dofs"));
    let constraints = Constraints {
        full_to_reduced,
        representative,
        is_dirichlet,
        values,
        base_rhs,
        coupling: CsrMatrix::from_triplets(nr, nr, coupling),
    };
    let rhs = lifted_rhs(&constraints);
    let matrix = CsrMatrix::from_triplets(nr, nr, kept);
    if let Some(r) = matrix.diagonal().iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Singular(format!("reduced row {r} has a non-positive diagonal")));
    }
    Ok(SparseSystem { matrix, rhs, constraint_log, space, constraints: Some(constraints) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Direct,
    ConjugateGradient,
}

/// Solver bound to the matrix of one system; reusable while only the
/// right-hand side changes.
#[derive(Debug)]
pub struct LinearSolver {
    factor: Option<Cholesky>,
}

impl LinearSolver {
    pub fn new(system: &SparseSystem, method: SolveMethod) -> Result<Self> {
        let direct = match method {
            SolveMethod::Auto => system.size() <= DIRECT_LIMIT,
            SolveMethod::Direct => true,
            SolveMethod::ConjugateGradient => false,
        };
        let factor = if direct { Some(Cholesky::factor(&system.matrix)?) } else { None };
        Ok(Self { factor })
    }

    pub fn solve(&self, system: &SparseSystem) -> Result<Field> {
        let x = match &self.factor {
            Some(f) => f.solve(&system.rhs),
            None => conjugate_gradient(&system.matrix, &system.rhs, RESIDUAL_TOL, 20 * system.size() + 1000)?,
        };
        let achieved = relative_residual(&system.matrix, &x, &system.rhs);
        if !(achieved <= RESIDUAL_TOL) {
            return Err(Error::Residual { achieved, target: RESIDUAL_TOL });
        }
        Field::new(system.space.clone(), system.expand(&x))
    }
}

pub fn solve(system: &SparseSystem) -> Result<Field> {
    solve_with(system, SolveMethod::Auto)
}

pub fn solve_with(system: &SparseSystem, method: SolveMethod) -> Result<Field> {
    if system.constraints.is_none() {
        return Err(Error::Singular("no boundary conditions applied; the Laplacian is singular".into()));
    }
    LinearSolver::new(system, method)?.solve(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::field::NormKind;
    use crate::geometry::mesh::Mesh;
    use crate::geometry::meshgen::build_unit_square_mesh;
    use std::f64::consts::PI;

    fn all_dirichlet(g: impl Fn(Point) -> f64 + Send + Sync + Clone + 'static) -> BcSpec {
        let mut bcs = BcSpec::new();
        for l in [BoundaryLabel::Bottom, BoundaryLabel::Right, BoundaryLabel::Top, BoundaryLabel::Left] {
            bcs = bcs.with(l, BoundaryCondition::dirichlet(g.clone()));
        }
        bcs
    }

    #[test]
    fn reference_element_matrix() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            ..Default::default()
        };
        let space = FeSpace::new(Arc::new(mesh), 1).unwrap();
        let sys = assemble_laplace(&space).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((sys.matrix.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_triangle_square_by_hand() {
        // Diagonal 0–2: triangles (0,1,2) and (0,2,3).
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            ..Default::default()
        };
        let space = FeSpace::new(Arc::new(mesh), 1).unwrap();
        let a = assemble_laplace(&space).unwrap().matrix;
        let expect = [
            [1.0, -0.5, 0.0, -0.5],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [-0.5, 0.0, -0.5, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((a.get(i, j) - expect[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn row_sums_vanish_and_symmetric() {
        let mesh = Arc::new(build_unit_square_mesh(0.2).unwrap());
        for order in [1, 2] {
            let space = FeSpace::new(mesh.clone(), order).unwrap();
            let a = assemble_laplace(&space).unwrap().matrix;
            for i in 0..a.n_rows {
                assert!(a.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-12);
            }
            assert!(a.asymmetry() < 1e-13);
        }
    }

    #[test]
    fn patch_test_reproduces_affine() {
        let mesh = Arc::new(build_unit_square_mesh(0.2).unwrap());
        for order in [1, 2] {
            let space = FeSpace::new(mesh.clone(), order).unwrap();
            let g = |p: Point| 0.3 + 2.0 * p[0] - 1.5 * p[1];
            let sys = apply_bcs(assemble_laplace(&space).unwrap(), &all_dirichlet(g)).unwrap();
            let u = solve(&sys).unwrap();
            for (c, x) in u.coefficients.iter().zip(space.dof_coords()) {
                assert!((c - g(*x)).abs() < 1e-10);
            }
            let x2 = solve(&apply_bcs(assemble_laplace(&space).unwrap(), &all_dirichlet(|p| p[1])).unwrap()).unwrap();
            assert!((x2.evaluate([0.3, 0.7]).unwrap() - 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_neumann_is_rejected() {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(0.5).unwrap()), 1).unwrap();
        let mut bcs = BcSpec::new();
        for l in [BoundaryLabel::Bottom, BoundaryLabel::Right, BoundaryLabel::Top, BoundaryLabel::Left] {
            bcs = bcs.with(l, BoundaryCondition::Natural);
        }
        let err = apply_bcs(assemble_laplace(&space).unwrap(), &bcs).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }

    #[test]
    fn coverage_is_enforced() {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(0.5).unwrap()), 1).unwrap();
        let bcs = BcSpec::new().with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|_| 0.0));
        assert!(matches!(
            apply_bcs(assemble_laplace(&space).unwrap(), &bcs),
            Err(Error::BoundaryCondition(_))
        ));
        let dup = all_dirichlet(|_| 0.0).with(BoundaryLabel::Top, BoundaryCondition::Natural);
        assert!(apply_bcs(assemble_laplace(&space).unwrap(), &dup).is_err());
    }

    fn robin_problem(alpha: f64, order: usize, h: f64) -> Result<Field> {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(h).unwrap()), order).unwrap();
        let bcs = BcSpec::new()
            .with(BoundaryLabel::Bottom, BoundaryCondition::Robin { alpha })
            .with(BoundaryLabel::Top, BoundaryCondition::dirichlet(|_| 1.0))
            .with(BoundaryLabel::Left, BoundaryCondition::Natural)
            .with(BoundaryLabel::Right, BoundaryCondition::Natural);
        solve(&apply_bcs(assemble_laplace(&space)?, &bcs)?)
    }

    #[test]
    fn robin_reduces_to_affine_profile() {
        for alpha in [0.05, 0.1, 1.0] {
            for order in [1, 2] {
                let u = robin_problem(alpha, order, 0.25).unwrap();
                for (c, x) in u.coefficients.iter().zip(u.space().dof_coords()) {
                    let exact = (x[1] + alpha) / (1.0 + alpha);
                    assert!((c - exact).abs() < 1e-10, "alpha {alpha} P{order}: {c} vs {exact}");
                }
            }
        }
        assert!(matches!(robin_problem(0.0, 1, 0.5), Err(Error::BoundaryCondition(_))));
    }

    #[test]
    fn flux_condition_matches_linear_solution() {
        // u = 2 x₂ with u = 0 on the bottom and ∂u/∂n = 2 on the top.
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(0.25).unwrap()), 2).unwrap();
        let bcs = BcSpec::new()
            .with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|_| 0.0))
            .with(BoundaryLabel::Top, BoundaryCondition::flux(|_| 2.0))
            .with(BoundaryLabel::Left, BoundaryCondition::Natural)
            .with(BoundaryLabel::Right, BoundaryCondition::Natural);
        let u = solve(&apply_bcs(assemble_laplace(&space).unwrap(), &bcs).unwrap()).unwrap();
        for (c, x) in u.coefficients.iter().zip(space.dof_coords()) {
            assert!((c - 2.0 * x[1]).abs() < 1e-10);
        }
    }

    fn manufactured(order: usize, h: f64, method: SolveMethod) -> (f64, f64, Field) {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(h).unwrap()), order).unwrap();
        let exact = |p: Point| (PI * p[0]).sin() * (PI * p[1]).sin();
        let mut sys = assemble_laplace(&space).unwrap();
        sys.add_source(&|p| 2.0 * PI * PI * exact(p)).unwrap();
        let sys = apply_bcs(sys, &all_dirichlet(exact)).unwrap();
        let u = solve_with(&sys, method).unwrap();
        let ex = |p: Point| {
            let (s1, c1) = (PI * p[0]).sin_cos();
            let (s2, c2) = (PI * p[1]).sin_cos();
            (s1 * s2, [PI * c1 * s2, PI * s1 * c2])
        };
        let l2 = u.error_norm(NormKind::L2, &ex).unwrap();
        let h1 = u.error_norm(NormKind::H1Semi, &ex).unwrap();
        (l2, h1, u)
    }

    #[test]
    fn manufactured_convergence_orders() {
        for (order, l2_min, h1_min) in [(1, 1.9, 0.9), (2, 2.9, 1.9)] {
            let hs = [0.25, 0.125, 0.0625];
            let errs: Vec<(f64, f64)> = hs.iter().map(|&h| {
                let (a, b, _) = manufactured(order, h, SolveMethod::Direct);
                (a, b)
            }).collect();
            for w in errs.windows(2) {
                let l2_rate = (w[0].0 / w[1].0).log2();
                let h1_rate = (w[0].1 / w[1].1).log2();
                assert!(l2_rate >= l2_min, "P{order} L2 rate {l2_rate}");
                assert!(h1_rate >= h1_min, "P{order} H1 rate {h1_rate}");
            }
        }
    }

    #[test]
    fn cg_matches_direct() {
        let (_, _, a) = manufactured(2, 0.125, SolveMethod::Direct);
        let (_, _, b) = manufactured(2, 0.125, SolveMethod::ConjugateGradient);
        let diff = Field::new(a.space().clone(), a.coefficients.iter().zip(&b.coefficients).map(|(p, q)| p - q).collect()).unwrap();
        assert!(diff.norm(NormKind::L2, None).unwrap() < 1e-8);
    }

    #[test]
    fn dirichlet_update_reuses_factor() {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(0.25).unwrap()), 2).unwrap();
        let mut sys = apply_bcs(assemble_laplace(&space).unwrap(), &all_dirichlet(|p| p[0])).unwrap();
        let solver = LinearSolver::new(&sys, SolveMethod::Direct).unwrap();
        let u1 = solver.solve(&sys).unwrap();
        assert!((u1.evaluate([0.4, 0.6]).unwrap() - 0.4).abs() < 1e-10);
        sys.update_dirichlet(|_, p| Some(1.0 + p[1])).unwrap();
        let u2 = solver.solve(&sys).unwrap();
        assert!((u2.evaluate([0.4, 0.6]).unwrap() - 1.6).abs() < 1e-10);
    }
}
