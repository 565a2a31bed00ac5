//! Overlapping Schwarz solver for the Laplace problem on the rough domain.
//!
//! `Ω^ε = Ω⁰ ∪ Ω_sub` with the top grid on `Ω⁰ = (0,1)²` and a graded rough
//! sub-layer below `x₂ = ε/10`. The two meshes overlap on `0 < x₂ < ε/10`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::approx::{Evaluator, Jet};
use crate::error::{Error, Result};
use crate::fem::quadrature::composite_gauss;
use crate::fem::{
    apply_bcs, assemble_laplace, BcSpec, BoundaryCondition, FeSpace, Field, LinearSolver, SolveMethod, SparseSystem,
};
use crate::geometry::{
    build_rough_composite, unit_square_cells, BoundaryLabel, DomainSpec, GradingSpec, Mesh, MeshStats, Point,
    RoughProfile,
};

const MISMATCH_PANELS: usize = 64;

#[derive(Debug, Clone)]
pub struct RoughConfig {
    pub epsilon: f64,
    pub ubar: f64,
    /// `H = k ε^γ`.
    pub gamma: f64,
    pub k: f64,
    pub order: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub max_adapt: usize,
    /// Corner target `c ε^p`.
    pub corner_c: f64,
    pub corner_exponent: f64,
    pub grading_ratio: f64,
    /// Sub-layer background size `ε / bg_divisor`.
    pub bg_divisor: f64,
    pub method: SolveMethod,
    pub initial: InitialGuess,
}

/// Data for `V⁰` on `Γ⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// The linear solution of the flat channel of depth `−ε·mean(f)`.
    MeanDepth,
}

impl RoughConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            ubar: 1.0,
            gamma: 1.25,
            k: 0.5,
            order: 2,
            tol: 1e-10,
            max_iter: 200,
            max_adapt: 12,
            corner_c: 0.05,
            corner_exponent: 2.29,
            grading_ratio: 0.5,
            bg_divisor: 16.0,
            method: SolveMethod::Auto,
            initial: InitialGuess::MeanDepth,
        }
    }

    pub fn h_top(&self) -> f64 {
        self.k * self.epsilon.powf(self.gamma)
    }

    pub fn corner_target(&self) -> f64 {
        self.corner_c * self.epsilon.powf(self.corner_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidInput(format!("epsilon {} outside (0, 1]", self.epsilon)));
        }
        if !(self.gamma > 0.0 && self.k > 0.0) {
            return Err(Error::InvalidInput("mesh law needs gamma > 0 and k > 0".into()));
        }
        if self.order != 1 && self.order != 2 {
            return Err(Error::InvalidInput(format!("order {} not in {{1, 2}}", self.order)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || self.max_adapt == 0 {
            return Err(Error::InvalidInput("tolerance and iteration caps must be positive".into()));
        }
        if !(self.bg_divisor >= 1.0) {
            return Err(Error::InvalidInput(format!("bg_divisor {} below 1", self.bg_divisor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SchwarzState {
    pub top: Field,
    pub sub: Field,
    pub iterations: usize,
    pub mismatch: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundInfo {
    pub target_h_min: f64,
    pub background_h: f64,
    pub sub_stats: MeshStats,
    pub iterations: usize,
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub epsilon: f64,
    pub gamma: f64,
    pub k: f64,
    pub h_law: f64,
    pub top_cells: usize,
    pub top_stats: MeshStats,
    pub sub_stats: MeshStats,
    /// Smallest element diameter within `background_h` of the outlet corner.
    pub corner_h_min: f64,
    pub target_h_min: f64,
    pub iterations: usize,
    pub mismatch: f64,
    pub adapt_rounds: usize,
    pub rounds: Vec<RoundInfo>,
    pub top_dofs: usize,
    pub sub_dofs: usize,
}

#[derive(Debug, Clone)]
pub struct CompositeSolution {
    pub state: SchwarzState,
    pub provenance: Provenance,
    pub profile: RoughProfile,
    pub epsilon: f64,
    pub ubar: f64,
}

impl CompositeSolution {
    pub fn overlap_top(&self) -> f64 {
        self.epsilon / 10.0
    }

    pub fn top_mesh(&self) -> &Arc<Mesh> {
        self.state.top.space().mesh()
    }

    pub fn sub_mesh(&self) -> &Arc<Mesh> {
        self.state.sub.space().mesh()
    }

    /// Discrete maximum principle on both pieces: `min ≥ −tol`, `max ≤ Ū + tol`.
    pub fn max_principle_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in self.state.top.coefficients.iter().chain(&self.state.sub.coefficients) {
            worst = worst.max(-c).max(c - self.ubar);
        }
        worst
    }

    /// Monotone decrease of the mismatch from the second iteration on.
    pub fn contraction_ok(&self) -> bool {
        monotone(&self.state.history)
    }
}

/// `u^ε_h` restricted to `Ω⁰`: the top field above `ε/10`, the sub-layer below.
impl Evaluator for CompositeSolution {
    fn jet(&self, x: Point) -> Result<Jet> {
        let f = if x[1] >= self.overlap_top() { &self.state.top } else { &self.state.sub };
        Ok((f.evaluate(x)?, f.gradient(x)?))
    }
}

pub fn restrict_to_square(sol: &CompositeSolution) -> &dyn Evaluator {
    sol
}

fn monotone(history: &[f64]) -> bool {
    history.windows(2).skip(1).all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-28)
}

/// `∫₀¹ (U − V)² dx₁` on `x₂ = 0` plus the same on `x₂ = ε/10`.
pub fn interface_mismatch(top: &Field, sub: &Field, epsilon: f64) -> Result<f64> {
    let mut s = 0.0;
    for x2 in [0.0, epsilon / 10.0] {
        for (x1, w) in composite_gauss(0.0, 1.0, MISMATCH_PANELS, 3) {
            let d = top.evaluate([x1, x2])? - sub.evaluate([x1, x2])?;
            s += w * d * d;
        }
    }
    Ok(s)
}

fn label_dofs(space: &FeSpace, label: BoundaryLabel) -> Vec<usize> {
    let mut out: Vec<usize> = space
        .mesh()
        .edges_with_label(label)
        .flat_map(|e| space.boundary_edge_dofs(e))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn transfer(target: &mut SparseSystem, dofs: &[usize], source: &Field) -> Result<()> {
    let coords = target.space().dof_coords();
    let mut values = HashMap::with_capacity(dofs.len());
    for &d in dofs {
        values.insert(d, source.evaluate(coords[d])?);
    }
    target.update_dirichlet(|d, _| values.get(&d).copied())
}

/// Alternating Schwarz on a fixed mesh pair. `v0` is the Γ⁰ value of `V⁰`.
pub fn schwarz_iterate(
    top_mesh: Mesh,
    sub_mesh: Mesh,
    epsilon: f64,
    ubar: f64,
    v0: f64,
    cfg: &RoughConfig,
) -> Result<SchwarzState> {
    let top_space = FeSpace::new(Arc::new(top_mesh), cfg.order)?;
    let sub_space = FeSpace::new(Arc::new(sub_mesh), cfg.order)?;
    let top_bcs = BcSpec::new()
        .with(BoundaryLabel::Top, BoundaryCondition::dirichlet(move |_| ubar))
        .with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|_| 0.0))
        .with(BoundaryLabel::Left, BoundaryCondition::Natural)
        .with(BoundaryLabel::Right, BoundaryCondition::Natural);
    let sub_bcs = BcSpec::new()
        .with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|_| 0.0))
        .with(BoundaryLabel::Interface, BoundaryCondition::dirichlet(|_| 0.0))
        .with(BoundaryLabel::Left, BoundaryCondition::Natural)
        .with(BoundaryLabel::Right, BoundaryCondition::Natural);
    let mut top_sys = apply_bcs(assemble_laplace(&top_space)?, &top_bcs)?;
    let mut sub_sys = apply_bcs(assemble_laplace(&sub_space)?, &sub_bcs)?;
    let top_solver = LinearSolver::new(&top_sys, cfg.method)?;
    let sub_solver = LinearSolver::new(&sub_sys, cfg.method)?;
    let gamma0 = label_dofs(&top_space, BoundaryLabel::Bottom);
    let interface = label_dofs(&sub_space, BoundaryLabel::Interface);

    top_sys.update_dirichlet(|d, _| gamma0.binary_search(&d).is_ok().then_some(v0))?;
    let mut sub = Field::zeros(sub_space.clone());
    let mut top;
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        if it > 1 {
            transfer(&mut top_sys, &gamma0, &sub)?;
        }
        top = top_solver.solve(&top_sys)?;
        transfer(&mut sub_sys, &interface, &top)?;
        sub = sub_solver.solve(&sub_sys)?;
        let m = interface_mismatch(&top, &sub, epsilon)?;
        history.push(m);
        log::debug!("schwarz eps={epsilon} iteration {it}: mismatch {m:e}");
        if !monotone(&history) {
            return Err(Error::Schwarz(format!(
                "mismatch increased at iteration {it}: {:e} -> {m:e} (history {:?})",
                history[history.len() - 2],
                &history[history.len().saturating_sub(6)..]
            )));
        }
        if m < cfg.tol {
            return Ok(SchwarzState { top, sub, iterations: it, mismatch: m, history });
        }
    }
    Err(Error::Schwarz(format!(
        "no convergence in {} iterations for eps={epsilon}: last mismatch {:e}",
        cfg.max_iter,
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Meshes the composite, runs Schwarz, and refines the sub-layer (halving the
/// background and corner sizes) until its largest element is below `H`.
pub fn schwarz_solve(profile: &RoughProfile, cfg: &RoughConfig) -> Result<CompositeSolution> {
    cfg.validate()?;
    let eps = cfg.epsilon;
    let spec = DomainSpec::rough(profile.clone(), eps);
    spec.validate()?;
    let corner = spec.outlet_corner()?;
    let h_law = cfg.h_top();
    let top_cells = unit_square_cells(h_law);
    let mut bg = eps / cfg.bg_divisor;
    let mut target = cfg.corner_target().min(bg);
    let mut rounds = Vec::new();
    for round in 1..=cfg.max_adapt {
        let grading = GradingSpec::new(corner, target, cfg.grading_ratio, bg)?;
        let (top_mesh, sub_mesh) = build_rough_composite(&spec, h_law, &grading)?;
        let top_stats = top_mesh.stats();
        let sub_stats = sub_mesh.stats();
        let corner_h_min = sub_mesh.h_min_near(corner, bg).unwrap_or(sub_stats.h_min);
        let v0 = match cfg.initial {
            InitialGuess::Zero => 0.0,
            InitialGuess::MeanDepth => {
                let d = -eps * profile.offset();
                cfg.ubar * d / (1.0 + d)
            }
        };
        let state = schwarz_iterate(top_mesh, sub_mesh, eps, cfg.ubar, v0, cfg)?;
        rounds.push(RoundInfo {
            target_h_min: target,
            background_h: bg,
            sub_stats,
            iterations: state.iterations,
            mismatch: state.mismatch,
        });
        log::info!(
            "eps={eps} round {round}: H={h_law:.4e} sub h_max={:.4e} h_min={:.4e} iterations={} mismatch={:.3e}",
            sub_stats.h_max,
            sub_stats.h_min,
            state.iterations,
            state.mismatch
        );
        if sub_stats.h_max < h_law {
            let provenance = Provenance {
                epsilon: eps,
                gamma: cfg.gamma,
                k: cfg.k,
                h_law,
                top_cells,
                top_stats,
                sub_stats,
                corner_h_min,
                target_h_min: target,
                iterations: state.iterations,
                mismatch: state.mismatch,
                adapt_rounds: round,
                rounds,
                top_dofs: state.top.coefficients.len(),
                sub_dofs: state.sub.coefficients.len(),
            };
            return Ok(CompositeSolution { state, provenance, profile: profile.clone(), epsilon: eps, ubar: cfg.ubar });
        }
        bg *= 0.5;
        target *= 0.5;
    }
    Err(Error::Schwarz(format!(
        "sub-layer h_max stayed above H = {h_law:e} after {} rounds",
        cfg.max_adapt
    )))
}
