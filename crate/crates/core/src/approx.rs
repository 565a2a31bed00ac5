//! Macroscopic approximations on the unit square `Ω⁰`.

use std::sync::Arc;

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::fem::{apply_bcs, assemble_laplace, solve, BcSpec, BoundaryCondition, FeSpace, Field};
use crate::geometry::{build_unit_square_mesh, BoundaryLabel, Point};

/// Value and gradient at a point.
pub type Jet = (f64, [f64; 2]);

/// A scalar function on `Ω⁰` with its gradient.
pub trait Evaluator: Send + Sync {
    fn jet(&self, x: Point) -> Result<Jet>;

    fn value(&self, x: Point) -> Result<f64> {
        Ok(self.jet(x)?.0)
    }
}

fn check_square(x: Point) -> Result<()> {
    const TOL: f64 = 1e-12;
    if x[0] < -TOL || x[0] > 1.0 + TOL || x[1] < -TOL || x[1] > 1.0 + TOL {
        return Err(Error::InvalidInput(format!("point ({}, {}) outside the unit square", x[0], x[1])));
    }
    Ok(())
}

/// `u⁰ = Ū x₂`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOrder {
    pub ubar: f64,
}

impl ZeroOrder {
    /// `∂u⁰/∂x₂ (x₁, 0)`.
    pub fn normal_slope(&self, _x1: f64) -> f64 {
        self.ubar
    }
}

impl Evaluator for ZeroOrder {
    fn jet(&self, x: Point) -> Result<Jet> {
        Ok((self.ubar * x[1], [0.0, self.ubar]))
    }
}

pub fn zero_order(ubar: f64) -> ZeroOrder {
    ZeroOrder { ubar }
}

/// A finite-element field on `Ω⁰` viewed as an evaluator.
#[derive(Debug, Clone)]
pub struct FieldEvaluator(pub Field);

impl Evaluator for FieldEvaluator {
    fn jet(&self, x: Point) -> Result<Jet> {
        Ok((self.0.evaluate(x)?, self.0.gradient(x)?))
    }
}

/// Averaged wall law: `u¹ = Ū` on `x₂ = 1`, `u¹ = εβ̄ ∂u¹/∂x₂` on `x₂ = 0`,
/// natural conditions on the sides; P2 on the unit-square grid of size `h`.
pub fn solve_wall_law(ubar: f64, epsilon: f64, beta_bar: f64, h: f64) -> Result<Field> {
    if !(beta_bar > 0.0) {
        return Err(Error::InvalidInput(format!("wall law needs beta_bar > 0, got {beta_bar}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} must be positive")));
    }
    let space = FeSpace::new(Arc::new(build_unit_square_mesh(h)?), 2)?;
    let bcs = BcSpec::new()
        .with(BoundaryLabel::Top, BoundaryCondition::dirichlet(move |_| ubar))
        .with(BoundaryLabel::Bottom, BoundaryCondition::Robin { alpha: epsilon * beta_bar })
        .with(BoundaryLabel::Left, BoundaryCondition::Natural)
        .with(BoundaryLabel::Right, BoundaryCondition::Natural);
    solve(&apply_bcs(assemble_laplace(&space)?, &bcs)?)
}

/// `x ↦ field((x − shift)/ε)`, or `fallback` where the micro point lies outside
/// the field's mesh. The gradient carries the `1/ε` chain-rule factor.
#[derive(Debug, Clone)]
pub struct RescaledMicro {
    pub field: Field,
    pub epsilon: f64,
    pub shift: Point,
    pub fallback: f64,
    /// Reduce the micro abscissa modulo 1 before lookup.
    pub periodic: bool,
    lo: Point,
    hi: Point,
}

pub fn rescale_micro(field: Field, epsilon: f64, shift: Point, fallback: f64) -> RescaledMicro {
    let (lo, hi) = field.space().mesh().bounding_box();
    RescaledMicro { field, epsilon, shift, fallback, periodic: false, lo, hi }
}

impl RescaledMicro {
    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn micro_point(&self, x: Point) -> Point {
        let mut y = [(x[0] - self.shift[0]) / self.epsilon, (x[1] - self.shift[1]) / self.epsilon];
        if self.periodic {
            y[0] = y[0].rem_euclid(1.0);
        }
        y
    }
}

impl Evaluator for RescaledMicro {
    fn jet(&self, x: Point) -> Result<Jet> {
        let y = self.micro_point(x);
        let tol = 1e-9;
        let in_box = y[0] >= self.lo[0] - tol
            && y[0] <= self.hi[0] + tol
            && y[1] >= self.lo[1] - tol
            && y[1] <= self.hi[1] + tol;
        if !in_box {
            return Ok((self.fallback, [0.0, 0.0]));
        }
        match (self.field.evaluate(y), self.field.gradient(y)) {
            (Ok(v), Ok(g)) => Ok((v, [g[0] / self.epsilon, g[1] / self.epsilon])),
            (Err(Error::PointOutside { .. }), _) | (_, Err(Error::PointOutside { .. })) => {
                Ok((self.fallback, [0.0, 0.0]))
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        }
    }
}

/// The ε-independent micro solutions shared by every ε of a study.
#[derive(Debug, Clone)]
pub struct MicroFields {
    pub cell: Arc<CellSolution>,
    pub xi_in: Field,
    pub xi_out: Field,
}

/// Micro solutions together with the rescaling parameter.
#[derive(Debug, Clone)]
pub struct MicroAtlas {
    pub micro: MicroFields,
    pub epsilon: f64,
}

impl MicroAtlas {
    pub fn new(micro: MicroFields, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 1]")));
        }
        log::debug!("micro atlas for profile {} at epsilon {epsilon}", micro.cell.profile.name());
        Ok(Self { micro, epsilon })
    }

    pub fn beta_bar(&self) -> f64 {
        self.micro.cell.beta_bar
    }

    /// `ε / (1 + εβ̄)`.
    pub fn prefactor(&self) -> f64 {
        prefactor(self.epsilon, self.beta_bar())
    }

    pub fn beta(&self) -> RescaledMicro {
        let cell = &self.micro.cell;
        let mut r = rescale_micro(cell.beta.clone(), self.epsilon, [0.0, 0.0], cell.beta_bar).periodic();
        // Only heights above the truncation use the fallback.
        r.lo[0] = f64::NEG_INFINITY;
        r.hi[0] = f64::INFINITY;
        r
    }

    pub fn xi_in(&self) -> RescaledMicro {
        rescale_micro(self.micro.xi_in.clone(), self.epsilon, [0.0, 0.0], 0.0)
    }

    pub fn xi_out(&self) -> RescaledMicro {
        rescale_micro(self.micro.xi_out.clone(), self.epsilon, [1.0, 0.0], 0.0)
    }
}

pub fn prefactor(epsilon: f64, beta_bar: f64) -> f64 {
    epsilon / (1.0 + epsilon * beta_bar)
}

/// `u⁰ + (ε/(1+εβ̄)) ∂u⁰/∂x₂(x₁,0) (β(x/ε) − β̄ x₂ [+ ξ_in(x/ε) + ξ_out((x₁−1)/ε, x₂/ε)])`.
pub struct BoundaryLayer {
    pub u0: ZeroOrder,
    pub atlas: MicroAtlas,
    beta: RescaledMicro,
    correctors: Option<(RescaledMicro, RescaledMicro)>,
}

impl BoundaryLayer {
    pub fn is_full(&self) -> bool {
        self.correctors.is_some()
    }
}

pub fn build_periodic_bl(u0: ZeroOrder, atlas: &MicroAtlas) -> BoundaryLayer {
    BoundaryLayer { u0, atlas: atlas.clone(), beta: atlas.beta(), correctors: None }
}

pub fn build_full_bl(u0: ZeroOrder, atlas: &MicroAtlas) -> BoundaryLayer {
    BoundaryLayer {
        u0,
        atlas: atlas.clone(),
        beta: atlas.beta(),
        correctors: Some((atlas.xi_in(), atlas.xi_out())),
    }
}

impl Evaluator for BoundaryLayer {
    fn jet(&self, x: Point) -> Result<Jet> {
        check_square(x)?;
        let (u, du) = self.u0.jet(x)?;
        let bb = self.atlas.beta_bar();
        let (b, db) = self.beta.jet(x)?;
        let mut c = b - bb * x[1];
        let mut dc = [db[0], db[1] - bb];
        if let Some((xin, xout)) = &self.correctors {
            let (a, da) = xin.jet(x)?;
            let (o, dout) = xout.jet(x)?;
            c += a + o;
            dc[0] += da[0] + dout[0];
            dc[1] += da[1] + dout[1];
        }
        let s = self.atlas.prefactor() * self.u0.normal_slope(x[0]);
        Ok((u + s * c, [du[0] + s * dc[0], du[1] + s * dc[1]]))
    }
}

/// The four approximants compared against the rough solution.
pub struct ApproximationSet {
    pub ubar: f64,
    pub u0: ZeroOrder,
    pub u1: FieldEvaluator,
    pub u1ep_periodic: BoundaryLayer,
    pub u1e_full: BoundaryLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approximant {
    U0,
    U1,
    PeriodicBl,
    FullBl,
}

impl Approximant {
    pub const ALL: [Approximant; 4] = [Approximant::U0, Approximant::U1, Approximant::PeriodicBl, Approximant::FullBl];

    pub fn as_str(self) -> &'static str {
        match self {
            Approximant::U0 => "u0",
            Approximant::U1 => "u1",
            Approximant::PeriodicBl => "blp",
            Approximant::FullBl => "bl",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == text.trim())
            .ok_or_else(|| Error::Parse(format!("unknown approximant `{text}` (expected u0|u1|blp|bl)")))
    }
}

impl ApproximationSet {
    pub fn build(ubar: f64, atlas: &MicroAtlas, h_wall: f64) -> Result<Self> {
        let u0 = zero_order(ubar);
        let u1 = FieldEvaluator(solve_wall_law(ubar, atlas.epsilon, atlas.beta_bar(), h_wall)?);
        Ok(Self {
            ubar,
            u0,
            u1,
            u1ep_periodic: build_periodic_bl(u0, atlas),
            u1e_full: build_full_bl(u0, atlas),
        })
    }

    pub fn get(&self, which: Approximant) -> &dyn Evaluator {
        match which {
            Approximant::U0 => &self.u0,
            Approximant::U1 => &self.u1,
            Approximant::PeriodicBl => &self.u1ep_periodic,
            Approximant::FullBl => &self.u1e_full,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_order_values() {
        let u = zero_order(1.0);
        assert_eq!(u.value([0.5, 0.25]).unwrap(), 0.25);
        assert_eq!(zero_order(2.0).value([0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(zero_order(3.0).jet([0.2, 0.9]).unwrap().1, [0.0, 3.0]);
    }

    #[test]
    fn wall_law_is_affine() {
        for (eps, c) in [(0.5, 0.64), (0.1, 1.0), (0.25, 2.0)] {
            let u = solve_wall_law(1.5, eps, c, 0.25).unwrap();
            for (v, x) in u.coefficients.iter().zip(u.space().dof_coords()) {
                let exact = 1.5 * (x[1] + eps * c) / (1.0 + eps * c);
                assert!((v - exact).abs() < 1e-10);
            }
        }
        let tiny = solve_wall_law(1.0, 1e-6, 0.64, 0.25).unwrap();
        assert!((tiny.evaluate([0.3, 0.4]).unwrap() - 0.4).abs() < 1e-5);
        assert!(solve_wall_law(1.0, 0.1, 0.0, 0.25).is_err());
    }

    #[test]
    fn prefactor_algebra() {
        assert!((prefactor(0.25, 4.0) - 0.125).abs() < 1e-15);
    }
}
