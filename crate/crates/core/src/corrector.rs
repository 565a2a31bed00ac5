//! Vertical correctors ξ_in, ξ_out on truncated rough quarter-planes.

use std::fmt;
use std::sync::Arc;

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::{
    apply_bcs, assemble_laplace, solve, BcSpec, BoundaryCondition, BoxRegion, FeSpace, Field, NormKind,
    ScalarFn,
};
use crate::fit::power_law;
use crate::geometry::{
    build_quarter_plane_mesh, BoundaryLabel, DomainSpec, GradingSpec, RoughProfile, Side,
};

const FAR_FROM_CORNER: f64 = 0.25;

/// Exponents of the pointwise decay bound `|ξ| ≤ k (1 + ρ²)^{−(1 − 1/(2M))/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    pub alpha: f64,
    pub m: f64,
}

impl DecayParams {
    pub const ALPHA0: f64 = std::f64::consts::SQRT_2 / std::f64::consts::PI;

    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        if !(alpha.abs() < Self::ALPHA0) {
            return Err(Error::InvalidInput(format!("|alpha| = {} must be below sqrt(2)/pi", alpha.abs())));
        }
        if !(m > 1.0 && m <= 10.5) {
            return Err(Error::InvalidInput(format!("M = {m} outside (1, 10.5]")));
        }
        if m >= Self::m_sup() {
            return Err(Error::InvalidInput(format!("M = {m} must be below 1/(1 - 2 alpha0)")));
        }
        Ok(Self { alpha, m })
    }

    /// `1/(1 − 2α₀) ≈ 10.03`, the supremum of admissible `M`.
    pub fn m_sup() -> f64 {
        1.0 / (1.0 - 2.0 * Self::ALPHA0)
    }

    /// `1 − 1/(2M)`.
    pub fn exponent(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.m)
    }

    /// Smallest fitted power accepted by the decay audit.
    pub fn threshold(&self) -> f64 {
        self.exponent() - 0.15
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        Self { alpha: 0.4, m: 10.0 }
    }
}

#[derive(Clone)]
pub struct CorrectorSolution {
    pub xi: Field,
    pub side: Side,
    pub l: f64,
    pub h: f64,
    /// `∫ |∇ξ|²`.
    pub energy: f64,
    /// `∫_E q ξ dσ` with the same edge quadrature as the load vector.
    pub boundary_work: f64,
    /// Relative discrete `L²(E)` distance between `∂ξ/∂n` and `q` at the
    /// Gauss points of E.
    pub flux_mismatch: f64,
    /// Same, restricted to points at least 0.25 above the corner.
    pub flux_mismatch_far: f64,
    pub flux: ScalarFn,
}

impl fmt::Debug for CorrectorSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorrectorSolution")
            .field("side", &self.side)
            .field("l", &self.l)
            .field("h", &self.h)
            .field("dofs", &self.xi.coefficients.len())
            .field("energy", &self.energy)
            .field("boundary_work", &self.boundary_work)
            .finish()
    }
}

impl CorrectorSolution {
    pub fn energy_defect(&self) -> f64 {
        let scale = self.energy.abs().max(self.boundary_work.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.energy - self.boundary_work).abs() / scale
        }
    }

    /// `ξ(y)`, zero outside the truncated quarter-plane.
    pub fn eval_or_zero(&self, y: [f64; 2]) -> f64 {
        let inside = match self.side {
            Side::In => y[0] >= 0.0 && y[0] <= self.l,
            Side::Out => y[0] <= 0.0 && y[0] >= -self.l,
        };
        if !inside || y[1] > self.l {
            return 0.0;
        }
        self.xi.evaluate(y).unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.xi.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Neumann data `q(y₂) = −∂β/∂n` on E for the given side; zero above the cell.
pub fn corrector_flux(cell: &CellSolution, side: Side) -> ScalarFn {
    let trace = match side {
        Side::In => &cell.neumann_trace_e,
        Side::Out => &cell.neumann_trace_right,
    };
    trace.to_fn(1, 0.0, 1.0)
}

/// Mesh grading at the corner `(0, f(0))`: none for the inlet (acute angle),
/// geometric toward the re-entrant outlet corner.
pub fn corrector_grading(side: Side, profile: &RoughProfile, h: f64) -> Result<GradingSpec> {
    let corner = [0.0, profile.eval(0.0)];
    match side {
        Side::In => Ok(GradingSpec::none(corner, h)),
        Side::Out => GradingSpec::new(corner, h / 32.0, 0.5, h),
    }
}

/// P2 solve of `−Δξ = 0` with `∂ξ/∂n = q` on E, `ξ = 0` on the rough bottom and
/// natural conditions on the artificial sides.
pub fn solve_corrector(side: Side, profile: &RoughProfile, flux: ScalarFn, l: f64, h: f64) -> Result<CorrectorSolution> {
    let spec = DomainSpec::quarter_plane(side, profile.clone(), l);
    let grading = corrector_grading(side, profile, h)?;
    let mesh = Arc::new(build_quarter_plane_mesh(&spec, h, &grading)?);
    let space = FeSpace::new(mesh.clone(), 2)?;
    let bcs = BcSpec::new()
        .with(BoundaryLabel::Left, BoundaryCondition::NeumannFlux(flux.clone()))
        .with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|_| 0.0))
        .with(BoundaryLabel::ArtificialSide, BoundaryCondition::Natural)
        .with(BoundaryLabel::ArtificialTop, BoundaryCondition::Natural);
    let system = apply_bcs(assemble_laplace(&space)?, &bcs)?;
    let xi = solve(&system)?;

    let gauss = gauss_legendre(3);
    let mut boundary_work = 0.0;
    let mut flux_l1 = 0.0;
    let mut points = Vec::new();
    for e in mesh.edges_with_label(BoundaryLabel::Left) {
        let [a, b] = e.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        for &(t, w) in &gauss {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let q = flux(x);
            boundary_work += w * len * q * xi.evaluate(x)?;
            flux_l1 += w * len * q.abs();
            points.push((x, q));
        }
    }
    if flux_l1 < 1e-12 {
        log::warn!("corrector Neumann data is negligible (L1 norm {flux_l1:e}); expect a trivial corrector");
    }
    let energy = xi.norm(NormKind::H1Semi, None)?.powi(2);
    let dn = xi.boundary_normal_derivative(BoundaryLabel::Left)?;
    let corner_y = profile.eval(0.0);
    let (mut num, mut den, mut num_far, mut den_far) = (0.0, 0.0, 0.0, 0.0);
    for (seg, q) in dn.samples().iter().zip(points.iter()) {
        let d2 = (seg.1 - q.1).powi(2);
        num += d2;
        den += q.1 * q.1;
        if q.0[1] >= corner_y + FAR_FROM_CORNER {
            num_far += d2;
            den_far += q.1 * q.1;
        }
    }
    let rel = |n: f64, d: f64| if d > 0.0 { (n / d).sqrt() } else { n.sqrt() };
    let flux_mismatch = rel(num, den);
    let flux_mismatch_far = rel(num_far, den_far);
    Ok(CorrectorSolution { xi, side, l, h, energy, boundary_work, flux_mismatch, flux_mismatch_far, flux })
}

/// Convenience wrapper: corrector data taken from a solved cell problem.
pub fn solve_corrector_from_cell(cell: &CellSolution, side: Side, l: f64, h: f64) -> Result<CorrectorSolution> {
    solve_corrector(side, &cell.profile, corrector_flux(cell, side), l, h)
}

#[derive(Debug, Clone)]
pub struct DecayRay {
    pub name: &'static str,
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub power: Option<f64>,
    pub fit_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CorrectorDecayReport {
    pub rays: Vec<DecayRay>,
    pub threshold: f64,
    pub trivially_decayed: bool,
    pub passed: bool,
}

impl CorrectorDecayReport {
    pub fn min_power(&self) -> Option<f64> {
        self.rays.iter().filter_map(|r| r.power).reduce(f64::min)
    }
}

/// `|ξ|` at `ρ ∈ {2, 4, 8, L/2}` on the diagonal and horizontal rays, fitted
/// as `C ρ^{−p}`.
pub fn decay_audit(sol: &CorrectorSolution, params: &DecayParams) -> Result<CorrectorDecayReport> {
    if sol.l < 8.0 {
        return Err(Error::InvalidInput(format!("corrector decay audit needs L >= 8, got {}", sol.l)));
    }
    let threshold = params.threshold();
    if sol.max_abs() <= 1e-9 {
        return Ok(CorrectorDecayReport { rays: Vec::new(), threshold, trivially_decayed: true, passed: true });
    }
    let sign = match sol.side {
        Side::In => 1.0,
        Side::Out => -1.0,
    };
    let rho = vec![2.0, 4.0, 8.0, sol.l / 2.0];
    let d = std::f64::consts::FRAC_1_SQRT_2;
    let mut rays = Vec::new();
    for (name, dir) in [("diagonal", [sign * d, d]), ("horizontal", [sign, 0.0])] {
        let values = rho
            .iter()
            .map(|&r| sol.xi.evaluate([r * dir[0], r * dir[1]]).map(f64::abs))
            .collect::<Result<Vec<_>>>()?;
        let fit = power_law(&rho, &values);
        rays.push(DecayRay {
            name,
            rho: rho.clone(),
            values,
            power: fit.map(|f| -f.slope),
            fit_residual: fit.map(|f| f.residual),
        });
    }
    let passed = rays.iter().all(|r| r.power.is_some_and(|p| p >= threshold));
    Ok(CorrectorDecayReport { rays, threshold, trivially_decayed: false, passed })
}

#[derive(Debug, Clone)]
pub struct TruncationReport {
    pub lengths: Vec<f64>,
    /// `‖∇(ξ^{L_i} − ξ^{L_{i+1}})‖` on the common box of side `L_min`.
    pub differences: Vec<f64>,
    pub power: Option<f64>,
    pub decreasing: bool,
    pub trivially_converged: bool,
    pub passed: bool,
}

impl TruncationReport {
    pub const ALPHA: f64 = 0.4;
    pub const THRESHOLD: f64 = Self::ALPHA - 0.2;
}

/// Differences between successive truncations, measured on `Π^{L_min}`.
pub fn truncation_audit(sols: &[CorrectorSolution]) -> Result<TruncationReport> {
    if sols.len() < 3 {
        return Err(Error::InvalidInput(format!("truncation audit needs >= 3 lengths, got {}", sols.len())));
    }
    let side = sols[0].side;
    if sols.iter().any(|s| s.side != side) {
        return Err(Error::InvalidInput("truncation audit mixes inlet and outlet correctors".into()));
    }
    let mut sorted: Vec<&CorrectorSolution> = sols.iter().collect();
    sorted.sort_by(|a, b| a.l.partial_cmp(&b.l).unwrap());
    let l_min = sorted[0].l;
    let region = match side {
        Side::In => BoxRegion::new([0.0, f64::NEG_INFINITY], [l_min, l_min]),
        Side::Out => BoxRegion::new([-l_min, f64::NEG_INFINITY], [0.0, l_min]),
    };
    let mut differences = Vec::new();
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = a.xi.integrate(Some(&region), |x, _, du| {
            let db = b.xi.gradient(x).unwrap_or([0.0, 0.0]);
            (du[0] - db[0]).powi(2) + (du[1] - db[1]).powi(2)
        })?;
        differences.push(s.max(0.0).sqrt());
    }
    let lengths: Vec<f64> = sorted.iter().map(|s| s.l).collect();
    if differences.iter().all(|&d| d <= 1e-9) {
        return Ok(TruncationReport {
            lengths,
            differences,
            power: None,
            decreasing: true,
            trivially_converged: true,
            passed: true,
        });
    }
    let decreasing = differences.windows(2).all(|w| w[1] < w[0]);
    let power = power_law(&lengths[..differences.len()], &differences).map(|f| -f.slope);
    let passed = decreasing && power.is_some_and(|p| p >= TruncationReport::THRESHOLD);
    Ok(TruncationReport { lengths, differences, power, decreasing, trivially_converged: false, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_params() {
        assert_eq!(DecayParams::ALPHA0, 2f64.sqrt() / std::f64::consts::PI);
        let p = DecayParams::default();
        assert!((p.exponent() - 0.95).abs() < 1e-15);
        assert!((p.threshold() - 0.8).abs() < 1e-12);
        assert!(DecayParams::new(0.5, 10.0).is_err());
        assert!(DecayParams::new(0.4, 10.1).is_err());
        assert!((DecayParams::m_sup() - 10.032).abs() < 1e-3);
        assert!(DecayParams::new(0.4, 10.0).is_ok());
    }

    #[test]
    fn zero_data_gives_zero_corrector() {
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let sol = solve_corrector(Side::In, &RoughProfile::flat(), zero, 8.0, 0.25).unwrap();
        assert!(sol.max_abs() <= 1e-9);
        let audit = decay_audit(&sol, &DecayParams::default()).unwrap();
        assert!(audit.trivially_decayed && audit.passed);
    }

    #[test]
    fn energy_identity_synthetic_flux() {
        let q: ScalarFn = Arc::new(|p| (-p[1] * p[1]).exp());
        for side in [Side::In, Side::Out] {
            let sol = solve_corrector(side, &RoughProfile::sine(), q.clone(), 8.0, 0.25).unwrap();
            assert!(sol.energy > 0.0);
            assert!(sol.energy_defect() < 1e-6, "{side:?}: {}", sol.energy_defect());
            let mesh = sol.xi.space().mesh();
            for v in mesh.vertices_with_label(BoundaryLabel::Bottom) {
                assert!(sol.xi.coefficients[v].abs() <= 1e-10);
            }
        }
    }
}
