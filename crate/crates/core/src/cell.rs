//! Truncated periodic cell problem for the boundary-layer corrector β.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::quadrature::composite_gauss;
use crate::fem::{apply_bcs, assemble_laplace, solve, BcSpec, BoundaryCondition, FeSpace, Field, TraceFunction};
use crate::geometry::{build_cell_mesh, BoundaryLabel, DomainSpec, RoughProfile};

pub const DEFAULT_K_MAX: usize = 8;
pub const FOURIER_SAMPLES: usize = 256;
const LINE_PANELS: usize = 64;

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub beta: Field,
    pub beta_bar: f64,
    /// `β_k` for `k = −k_max ..= k_max`, index `k + k_max`.
    pub fourier: Vec<Complex64>,
    /// `−∂β/∂n` on `{y₁ = 0}` with the normal `(−1, 0)`.
    pub neumann_trace_e: TraceFunction,
    /// `−∂β/∂n` on `{y₁ = 1}` with the normal `(+1, 0)`.
    pub neumann_trace_right: TraceFunction,
    pub profile: RoughProfile,
    pub l: f64,
    pub h: f64,
}

impl CellSolution {
    pub fn k_max(&self) -> usize {
        (self.fourier.len() - 1) / 2
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        let km = self.k_max() as i64;
        if k.abs() > km {
            return Complex64::new(0.0, 0.0);
        }
        self.fourier[(k + km) as usize]
    }

    /// `β(y₁, y₂)` with `y₁` reduced to `[0, 1)` and `β̄` above the truncation.
    pub fn eval_periodic(&self, y: [f64; 2]) -> Result<f64> {
        if y[1] > self.l {
            return Ok(self.beta_bar);
        }
        self.beta.evaluate([y[0].rem_euclid(1.0), y[1]])
    }
}

/// Solves `−Δβ = 0` on the cell `{0 < y₁ < 1, f(y₁) < y₂ < L}` with `β = −y₂`
/// on the bottom, periodic sides and `∂β/∂n = 0` at `y₂ = L`, using P2.
pub fn solve_beta(profile: &RoughProfile, l: f64, h: f64) -> Result<CellSolution> {
    if !(l >= 2.0) {
        return Err(Error::InvalidInput(format!("cell truncation {l} below 2")));
    }
    let spec = DomainSpec::cell(profile.clone(), l);
    let mesh = Arc::new(build_cell_mesh(&spec, h)?);
    let space = FeSpace::new(mesh, 2)?;
    let bcs = BcSpec::new()
        .with(BoundaryLabel::Bottom, BoundaryCondition::dirichlet(|p| -p[1]))
        .with(BoundaryLabel::Left, BoundaryCondition::Periodic)
        .with(BoundaryLabel::Right, BoundaryCondition::Periodic)
        .with(BoundaryLabel::ArtificialTop, BoundaryCondition::Natural);
    let system = apply_bcs(assemble_laplace(&space)?, &bcs)?;
    CellSolution::from_field(solve(&system)?, profile, l, h)
}

impl CellSolution {
    /// Derived quantities of an already computed β.
    pub fn from_field(beta: Field, profile: &RoughProfile, l: f64, h: f64) -> Result<Self> {
        let beta_bar = line_mean(&beta, 0.0)?;
        let fourier = fourier_coefficients(&beta, 0.0, DEFAULT_K_MAX)?;
        let neumann_trace_e = beta.boundary_normal_derivative(BoundaryLabel::Left)?.scaled(-1.0);
        let neumann_trace_right = beta.boundary_normal_derivative(BoundaryLabel::Right)?.scaled(-1.0);
        Ok(CellSolution {
            beta,
            beta_bar,
            fourier,
            neumann_trace_e,
            neumann_trace_right,
            profile: profile.clone(),
            l,
            h,
        })
    }
}

/// `∫₀¹ β(y₁, y₂) dy₁` by composite three-point Gauss over 64 panels.
pub fn line_mean(beta: &Field, y2: f64) -> Result<f64> {
    let mut s = 0.0;
    for (x, w) in composite_gauss(0.0, 1.0, LINE_PANELS, 3) {
        s += w * beta.evaluate([x, y2])?;
    }
    Ok(s)
}

/// Trapezoidal `β_k(y₂) = ∫₀¹ β(y₁, y₂) e^{2πiky₁} dy₁` from 256 samples.
pub fn fourier_coefficients(beta: &Field, y2: f64, k_max: usize) -> Result<Vec<Complex64>> {
    let n = FOURIER_SAMPLES;
    let samples: Vec<f64> = (0..n)
        .map(|j| beta.evaluate([j as f64 / n as f64, y2]))
        .collect::<Result<_>>()?;
    let km = k_max as i64;
    let mut out = Vec::with_capacity(2 * k_max + 1);
    for k in -km..=km {
        if k < 0 {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let mut c = Complex64::new(0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * (k * j as i64) as f64 / n as f64;
            c += v * Complex64::from_polar(1.0, phase);
        }
        out.push(c / n as f64);
    }
    for k in 1..=k_max {
        out[k_max - k] = out[k_max + k].conj();
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CellDecayReport {
    pub heights: Vec<f64>,
    /// `sup_{y₁} |β(y₁, y₂) − mean_{y₁} β(·, y₂)|` at each height.
    pub deviations: Vec<f64>,
    pub rate: Option<f64>,
    pub trivially_decayed: bool,
    pub passed: bool,
}

impl CellDecayReport {
    pub const TARGET: f64 = 2.0 * std::f64::consts::PI;
}

/// Exponential decay of the oscillating part of β at `y₂ ∈ {1, 2, 3}`.
pub fn decay_audit(cell: &CellSolution) -> Result<CellDecayReport> {
    if cell.l < 3.0 {
        return Err(Error::InvalidInput(format!("decay audit needs L >= 3, got {}", cell.l)));
    }
    let heights = vec![1.0, 2.0, 3.0];
    let mut deviations = Vec::new();
    for &y2 in &heights {
        let mean = line_mean(&cell.beta, y2)?;
        let mut worst = 0.0f64;
        for j in 0..FOURIER_SAMPLES {
            let v = cell.beta.evaluate([j as f64 / FOURIER_SAMPLES as f64, y2])?;
            worst = worst.max((v - mean).abs());
        }
        deviations.push(worst);
    }
    if deviations.iter().all(|&d| d <= 1e-8) {
        return Ok(CellDecayReport { heights, deviations, rate: None, trivially_decayed: true, passed: true });
    }
    let logs: Vec<f64> = deviations.iter().map(|d| d.max(1e-300).ln()).collect();
    let rate = -crate::fit::least_squares(&heights, &logs).slope;
    let passed = rate >= 0.9 * CellDecayReport::TARGET;
    Ok(CellDecayReport { heights, deviations, rate: Some(rate), trivially_decayed: false, passed })
}
