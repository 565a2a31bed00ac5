use wasm_bindgen::prelude::*;

use roughlayer::approx::{solve_wall_law, zero_order, Evaluator};
use roughlayer::cell::{decay_audit, solve_beta};
use roughlayer::geometry::RoughProfile;
use roughlayer::rough::{schwarz_solve, RoughConfig};

fn js_err(e: roughlayer::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn profile(amplitude: f64) -> RoughProfile {
    RoughProfile::sine_with(-1.0, amplitude)
}

/// Cell problem for `f = −1 + a sin(2πy)`.
///
/// Returns `[β̄, |β₁|, decay rate, deviation at y₂ = 1, 2, 3]`; the rate is NaN
/// when the oscillation is below resolution.
#[wasm_bindgen]
pub fn cell_problem(amplitude: f64, h: f64) -> Result<Vec<f64>, JsValue> {
    let cell = solve_beta(&profile(amplitude), 6.0, h).map_err(js_err)?;
    let audit = decay_audit(&cell).map_err(js_err)?;
    let mut out = vec![cell.beta_bar, cell.coefficient(1).norm(), audit.rate.unwrap_or(f64::NAN)];
    out.extend(audit.deviations);
    Ok(out)
}

/// `u⁰` and the wall law `u¹` sampled at `n` heights on `x₁ = 1/2`, interleaved
/// as `[x₂, u⁰, u¹, ...]`.
#[wasm_bindgen]
pub fn wall_law(epsilon: f64, beta_bar: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    let u1 = solve_wall_law(1.0, epsilon, beta_bar, 0.25).map_err(js_err)?;
    let u0 = zero_order(1.0);
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let x = [0.5, i as f64 / (n - 1) as f64];
        out.push(x[1]);
        out.push(u0.value(x).map_err(js_err)?);
        out.push(u1.evaluate(x).map_err(js_err)?);
    }
    Ok(out)
}

/// Schwarz solve of the rough problem at `ε`.
///
/// Returns `[iterations, mismatch, sub-layer h_min, sub-layer vertices,
/// then n pairs (x₂, u) on x₁ = 1/2 from the rough bottom to the top]`.
#[wasm_bindgen]
pub fn rough_solve(epsilon: f64, amplitude: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    let prof = profile(amplitude);
    let sol = schwarz_solve(&prof, &RoughConfig::new(epsilon)).map_err(js_err)?;
    let p = &sol.provenance;
    let mut out = vec![p.iterations as f64, p.mismatch, p.sub_stats.h_min, p.sub_stats.vertices as f64];
    let bottom = epsilon * prof.eval(0.5 / epsilon);
    let n = n.max(2);
    for i in 0..n {
        let x2 = bottom + (1.0 - bottom) * i as f64 / (n - 1) as f64;
        let field = if x2 >= sol.overlap_top() { &sol.state.top } else { &sol.state.sub };
        out.push(x2);
        out.push(field.evaluate([0.5, x2]).map_err(js_err)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_run_natively() {
        let c = cell_problem(0.5, 0.2).unwrap();
        assert!(c[0] > 0.5 && c[0] < 0.8);
        let w = wall_law(0.1, c[0], 3).unwrap();
        assert_eq!(w.len(), 9);
        assert!((w[8] - 1.0).abs() < 1e-12);
        let r = rough_solve(0.5, 0.5, 5).unwrap();
        assert!(r[1] < 1e-10);
        assert!(r[4] < 0.0 && (r[13] - 1.0).abs() < 1e-12);
    }
}
