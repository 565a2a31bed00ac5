use std::f64::consts::PI;
use std::sync::Arc;

use roughlayer::cell::{decay_audit, solve_beta};
use roughlayer::corrector::{decay_audit as corrector_decay, solve_corrector, solve_corrector_from_cell, DecayParams};
use roughlayer::fem::ScalarFn;
use roughlayer::geometry::{RoughProfile, Side};

// Second-order perturbation of the flat cell: β̄ = 1 − π a² + O(a⁴).
fn small_amplitude_beta_bar(a: f64) -> f64 {
    1.0 - PI * a * a
}

#[test]
fn beta_bar_small_amplitude_expansion() {
    let a = 0.02;
    let cell = solve_beta(&RoughProfile::sine_with(-1.0, a), 2.0, 1.0 / 32.0).unwrap();
    let got = 1.0 - cell.beta_bar;
    let want = 1.0 - small_amplitude_beta_bar(a);
    assert!((got / want - 1.0).abs() < 0.015, "1 - beta_bar {got:e} vs {want:e}");
}

#[test]
fn beta_bar_refinement_sequence() {
    let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let frozen = [0.641792342734, 0.641098517219, 0.640890525133];
    let vals: Vec<f64> = hs.iter().map(|&h| solve_beta(&RoughProfile::sine(), 4.0, h).unwrap().beta_bar).collect();
    for (v, f) in vals.iter().zip(frozen) {
        assert!((v - f).abs() < 1e-9, "{v} vs {f}");
    }
    let ratio = (vals[0] - vals[1]) / (vals[1] - vals[2]);
    assert!((2.5..4.5).contains(&ratio), "ratio {ratio}");
    let extrapolated = vals[2] - (vals[1] - vals[2]) / (ratio - 1.0);
    assert!((vals[1] - extrapolated).abs() < 5e-4);
}

#[test]
fn decay_rate_is_stable_under_refinement() {
    let rates: Vec<f64> = [0.125, 0.0625]
        .iter()
        .map(|&h| decay_audit(&solve_beta(&RoughProfile::sine(), 6.0, h).unwrap()).unwrap().rate.unwrap())
        .collect();
    for r in &rates {
        assert!((r / (2.0 * PI) - 1.0).abs() < 0.1, "{r}");
    }
    assert!((rates[0] - rates[1]).abs() < 0.1);
}

#[test]
fn even_profile_gives_mirror_correctors() {
    let profile = RoughProfile::cosine(0.3);
    let flux: ScalarFn = Arc::new(|p| (-2.0 * PI * (p[1] + 1.0)).exp());
    let mut gaps = Vec::new();
    let mut pair = None;
    for h in [0.125, 0.0625] {
        let xi_in = solve_corrector(Side::In, &profile, flux.clone(), 8.0, h).unwrap();
        let xi_out = solve_corrector(Side::Out, &profile, flux.clone(), 8.0, h).unwrap();
        assert!(xi_in.energy_defect() < 1e-10 && xi_out.energy_defect() < 1e-10);
        gaps.push((xi_in.energy - xi_out.energy).abs() / xi_in.energy);
        pair = Some((xi_in, xi_out));
    }
    // The inlet mesh is not graded, so the gap closes with h.
    assert!(gaps[1] < 1e-2 && gaps[1] < gaps[0] / 2.0, "{gaps:?}");
    let (xi_in, xi_out) = pair.unwrap();
    for y in [[0.5, 0.0], [1.5, 1.0], [3.0, 0.5]] {
        let (a, b) = (xi_in.eval_or_zero(y), xi_out.eval_or_zero([-y[0], y[1]]));
        assert!((a - b).abs() <= 2e-3 * a.abs(), "{y:?}: {a} {b}");
    }
    assert_eq!(xi_in.eval_or_zero([-0.5, 0.0]), 0.0);
    assert_eq!(xi_out.eval_or_zero([0.5, 9.0]), 0.0);
}

#[test]
fn outlet_corrector_decays() {
    let cell = solve_beta(&RoughProfile::sine(), 4.0, 0.125).unwrap();
    let xi = solve_corrector_from_cell(&cell, Side::Out, 20.0, 0.125).unwrap();
    assert!(xi.energy_defect() < 1e-10);
    let report = corrector_decay(&xi, &DecayParams::default()).unwrap();
    assert!(report.trivially_decayed || report.min_power().unwrap() >= 0.8, "{report:?}");
}

#[test]
fn decay_parameters_are_checked() {
    assert!(DecayParams::new(0.5, 5.0).is_err());
    assert!(DecayParams::new(0.4, 1.0).is_err());
    assert!(DecayParams::new(0.4, 11.0).is_err());
    let p = DecayParams::new(0.4, 10.0).unwrap();
    assert!((p.exponent() - 0.95).abs() < 1e-15);
    assert!((p.threshold() - 0.8).abs() < 1e-12);
    assert!(DecayParams::m_sup() < 10.05);
    assert!(DecayParams::new(0.4, 10.04).is_err());
}
