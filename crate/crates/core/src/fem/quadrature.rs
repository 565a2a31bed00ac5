//! Quadrature rules on the reference triangle (barycentric points, weights
//! summing to 1) and on the unit interval.

/// Barycentric point and weight; integrals are `area · Σ w f(λ)`.
pub type TriPoint = ([f64; 3], f64);

/// Symmetric three-point rule, exact for quadratics.
pub fn triangle_degree2() -> Vec<TriPoint> {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    vec![([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)]
}

/// Radon's seven-point rule, exact for quintics.
pub fn triangle_degree5() -> Vec<TriPoint> {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let b1 = (9.0 + 2.0 * s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let a2 = (6.0 + s) / 21.0;
    let b2 = (9.0 - 2.0 * s) / 21.0;
    let w2 = (155.0 + s) / 1200.0;
    vec![
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([b1, a1, a1], w1),
        ([a1, b1, a1], w1),
        ([a1, a1, b1], w1),
        ([b2, a2, a2], w2),
        ([a2, b2, a2], w2),
        ([a2, a2, b2], w2),
    ]
}

/// Gauss–Legendre nodes and weights on `[0, 1]` for `n ∈ {1, 2, 3, 4, 5}`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let sym: &[(f64, f64)] = match n {
        1 => &[(0.0, 2.0)],
        2 => &[(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)],
        3 => &[
            (-0.774_596_669_241_483_4, 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            (0.774_596_669_241_483_4, 5.0 / 9.0),
        ],
        4 => &[
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ],
        5 => &[
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ],
        _ => panic!("gauss_legendre: unsupported order {n}"),
    };
    sym.iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Composite Gauss rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss(a: f64, b: f64, panels: usize, n: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let x0 = a + p as f64 * h;
        for &(t, w) in &rule {
            out.push((x0 + t * h, w * h));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_exact(p: u32, q: u32) -> f64 {
        // ∫_T x^p y^q over the unit right triangle = p! q! / (p + q + 2)!
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    fn apply(rule: &[TriPoint], p: u32, q: u32) -> f64 {
        // Reference triangle (0,0), (1,0), (0,1): x = λ₁, y = λ₂, area ½.
        0.5 * rule.iter().map(|(l, w)| w * l[1].powi(p as i32) * l[2].powi(q as i32)).sum::<f64>()
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for (rule, deg) in [(triangle_degree2(), 2), (triangle_degree5(), 5)] {
            for p in 0..=deg {
                for q in 0..=(deg - p) {
                    let err = (apply(&rule, p, q) - monomial_exact(p, q)).abs();
                    assert!(err < 1e-15, "deg {deg} x^{p} y^{q}: {err}");
                }
            }
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..=5 {
            let rule = gauss_legendre(n);
            for k in 0..(2 * n) {
                let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
            }
        }
        let c: f64 = composite_gauss(0.0, 2.0, 7, 3).iter().map(|(x, w)| w * x * x).sum();
        assert!((c - 8.0 / 3.0).abs() < 1e-13);
    }
}
