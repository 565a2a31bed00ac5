//! Least-squares line fits.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the points from the line.
    pub residual: f64,
}

/// Ordinary least squares through `(x_i, y_i)`; needs at least two distinct `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    LineFit { slope, intercept, residual: (ss / n).sqrt() }
}

/// Fit of `log y` against `log x`; points with `y <= 0` are dropped with a warning.
pub fn power_law(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if b > 0.0 && a > 0.0 && b.is_finite() {
            lx.push(a.ln());
            ly.push(b.ln());
        } else {
            log::warn!("dropping non-positive point ({a}, {b}) from the power-law fit");
        }
    }
    if lx.len() < 2 {
        return None;
    }
    Some(least_squares(&lx, &ly))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let eps = [0.5, 0.25, 0.2, 0.1];
        let err: Vec<f64> = eps.iter().map(|e: &f64| 2.0 * e.powf(1.5)).collect();
        let f = power_law(&eps, &err).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!(f.residual <= 1e-12);
        assert!((f.intercept - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn drops_nonpositive() {
        let f = power_law(&[0.5, 0.25, 0.1, 0.05], &[0.5, 0.25, 0.0, 0.05]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
    }
}
