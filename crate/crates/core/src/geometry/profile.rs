//! One-periodic bottom profiles `y₂ = f(y₁)` and their polygonal sampling.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lipschitz, one-periodic bottom profile `f(y₁) = offset + oscillation(y₁)`.
#[derive(Clone)]
pub struct RoughProfile {
    name: String,
    offset: f64,
    oscillation: ScalarFn,
    slope: ScalarFn,
    mirror: bool,
}

impl fmt::Debug for RoughProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoughProfile")
            .field("name", &self.name)
            .field("offset", &self.offset)
            .field("mirror", &self.mirror)
            .finish()
    }
}

/// Invariant checks reported by [`RoughProfile::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileReport {
    pub min: f64,
    pub max: f64,
    pub lipschitz: f64,
    pub periodic_gap: f64,
}

impl RoughProfile {
    /// `f(y₁) = −1 + ½ sin(2π y₁)`, the default rough bottom.
    pub fn sine() -> Self {
        Self::sine_with(-1.0, 0.5)
    }

    pub fn sine_with(offset: f64, amplitude: f64) -> Self {
        Self {
            name: format!("sine(offset={offset}, amplitude={amplitude})"),
            offset,
            oscillation: Arc::new(move |y| amplitude * (2.0 * PI * y).sin()),
            slope: Arc::new(move |y| 2.0 * PI * amplitude * (2.0 * PI * y).cos()),
            mirror: false,
        }
    }

    /// `f(y₁) = −1 + a cos(2π y₁)`; even about `y₁ = 0` and `y₁ = ½`.
    pub fn cosine(amplitude: f64) -> Self {
        Self {
            name: format!("cosine(amplitude={amplitude})"),
            offset: -1.0,
            oscillation: Arc::new(move |y| amplitude * (2.0 * PI * y).cos()),
            slope: Arc::new(move |y| -2.0 * PI * amplitude * (2.0 * PI * y).sin()),
            mirror: false,
        }
    }

    /// `f ≡ −1`.
    pub fn flat() -> Self {
        let mut p = Self::constant(-1.0);
        p.name = "flat".into();
        p
    }

    pub fn constant(level: f64) -> Self {
        Self {
            name: format!("const({level})"),
            offset: level,
            oscillation: Arc::new(|_| 0.0),
            slope: Arc::new(|_| 0.0),
            mirror: false,
        }
    }

    /// A user-supplied oscillation; the slope is taken by central differences.
    pub fn custom<F>(name: &str, offset: f64, oscillation: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let osc: ScalarFn = Arc::new(oscillation);
        let osc_fd = osc.clone();
        Self {
            name: name.to_string(),
            offset,
            oscillation: osc,
            slope: Arc::new(move |y| {
                let d = 1e-6;
                (osc_fd(y + d) - osc_fd(y - d)) / (2.0 * d)
            }),
            mirror: false,
        }
    }

    /// Parses `sine`, `flat`, `const:<c>` or `cosine:<a>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "sine" => return Ok(Self::sine()),
            "flat" => return Ok(Self::flat()),
            _ => {}
        }
        let bad = || Error::InvalidProfile(format!("unknown profile `{text}`"));
        let (head, arg) = text.split_once(':').ok_or_else(bad)?;
        let value: f64 = arg.parse().map_err(|_| bad())?;
        match head {
            "const" => Ok(Self::constant(value)),
            "cosine" => Ok(Self::cosine(value)),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The reflected profile `y₁ ↦ f(−y₁)`, used to mesh the outlet quarter-plane.
    pub fn mirrored(&self) -> Self {
        let mut p = self.clone();
        p.mirror = !p.mirror;
        p.name = format!("mirror({})", self.name);
        p
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirror
    }

    fn arg(&self, y: f64) -> f64 {
        let y = if self.mirror { -y } else { y };
        y.rem_euclid(1.0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.offset + (self.oscillation)(self.arg(y))
    }

    pub fn slope(&self, y: f64) -> f64 {
        let s = (self.slope)(self.arg(y));
        if self.mirror {
            -s
        } else {
            s
        }
    }


    pub fn is_flat(&self) -> bool {
        let samples = 64;
        (0..samples).all(|i| (self.eval(i as f64 / samples as f64) - self.offset).abs() < 1e-15)
    }

    /// Checks the profile assumptions: finite, non-positive, bounded, periodic, Lipschitz.
    ///
    /// `f ≡ 0` is accepted (the sub-layer degenerates) so that the zero-data cell
    /// problem can be posed.
    pub fn validate(&self) -> Result<ProfileReport> {
        let n = 1024;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut lipschitz: f64 = 0.0;
        let mut prev = self.eval(0.0);
        for i in 0..=n {
            let y = i as f64 / n as f64;
            let v = self.eval(y);
            if !v.is_finite() {
                return Err(Error::InvalidProfile(format!("{} is not finite at {y}", self.name)));
            }
            min = min.min(v);
            max = max.max(v);
            lipschitz = lipschitz.max(self.slope(y).abs());
            if i > 0 {
                lipschitz = lipschitz.max((v - prev).abs() * n as f64);
            }
            prev = v;
        }
        let periodic_gap = ((self.oscillation)(0.0) - (self.oscillation)(1.0 - f64::EPSILON)).abs();
        if max > 0.0 {
            return Err(Error::InvalidProfile(format!(
                "{} rises above the fictitious interface (max {max})",
                self.name
            )));
        }
        if min < -1e6 {
            return Err(Error::InvalidProfile(format!("{} is unbounded below", self.name)));
        }
        if periodic_gap > 1e-9 {
            return Err(Error::InvalidProfile(format!(
                "{} is not one-periodic (gap {periodic_gap:e})",
                self.name
            )));
        }
        if !lipschitz.is_finite() {
            return Err(Error::InvalidProfile(format!("{} is not Lipschitz", self.name)));
        }
        Ok(ProfileReport { min, max, lipschitz, periodic_gap })
    }
}

/// Polygonal sampling of one period of the bottom, `0 = s₀ < s₁ < … < s_{n−1} < 1`.
///
/// Every mesh of the bottom (cell, quarter-planes, macroscopic sub-layer) is
/// built from the same sampling, so all of them see the same polygonal boundary.
#[derive(Debug, Clone)]
pub struct BottomSampling {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    profile: RoughProfile,
}

impl BottomSampling {
    /// Nodes are equidistributed in the density
    /// `max(arc / max_arc, √(|f″| / (8·sagitta)))`, which keeps the arc length of
    /// each chord below `max_arc` and its vertical gap to the curve below `sagitta`.
    pub fn new(profile: &RoughProfile, max_arc: f64, sagitta: f64) -> Self {
        let fine = 4096;
        let density = |y: f64| {
            let s = profile.slope(y);
            let d = 1e-5;
            let second = (profile.slope(y + d) - profile.slope(y - d)) / (2.0 * d);
            ((1.0 + s * s).sqrt() / max_arc).max((second.abs() / (8.0 * sagitta)).sqrt())
        };
        let mut cumulative = vec![0.0; fine + 1];
        for i in 0..fine {
            let a = i as f64 / fine as f64;
            let b = (i + 1) as f64 / fine as f64;
            cumulative[i + 1] = cumulative[i] + 0.5 * (density(a) + density(b)) * (b - a);
        }
        let total = cumulative[fine];
        let count = (total.ceil() as usize).max(4);
        let mut nodes = Vec::with_capacity(count);
        let mut j = 0;
        for k in 0..count {
            let target = total * k as f64 / count as f64;
            while j < fine && cumulative[j + 1] < target {
                j += 1;
            }
            let span = cumulative[j + 1] - cumulative[j];
            let t = if span > 0.0 { (target - cumulative[j]) / span } else { 0.0 };
            nodes.push(((j as f64 + t) / fine as f64).min(1.0));
        }
        nodes[0] = 0.0;
        let values = nodes.iter().map(|&y| profile.eval(y)).collect();
        Self { nodes, values, profile: profile.clone() }
    }

    /// Sampling with a fixed number of equispaced nodes per period.
    pub fn uniform(profile: &RoughProfile, count: usize) -> Self {
        let nodes: Vec<f64> = (0..count).map(|k| k as f64 / count as f64).collect();
        let values = nodes.iter().map(|&y| profile.eval(y)).collect();
        Self { nodes, values, profile: profile.clone() }
    }

    pub fn profile(&self) -> &RoughProfile {
        &self.profile
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bottom polyline over `[start, end]`, both ends included. The value at
    /// integer abscissae is always `values[0]`, so the copies at both ends of a
    /// cell are bit-identical. Non-node end points are placed on the exact curve.
    pub fn polyline(&self, start: f64, end: f64) -> Vec<[f64; 2]> {
        let mut pts = Vec::new();
        let first = start.floor() as i64;
        let last = end.ceil() as i64;
        for period in first..=last {
            for (s, v) in self.nodes.iter().zip(&self.values) {
                let x = period as f64 + s;
                if x >= start - 1e-14 && x <= end + 1e-14 {
                    pts.push([x, *v]);
                }
            }
        }
        if pts.last().map_or(true, |p| (p[0] - end).abs() > 1e-14) {
            pts.push([end, self.profile.eval(end)]);
        }
        if (pts[0][0] - start).abs() > 1e-14 {
            pts.insert(0, [start, self.profile.eval(start)]);
        }
        pts
    }

    /// Value of the polygonal profile (not the exact curve) at `y`.
    pub fn value_at(&self, y: f64) -> f64 {
        let frac = y.rem_euclid(1.0);
        let n = self.nodes.len();
        let idx = match self.nodes.binary_search_by(|s| s.partial_cmp(&frac).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (s0, v0) = (self.nodes[idx], self.values[idx]);
        let (s1, v1) = if idx + 1 < n {
            (self.nodes[idx + 1], self.values[idx + 1])
        } else {
            (1.0, self.values[0])
        };
        v0 + (v1 - v0) * (frac - s0) / (s1 - s0)
    }
}
