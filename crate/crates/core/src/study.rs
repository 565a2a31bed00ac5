//! ε-sweeps of the four approximation errors and their fitted rates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::approx::{Approximant, ApproximationSet, Evaluator, MicroAtlas, MicroFields};
use crate::cell::solve_beta;
use crate::corrector::solve_corrector_from_cell;
use crate::error::{Error, Result};
use crate::fem::element::Element;
use crate::fem::quadrature::triangle_degree5;
use crate::fit::{power_law, LineFit};
use crate::geometry::{Point, RoughProfile, Side};
use crate::rough::{schwarz_solve, CompositeSolution, Provenance, RoughConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorNorm {
    L2,
    H1,
}

impl ErrorNorm {
    pub const ALL: [ErrorNorm; 2] = [ErrorNorm::L2, ErrorNorm::H1];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorNorm::L2 => "L2",
            ErrorNorm::H1 => "H1",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "L2" => Ok(ErrorNorm::L2),
            "H1" => Ok(ErrorNorm::H1),
            other => Err(Error::Parse(format!("unknown norm `{other}` (expected L2|H1)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    pub k: f64,
    pub cell_l: f64,
    pub xi_l: f64,
    /// Mesh size of the cell and corrector problems.
    pub micro_h: f64,
    pub ubar: f64,
    pub norms: Vec<ErrorNorm>,
    pub profile: RoughProfile,
    /// Schwarz settings other than ε, γ, k and Ū.
    pub rough: RoughConfig,
    /// Each macro triangle is split into `4^quad_refine` pieces for the error quadrature.
    pub quad_refine: u32,
    pub output_dir: Option<std::path::PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            epsilons: [2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0].iter().map(|n| 1.0 / n).collect(),
            gamma: 1.25,
            k: 0.5,
            cell_l: 10.0,
            xi_l: 20.0,
            micro_h: 1.0 / 16.0,
            ubar: 1.0,
            norms: ErrorNorm::ALL.to_vec(),
            profile: RoughProfile::sine(),
            rough: RoughConfig::new(0.5),
            quad_refine: 2,
            output_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut distinct = self.epsilons.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "rate fitting needs at least 3 distinct epsilons, got {}",
                distinct.len()
            )));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::InvalidInput(format!("epsilon {e} outside (0, 1]")));
        }
        if self.norms.is_empty() {
            return Err(Error::InvalidInput("no norms requested".into()));
        }
        if !(self.ubar.is_finite()) {
            return Err(Error::InvalidInput("ubar must be finite".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` listing; hashed into the study log.
    pub fn canonical(&self) -> String {
        let eps: Vec<String> = self.epsilons.iter().map(|e| format!("{e:?}")).collect();
        let norms: Vec<&str> = self.norms.iter().map(|n| n.as_str()).collect();
        let r = &self.rough;
        format!(
            "epsilons = {}\ngamma = {:?}\nk = {:?}\ncell_l = {:?}\nxi_l = {:?}\nmicro_h = {:?}\nubar = {:?}\n\
             norms = {}\nprofile = {}\norder = {}\ntol = {:?}\nmax_iter = {}\nmax_adapt = {}\ncorner_c = {:?}\n\
             corner_exponent = {:?}\ngrading_ratio = {:?}\nbg_divisor = {:?}\ninitial = {:?}\nquad_refine = {}\n",
            eps.join(","),
            self.gamma,
            self.k,
            self.cell_l,
            self.xi_l,
            self.micro_h,
            self.ubar,
            norms.join(","),
            self.profile.name(),
            r.order,
            r.tol,
            r.max_iter,
            r.max_adapt,
            r.corner_c,
            r.corner_exponent,
            r.grading_ratio,
            r.bg_divisor,
            r.initial,
            self.quad_refine
        )
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn rough_for(&self, epsilon: f64) -> RoughConfig {
        RoughConfig { epsilon, gamma: self.gamma, k: self.k, ubar: self.ubar, ..self.rough.clone() }
    }
}

/// Numbers of micro solves performed.
#[derive(Debug, Default)]
pub struct SolveCounters {
    pub cell: AtomicUsize,
    pub xi_in: AtomicUsize,
    pub xi_out: AtomicUsize,
}

impl SolveCounters {
    pub fn snapshot(&self) -> (usize, usize, usize) {
        (self.cell.load(Ordering::SeqCst), self.xi_in.load(Ordering::SeqCst), self.xi_out.load(Ordering::SeqCst))
    }
}

pub fn solve_micro(cfg: &StudyConfig, counters: &SolveCounters) -> Result<MicroFields> {
    let cell = solve_beta(&cfg.profile, cfg.cell_l, cfg.micro_h)?;
    counters.cell.fetch_add(1, Ordering::SeqCst);
    let xi_in = solve_corrector_from_cell(&cell, Side::In, cfg.xi_l, cfg.micro_h)?;
    counters.xi_in.fetch_add(1, Ordering::SeqCst);
    let xi_out = solve_corrector_from_cell(&cell, Side::Out, cfg.xi_l, cfg.micro_h)?;
    counters.xi_out.fetch_add(1, Ordering::SeqCst);
    Ok(MicroFields { cell: Arc::new(cell), xi_in: xi_in.xi, xi_out: xi_out.xi })
}

#[derive(Debug, Clone)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub errors: BTreeMap<(Approximant, ErrorNorm), f64>,
    pub provenance: Provenance,
    pub seconds: f64,
}

impl EpsilonRecord {
    pub fn error(&self, a: Approximant, n: ErrorNorm) -> Option<f64> {
        self.errors.get(&(a, n)).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRecord {
    pub approximant: Approximant,
    pub norm: ErrorNorm,
    pub fit: LineFit,
}

#[derive(Debug, Clone, Default)]
pub struct StudyRecord {
    pub entries: Vec<EpsilonRecord>,
    pub failures: Vec<(f64, String)>,
    pub rates: Vec<RateRecord>,
    pub config_hash: String,
    pub config_text: String,
    pub beta_bar: f64,
    pub micro_counts: (usize, usize, usize),
    pub micro_seconds: f64,
    pub seconds: f64,
}

impl StudyRecord {
    pub fn rate(&self, a: Approximant, n: ErrorNorm) -> Option<f64> {
        self.rates.iter().find(|r| r.approximant == a && r.norm == n).map(|r| r.fit.slope)
    }

    pub fn series(&self, a: Approximant, n: ErrorNorm) -> (Vec<f64>, Vec<f64>) {
        self.entries.iter().filter_map(|e| e.error(a, n).map(|v| (e.epsilon, v))).unzip()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Least-squares slope of `log error` against `log ε`.
pub fn fit_rate(epsilons: &[f64], errors: &[f64]) -> Option<LineFit> {
    power_law(epsilons, errors)
}

fn split4(t: [Point; 3]) -> [[Point; 3]; 4] {
    let m = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (a, b, c) = (t[0], t[1], t[2]);
    let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

/// Errors of all approximants against `u^ε_h` on `Ω⁰`, by the degree-5 rule on
/// the structured top grid (each triangle split `quad_refine` times).
pub fn error_norms(
    sol: &CompositeSolution,
    set: &ApproximationSet,
    quad_refine: u32,
) -> Result<BTreeMap<(Approximant, ErrorNorm), f64>> {
    let mesh = sol.top_mesh();
    let rule = triangle_degree5();
    let mut l2 = [0.0f64; 4];
    let mut semi = [0.0f64; 4];
    for t in 0..mesh.num_triangles() {
        let mut pieces = vec![mesh.triangle_points(t)];
        for _ in 0..quad_refine {
            pieces = pieces.into_iter().flat_map(split4).collect();
        }
        for tri in pieces {
            let el = Element::new(tri);
            for &(l, w) in &rule {
                let x = el.point(l);
                let wa = w * el.area;
                let (u, du) = sol.jet(x)?;
                for (i, a) in Approximant::ALL.into_iter().enumerate() {
                    let (v, dv) = set.get(a).jet(x)?;
                    l2[i] += wa * (u - v).powi(2);
                    semi[i] += wa * ((du[0] - dv[0]).powi(2) + (du[1] - dv[1]).powi(2));
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for (i, a) in Approximant::ALL.into_iter().enumerate() {
        out.insert((a, ErrorNorm::L2), l2[i].sqrt());
        out.insert((a, ErrorNorm::H1), (l2[i] + semi[i]).sqrt());
    }
    Ok(out)
}

fn run_epsilon(cfg: &StudyConfig, micro: &MicroFields, epsilon: f64) -> Result<EpsilonRecord> {
    let start = Instant::now();
    let rough = cfg.rough_for(epsilon);
    let sol = schwarz_solve(&cfg.profile, &rough)?;
    let atlas = MicroAtlas::new(micro.clone(), epsilon)?;
    let set = ApproximationSet::build(cfg.ubar, &atlas, rough.h_top())?;
    let mut errors = error_norms(&sol, &set, cfg.quad_refine)?;
    errors.retain(|(_, n), _| cfg.norms.contains(n));
    Ok(EpsilonRecord { epsilon, errors, provenance: sol.provenance, seconds: start.elapsed().as_secs_f64() })
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyRecord> {
    let counters = SolveCounters::default();
    run_study_counted(cfg, &counters)
}

pub fn run_study_counted(cfg: &StudyConfig, counters: &SolveCounters) -> Result<StudyRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let micro = solve_micro(cfg, counters)?;
    let micro_seconds = start.elapsed().as_secs_f64();
    log::info!("micro solves done in {micro_seconds:.2}s, beta_bar = {:.12}", micro.cell.beta_bar);
    let results: Vec<(f64, Result<EpsilonRecord>)> =
        cfg.epsilons.par_iter().map(|&e| (e, run_epsilon(cfg, &micro, e))).collect();
    let mut record = StudyRecord {
        config_hash: cfg.hash(),
        config_text: cfg.canonical(),
        beta_bar: micro.cell.beta_bar,
        micro_seconds,
        ..Default::default()
    };
    for (e, r) in results {
        match r {
            Ok(entry) => record.entries.push(entry),
            Err(err) => {
                log::error!("epsilon {e}: {err}");
                record.failures.push((e, err.to_string()));
            }
        }
    }
    record.entries.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap_or(std::cmp::Ordering::Equal));
    for a in Approximant::ALL {
        for &n in &cfg.norms {
            let (x, y) = record.series(a, n);
            if x.len() >= 3 {
                if let Some(fit) = fit_rate(&x, &y) {
                    record.rates.push(RateRecord { approximant: a, norm: n, fit });
                }
            }
        }
    }
    record.micro_counts = counters.snapshot();
    record.seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Reference rates (L², H¹) for u⁰, u¹, the periodic and the full boundary layer.
pub fn reference_rate(a: Approximant, n: ErrorNorm) -> f64 {
    match (a, n) {
        (Approximant::U0, ErrorNorm::L2) => 0.78783,
        (Approximant::U1, ErrorNorm::L2) => 1.11,
        (Approximant::PeriodicBl, ErrorNorm::L2) => 1.1,
        (Approximant::FullBl, ErrorNorm::L2) => 1.462,
        (Approximant::U0, ErrorNorm::H1) => 0.787,
        (Approximant::U1, ErrorNorm::H1) => 0.6869,
        (Approximant::PeriodicBl, ErrorNorm::H1) => 0.70,
        (Approximant::FullBl, ErrorNorm::H1) => 1.346347,
    }
}

pub const RATE_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct RateComparison {
    pub approximant: Approximant,
    pub norm: ErrorNorm,
    pub slope: f64,
    pub residual: f64,
    pub reference: f64,
    pub delta: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceReport {
    pub rows: Vec<RateComparison>,
    /// Full-BL rate strictly greatest, per norm present.
    pub full_bl_greatest: Vec<(ErrorNorm, bool)>,
    pub periodic_h1_below_one: Option<bool>,
    /// The wall-law upper bound exponent `3/2`.
    pub wall_law_theory: f64,
    /// `min(3/2 + α, 2 − 1/(2M))` for the full boundary layer.
    pub full_bl_theory: f64,
}

impl ReferenceReport {
    pub fn all_pass(&self) -> bool {
        !self.rows.is_empty()
            && self.rows.iter().all(|r| r.pass)
            && self.full_bl_greatest.iter().all(|(_, ok)| *ok)
            && self.periodic_h1_below_one.unwrap_or(true)
    }
}

pub fn compare_reference(record: &StudyRecord) -> ReferenceReport {
    compare_rates(&record.rates)
}

pub fn compare_rates(rates: &[RateRecord]) -> ReferenceReport {
    let params = crate::corrector::DecayParams::default();
    let mut rows = Vec::new();
    for r in rates {
        let reference = reference_rate(r.approximant, r.norm);
        let delta = r.fit.slope - reference;
        let note = match (r.approximant, r.norm) {
            (Approximant::U1, ErrorNorm::H1) => {
                Some("the wall law converges poorly in H1; its reference rate is itself below first order".into())
            }
            (Approximant::U1, ErrorNorm::L2) => Some("theory bound k eps^{3/2}".into()),
            (Approximant::FullBl, _) => {
                Some(format!("theory floor min(3/2+alpha, 2-1/(2M)) = {:.3}", full_bl_theory(&params)))
            }
            _ => None,
        };
        rows.push(RateComparison {
            approximant: r.approximant,
            norm: r.norm,
            slope: r.fit.slope,
            residual: r.fit.residual,
            reference,
            delta,
            pass: delta.abs() <= RATE_TOLERANCE,
            note,
        });
    }
    let mut full_bl_greatest = Vec::new();
    for n in ErrorNorm::ALL {
        let of = |a| rates.iter().find(|r| r.approximant == a && r.norm == n).map(|r| r.fit.slope);
        if let Some(full) = of(Approximant::FullBl) {
            let others = [Approximant::U0, Approximant::U1, Approximant::PeriodicBl];
            full_bl_greatest.push((n, others.iter().filter_map(|&a| of(a)).all(|s| full > s)));
        }
    }
    let periodic_h1_below_one = rates
        .iter()
        .find(|r| r.approximant == Approximant::PeriodicBl && r.norm == ErrorNorm::H1)
        .map(|r| r.fit.slope < 1.0);
    ReferenceReport {
        rows,
        full_bl_greatest,
        periodic_h1_below_one,
        wall_law_theory: 1.5,
        full_bl_theory: full_bl_theory(&params),
    }
}

pub fn full_bl_theory(p: &crate::corrector::DecayParams) -> f64 {
    (1.5 + p.alpha).min(2.0 - 1.0 / (2.0 * p.m))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_errors_csv<W: std::io::Write>(record: &StudyRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "approximant", "norm", "error"]).map_err(csv_err)?;
    for e in &record.entries {
        for ((a, n), v) in &e.errors {
            w.write_record([format!("{:.17e}", e.epsilon), a.as_str().into(), n.as_str().into(), format!("{v:.17e}")])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `(epsilon, approximant, norm, error)` of an `errors.csv`.
pub fn read_errors_csv<R: std::io::Read>(input: R) -> Result<Vec<(f64, Approximant, ErrorNorm, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        if row.len() != 4 {
            return Err(Error::Parse(format!("expected 4 columns, got {}", row.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        out.push((num(&row[0])?, Approximant::parse(&row[1])?, ErrorNorm::parse(&row[2])?, num(&row[3])?));
    }
    Ok(out)
}

pub fn write_rates_csv<W: std::io::Write>(report: &ReferenceReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["approximant", "norm", "slope", "residual", "reference", "delta", "pass"]).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.approximant.as_str().to_string(),
            r.norm.as_str().to_string(),
            format!("{:.6}", r.slope),
            format!("{:.3e}", r.residual),
            format!("{}", r.reference),
            format!("{:+.6}", r.delta),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn study_log(record: &StudyRecord, report: &ReferenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_hash = {}", record.config_hash);
    s.push_str(&record.config_text);
    let _ = writeln!(s, "beta_bar = {:.12}", record.beta_bar);
    let _ = writeln!(
        s,
        "micro_solves = cell {} xi_in {} xi_out {} ({:.2}s)",
        record.micro_counts.0, record.micro_counts.1, record.micro_counts.2, record.micro_seconds
    );
    for e in &record.entries {
        let p = &e.provenance;
        let _ = writeln!(
            s,
            "eps {:.6}: H {:.4e} top_cells {} sub h_min {:.4e} h_max {:.4e} corner h_min {:.4e} target {:.4e} \
             iterations {} mismatch {:.3e} adapt_rounds {} dofs {}+{} time {:.2}s",
            e.epsilon,
            p.h_law,
            p.top_cells,
            p.sub_stats.h_min,
            p.sub_stats.h_max,
            p.corner_h_min,
            p.target_h_min,
            p.iterations,
            p.mismatch,
            p.adapt_rounds,
            p.top_dofs,
            p.sub_dofs,
            e.seconds
        );
    }
    for (e, msg) in &record.failures {
        let _ = writeln!(s, "eps {e:.6}: FAILED {msg}");
    }
    for r in &report.rows {
        let _ = writeln!(
            s,
            "rate {} {}: {:.4} (ref {}, delta {:+.4}, residual {:.2e}) {}{}",
            r.approximant.as_str(),
            r.norm.as_str(),
            r.slope,
            r.reference,
            r.delta,
            r.residual,
            if r.pass { "pass" } else { "FAIL" },
            r.note.as_ref().map(|n| format!(" [{n}]")).unwrap_or_default()
        );
    }
    for (n, ok) in &report.full_bl_greatest {
        let _ = writeln!(s, "full BL rate greatest in {}: {ok}", n.as_str());
    }
    if let Some(ok) = report.periodic_h1_below_one {
        let _ = writeln!(s, "periodic BL H1 rate below 1: {ok}");
    }
    let _ = writeln!(s, "total time {:.2}s", record.seconds);
    s
}

/// Writes `errors.csv`, `rates.csv` and `study.log` into `dir`.
pub fn emit_outputs(record: &StudyRecord, dir: &Path) -> Result<ReferenceReport> {
    std::fs::create_dir_all(dir)?;
    let report = compare_reference(record);
    write_errors_csv(record, std::fs::File::create(dir.join("errors.csv"))?)?;
    write_rates_csv(&report, std::fs::File::create(dir.join("rates.csv"))?)?;
    std::fs::write(dir.join("study.log"), study_log(record, &report))?;
    Ok(report)
}
