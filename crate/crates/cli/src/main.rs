use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use roughlayer::approx::{Approximant, ApproximationSet, MicroAtlas, MicroFields};
use roughlayer::cell::{self, solve_beta, CellSolution};
use roughlayer::corrector::{self, solve_corrector_from_cell, truncation_audit, DecayParams};
use roughlayer::fem::{FeSpace, Field};
use roughlayer::geometry::{Mesh, RoughProfile, Side};
use roughlayer::rough::{schwarz_solve, RoughConfig};
use roughlayer::study::{emit_outputs, run_study, ErrorNorm, StudyConfig};

#[derive(Parser, Debug)]
#[command(name = "roughlayer", version, about = "Wall laws and boundary layers over a rough bottom")]
struct Cli {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the truncated periodic cell problem for β.
    CellSolve(CellArgs),
    /// Solve a quarter-plane corrector ξ_in or ξ_out.
    CorrectorSolve(CorrectorArgs),
    /// Sample one macroscopic approximation on a grid.
    ApproxBuild(ApproxArgs),
    /// Solve the rough problem by overlapping Schwarz.
    RoughSolve(RoughArgs),
    /// Sweep ε and fit convergence rates.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct CellArgs {
    #[arg(long = "L", value_parser = fraction)]
    l: Option<f64>,
    #[arg(long, value_parser = fraction)]
    h: Option<f64>,
    /// sine | flat | const:<c> | cosine:<a>
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorrectorArgs {
    /// in | out
    #[arg(long)]
    side: Option<String>,
    #[arg(long = "L", value_parser = fraction)]
    l: Option<f64>,
    #[arg(long, value_parser = fraction)]
    h: Option<f64>,
    /// Prefix of a `cell-solve` output; solved afresh when absent.
    #[arg(long)]
    beta: Option<PathBuf>,
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated truncations for the truncation audit.
    #[arg(long)]
    truncations: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long, value_parser = fraction)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<PathBuf>,
    #[arg(long = "xi-in")]
    xi_in: Option<PathBuf>,
    #[arg(long = "xi-out")]
    xi_out: Option<PathBuf>,
    /// u0 | u1 | blp | bl
    #[arg(long)]
    which: Option<String>,
    #[arg(long = "sample-grid")]
    sample_grid: Option<usize>,
    #[arg(long, value_parser = fraction)]
    ubar: Option<f64>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RoughArgs {
    #[arg(long, value_parser = fraction)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = fraction)]
    gamma: Option<f64>,
    #[arg(long, value_parser = fraction)]
    k: Option<f64>,
    #[arg(long, value_parser = fraction)]
    tol: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_parser = fraction)]
    ubar: Option<f64>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Comma-separated list; `1/n` entries are accepted.
    #[arg(long)]
    epsilons: Option<String>,
    #[arg(long, value_parser = fraction)]
    gamma: Option<f64>,
    #[arg(long, value_parser = fraction)]
    k: Option<f64>,
    #[arg(long = "cell-L", value_parser = fraction)]
    cell_l: Option<f64>,
    #[arg(long = "xi-L", value_parser = fraction)]
    xi_l: Option<f64>,
    #[arg(long = "micro-h", value_parser = fraction)]
    micro_h: Option<f64>,
    #[arg(long, value_parser = fraction)]
    ubar: Option<f64>,
    /// Comma-separated subset of L2,H1.
    #[arg(long)]
    norms: Option<String>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, value_parser = fraction)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Values read from a `key = value` file. `#` starts a comment.
#[derive(Debug, Default)]
struct FileConfig {
    values: BTreeMap<String, String>,
    path: String,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`, got `{raw}`", path.display(), n + 1);
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values, path: path.display().to_string() })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("{}: key `{key}` = `{v}`: {e}", self.path)),
        }
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    /// Like `pick`, for numbers that may be written as `a/b`.
    fn num(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => parse_number(v).with_context(|| format!("{}: key `{key}` = `{v}`", self.path)),
        }
    }

    fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }
}

fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        return Ok(a / b);
    }
    Ok(t.parse()?)
}

fn fraction(text: &str) -> std::result::Result<f64, String> {
    parse_number(text).map_err(|e| e.to_string())
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_number).collect()
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn save_field(prefix: &Path, field: &Field) -> Result<()> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    field.space().mesh().write(BufWriter::new(File::create(with_ext(prefix, "mesh"))?))?;
    field.write(BufWriter::new(File::create(with_ext(prefix, "field"))?))?;
    Ok(())
}

fn load_field(prefix: &Path, order: usize) -> Result<Field> {
    let mesh_path = with_ext(prefix, "mesh");
    let mesh = Mesh::read(BufReader::new(File::open(&mesh_path).with_context(|| mesh_path.display().to_string())?))?;
    let space = FeSpace::new(Arc::new(mesh), order)?;
    let field_path = with_ext(prefix, "field");
    let file = File::open(&field_path).with_context(|| field_path.display().to_string())?;
    Ok(Field::read(BufReader::new(file), space)?)
}

/// Key lines of a summary text file.
fn read_summary(prefix: &Path) -> Result<BTreeMap<String, String>> {
    let path = with_ext(prefix, "summary");
    let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect())
}

fn load_cell(prefix: &Path) -> Result<CellSolution> {
    let summary = read_summary(prefix)?;
    let get = |k: &str| summary.get(k).with_context(|| format!("summary lacks `{k}`"));
    let profile = RoughProfile::parse(get("profile_spec")?)?;
    let l: f64 = get("L")?.parse()?;
    let h: f64 = get("h")?.parse()?;
    Ok(CellSolution::from_field(load_field(prefix, 2)?, &profile, l, h)?)
}

fn report(lines: &mut String, name: &str, ok: bool, detail: String) -> bool {
    let _ = writeln!(lines, "audit {name}: {} ({detail})", if ok { "pass" } else { "FAIL" });
    ok
}

fn cell_solve(args: CellArgs, cfg: &FileConfig) -> Result<bool> {
    let l = cfg.num(args.l, "L", 10.0)?;
    let h = cfg.num(args.h, "h", 1.0 / 16.0)?;
    let spec = cfg.pick(args.profile, "profile", "sine".to_string())?;
    let out = cfg.pick(args.out, "out", PathBuf::from("cell"))?;
    let profile = RoughProfile::parse(&spec)?;
    let sol = solve_beta(&profile, l, h)?;
    save_field(&out, &sol.beta)?;
    let decay = cell::decay_audit(&sol)?;
    let mut s = String::new();
    let _ = writeln!(s, "profile_spec = {spec}");
    let _ = writeln!(s, "profile = {}", profile.name());
    let _ = writeln!(s, "L = {l:?}");
    let _ = writeln!(s, "h = {h:?}");
    let _ = writeln!(s, "dofs = {}", sol.beta.coefficients.len());
    let _ = writeln!(s, "beta_bar = {:.15}", sol.beta_bar);
    for k in 0..=sol.k_max() as i64 {
        let c = sol.coefficient(k);
        let _ = writeln!(s, "fourier k={k}: {:+.6e} {:+.6e}i", c.re, c.im);
    }
    for (y, d) in decay.heights.iter().zip(&decay.deviations) {
        let _ = writeln!(s, "deviation y2={y}: {d:.6e}");
    }
    let ok = report(
        &mut s,
        "cell-decay",
        decay.passed,
        match decay.rate {
            Some(r) => format!("rate {r:.4}, target 2pi"),
            None => "trivially decayed".into(),
        },
    );
    std::fs::write(with_ext(&out, "summary"), &s)?;
    print!("{s}");
    Ok(ok)
}

fn corrector_solve(args: CorrectorArgs, cfg: &FileConfig) -> Result<bool> {
    let side = Side::parse(&cfg.pick(args.side, "side", "in".to_string())?)?;
    let l = cfg.num(args.l, "L", 20.0)?;
    let h = cfg.num(args.h, "h", 1.0 / 16.0)?;
    let out = cfg.pick(args.out, "out", PathBuf::from(format!("xi_{}", side.as_str())))?;
    let truncations = parse_list(&cfg.pick(args.truncations, "truncations", "5,10,20".to_string())?)?;
    let cell = match cfg.pick_opt(args.beta, "beta")? {
        Some(prefix) => load_cell(&prefix)?,
        None => {
            let spec = cfg.pick(args.profile, "profile", "sine".to_string())?;
            solve_beta(&RoughProfile::parse(&spec)?, 10.0, h)?
        }
    };
    let sol = solve_corrector_from_cell(&cell, side, l, h)?;
    save_field(&out, &sol.xi)?;
    let mut s = String::new();
    let _ = writeln!(s, "side = {}", side.as_str());
    let _ = writeln!(s, "L = {l:?}");
    let _ = writeln!(s, "h = {h:?}");
    let _ = writeln!(s, "dofs = {}", sol.xi.coefficients.len());
    let _ = writeln!(s, "energy = {:.12e}", sol.energy);
    let _ = writeln!(s, "boundary_work = {:.12e}", sol.boundary_work);
    let _ = writeln!(s, "flux_mismatch = {:.4e} (far from corner {:.4e})", sol.flux_mismatch, sol.flux_mismatch_far);
    let mut ok = report(&mut s, "energy-identity", sol.energy_defect() <= 1e-6, format!("defect {:.3e}", sol.energy_defect()));
    let params = DecayParams::default();
    if l >= 8.0 {
        let decay = corrector::decay_audit(&sol, &params)?;
        for ray in &decay.rays {
            let _ = writeln!(s, "ray {}: power {:?} values {:?}", ray.name, ray.power, ray.values);
        }
        ok &= report(
            &mut s,
            "decay",
            decay.passed,
            format!("min power {:?}, threshold {:.3}", decay.min_power(), decay.threshold),
        );
    }
    if truncations.len() >= 3 {
        let sols = truncations
            .iter()
            .map(|&lt| solve_corrector_from_cell(&cell, side, lt, h))
            .collect::<roughlayer::Result<Vec<_>>>()?;
        let tr = truncation_audit(&sols)?;
        let _ = writeln!(s, "truncation differences {:?} at {:?}", tr.differences, tr.lengths);
        ok &= report(
            &mut s,
            "truncation",
            tr.passed,
            format!("power {:?}, decreasing {}", tr.power, tr.decreasing),
        );
    }
    std::fs::write(with_ext(&out, "summary"), &s)?;
    print!("{s}");
    Ok(ok)
}

fn approx_build(args: ApproxArgs, cfg: &FileConfig) -> Result<bool> {
    let epsilon = cfg.num(args.epsilon, "epsilon", 0.1)?;
    let which = Approximant::parse(&cfg.pick(args.which, "which", "bl".to_string())?)?;
    let n = cfg.pick(args.sample_grid, "sample-grid", 21)?;
    let ubar = cfg.num(args.ubar, "ubar", 1.0)?;
    let out = cfg.pick(args.out, "out", PathBuf::from(format!("approx_{}.csv", which.as_str())))?;
    if n < 2 {
        bail!("sample-grid must be at least 2");
    }
    let h = 1.0 / 16.0;
    let cell = match cfg.pick_opt(args.beta, "beta")? {
        Some(prefix) => load_cell(&prefix)?,
        None => {
            let spec = cfg.pick(args.profile, "profile", "sine".to_string())?;
            solve_beta(&RoughProfile::parse(&spec)?, 10.0, h)?
        }
    };
    let xi = |flag: Option<PathBuf>, key: &str, side: Side| -> Result<Field> {
        match cfg.pick_opt(flag, key)? {
            Some(prefix) => load_field(&prefix, 2),
            None => Ok(solve_corrector_from_cell(&cell, side, 20.0, h)?.xi),
        }
    };
    let need_xi = which == Approximant::FullBl;
    let (xi_in, xi_out) = if need_xi {
        (xi(args.xi_in, "xi-in", Side::In)?, xi(args.xi_out, "xi-out", Side::Out)?)
    } else {
        let zero = |f: &Field| Field::zeros(f.space().clone());
        (zero(&cell.beta), zero(&cell.beta))
    };
    let atlas = MicroAtlas::new(MicroFields { cell: Arc::new(cell), xi_in, xi_out }, epsilon)?;
    let set = ApproximationSet::build(ubar, &atlas, RoughConfig::new(epsilon).h_top())?;
    let eval = set.get(which);
    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(w, "x1,x2,value,dx1,dx2")?;
    let mut finite = true;
    for j in 0..n {
        for i in 0..n {
            let x = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
            let (v, g) = eval.jet(x)?;
            finite &= v.is_finite() && g.iter().all(|c| c.is_finite());
            writeln!(w, "{:.6},{:.6},{v:.12e},{:.12e},{:.12e}", x[0], x[1], g[0], g[1])?;
        }
    }
    w.flush()?;
    let mut s = String::new();
    let _ = writeln!(s, "approximant {} at epsilon {epsilon}: {n}x{n} samples in {}", which.as_str(), out.display());
    let ok = report(&mut s, "finite-samples", finite, format!("{} points", n * n));
    print!("{s}");
    Ok(ok)
}

fn rough_solve(args: RoughArgs, cfg: &FileConfig) -> Result<bool> {
    let epsilon = cfg.num(args.epsilon, "epsilon", 0.1)?;
    let mut rc = RoughConfig::new(epsilon);
    rc.gamma = cfg.num(args.gamma, "gamma", rc.gamma)?;
    rc.k = cfg.num(args.k, "k", rc.k)?;
    rc.tol = cfg.num(args.tol, "tol", rc.tol)?;
    rc.order = cfg.pick(args.order, "order", rc.order)?;
    rc.ubar = cfg.num(args.ubar, "ubar", rc.ubar)?;
    let profile = RoughProfile::parse(&cfg.pick(args.profile, "profile", "sine".to_string())?)?;
    let out = cfg.pick(args.out, "out", PathBuf::from("rough"))?;
    let sol = schwarz_solve(&profile, &rc)?;
    save_field(&with_ext(&out, "top"), &sol.state.top)?;
    save_field(&with_ext(&out, "sub"), &sol.state.sub)?;
    let p = &sol.provenance;
    let mut s = String::new();
    let _ = writeln!(s, "epsilon = {epsilon:?}");
    let _ = writeln!(s, "profile = {}", profile.name());
    let _ = writeln!(s, "gamma = {:?}\nk = {:?}\nH = {:.6e}\ntol = {:e}", rc.gamma, rc.k, p.h_law, rc.tol);
    let _ = writeln!(s, "iterations = {}\nadapt_rounds = {}", p.iterations, p.adapt_rounds);
    let _ = writeln!(s, "top_cells = {}\ntop_dofs = {}\nsub_dofs = {}", p.top_cells, p.top_dofs, p.sub_dofs);
    let _ = writeln!(s, "sub_h_min = {:.6e}\nsub_h_max = {:.6e}", p.sub_stats.h_min, p.sub_stats.h_max);
    let _ = writeln!(s, "corner_h_min = {:.6e}\ncorner_target = {:.6e}", p.corner_h_min, p.target_h_min);
    let _ = writeln!(s, "min_quality = {:.4}", p.sub_stats.min_quality);
    let hist: Vec<String> = sol.state.history.iter().map(|m| format!("{m:.6e}")).collect();
    let _ = writeln!(s, "mismatch_history = {}", hist.join(","));
    let mut ok = report(&mut s, "mismatch", p.mismatch < rc.tol, format!("{:.3e} < {:e}", p.mismatch, rc.tol));
    ok &= report(&mut s, "contraction", sol.contraction_ok(), "nonincreasing from iteration 2".into());
    ok &= report(&mut s, "mesh-law", p.sub_stats.h_max < p.h_law, format!("h_max {:.4e} < H {:.4e}", p.sub_stats.h_max, p.h_law));
    let mp = sol.max_principle_violation();
    let _ = writeln!(s, "max_principle_violation = {mp:.3e}");
    std::fs::write(with_ext(&out, "provenance"), &s)?;
    print!("{s}");
    Ok(ok)
}

fn study(args: StudyArgs, cfg: &FileConfig) -> Result<bool> {
    let mut sc = StudyConfig::default();
    if let Some(list) = cfg.pick_opt(args.epsilons, "epsilons")? {
        sc.epsilons = parse_list(&list)?;
    }
    sc.gamma = cfg.num(args.gamma, "gamma", sc.gamma)?;
    sc.k = cfg.num(args.k, "k", sc.k)?;
    sc.cell_l = cfg.num(args.cell_l, "cell-L", sc.cell_l)?;
    sc.xi_l = cfg.num(args.xi_l, "xi-L", sc.xi_l)?;
    sc.micro_h = cfg.num(args.micro_h, "micro-h", sc.micro_h)?;
    sc.ubar = cfg.num(args.ubar, "ubar", sc.ubar)?;
    sc.rough.tol = cfg.num(args.tol, "tol", sc.rough.tol)?;
    if let Some(norms) = cfg.pick_opt(args.norms, "norms")? {
        sc.norms = norms.split(',').map(ErrorNorm::parse).collect::<roughlayer::Result<_>>()?;
    }
    sc.profile = RoughProfile::parse(&cfg.pick(args.profile, "profile", "sine".to_string())?)?;
    let out = cfg.pick(args.out, "out", PathBuf::from("study_out"))?;
    sc.output_dir = Some(out.clone());
    let record = run_study(&sc)?;
    let rep = emit_outputs(&record, &out)?;
    let mut s = String::new();
    for e in &record.entries {
        let _ = write!(s, "eps {:.5}", e.epsilon);
        for ((a, n), v) in &e.errors {
            let _ = write!(s, " {}_{}={v:.4e}", a.as_str(), n.as_str());
        }
        s.push('\n');
    }
    for r in &rep.rows {
        let _ = writeln!(
            s,
            "rate {} {}: {:.4} (reference {}, delta {:+.4}) {}",
            r.approximant.as_str(),
            r.norm.as_str(),
            r.slope,
            r.reference,
            r.delta,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let ok = record.failures.is_empty() && !record.is_empty() && rep.all_pass();
    let _ = writeln!(s, "outputs in {}; config hash {}", out.display(), record.config_hash);
    report(&mut s, "reference-rates", ok, format!("{} failures", record.failures.len()));
    print!("{s}");
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let run = || -> Result<bool> {
        let cfg = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        match cli.command {
            Command::CellSolve(a) => cell_solve(a, &cfg),
            Command::CorrectorSolve(a) => corrector_solve(a, &cfg),
            Command::ApproxBuild(a) => approx_build(a, &cfg),
            Command::RoughSolve(a) => rough_solve(a, &cfg),
            Command::Study(a) => study(a, &cfg),
        }
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
