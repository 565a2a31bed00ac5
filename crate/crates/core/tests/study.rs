use roughlayer::approx::Approximant;
use roughlayer::geometry::RoughProfile;
use roughlayer::study::{
    emit_outputs, read_errors_csv, run_study_counted, write_errors_csv, ErrorNorm, SolveCounters, StudyConfig,
};

fn small(profile: RoughProfile) -> StudyConfig {
    StudyConfig {
        epsilons: vec![0.5, 1.0 / 3.0, 0.25],
        cell_l: 4.0,
        xi_l: 8.0,
        micro_h: 0.125,
        profile,
        quad_refine: 1,
        ..StudyConfig::default()
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn flat_study_matches_closed_form() {
    let cfg = small(RoughProfile::flat());
    let counters = SolveCounters::default();
    let rec = run_study_counted(&cfg, &counters).unwrap();
    assert!(rec.failures.is_empty());
    assert_eq!(rec.micro_counts, (1, 1, 1));
    assert!((rec.beta_bar - 1.0).abs() < 1e-10);
    for e in &rec.entries {
        let g = e.epsilon / (1.0 + e.epsilon);
        let l2 = g / 3f64.sqrt();
        let h1 = g * (4.0f64 / 3.0).sqrt();
        assert!((e.error(Approximant::U0, ErrorNorm::L2).unwrap() - l2).abs() < 1e-8);
        assert!((e.error(Approximant::U0, ErrorNorm::H1).unwrap() - h1).abs() < 1e-8);
        for a in [Approximant::U1, Approximant::PeriodicBl, Approximant::FullBl] {
            assert!(e.error(a, ErrorNorm::H1).unwrap() < 1e-8, "{a:?} at {}", e.epsilon);
        }
    }
    let g: Vec<f64> = cfg.epsilons.iter().map(|e| e / (1.0 + e)).collect();
    let want = slope(&cfg.epsilons, &g);
    assert!((rec.rate(Approximant::U0, ErrorNorm::L2).unwrap() - want).abs() < 1e-6);
}

#[test]
fn sine_study_orders_and_round_trips() {
    let cfg = small(RoughProfile::sine());
    let counters = SolveCounters::default();
    let rec = run_study_counted(&cfg, &counters).unwrap();
    assert_eq!(counters.snapshot(), (1, 1, 1));
    assert_eq!(rec.entries.len(), 3);
    for e in &rec.entries {
        let err = |a| e.error(a, ErrorNorm::L2).unwrap();
        assert!(err(Approximant::FullBl) < err(Approximant::PeriodicBl), "eps {}", e.epsilon);
        assert!(err(Approximant::PeriodicBl) < err(Approximant::U0), "eps {}", e.epsilon);
        for n in ErrorNorm::ALL {
            assert!(e.error(Approximant::U0, n).unwrap() > 0.0);
        }
    }

    let mut buf = Vec::new();
    write_errors_csv(&rec, &mut buf).unwrap();
    let rows = read_errors_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 3 * 8);
    for (eps, a, n, v) in rows {
        let e = rec.entries.iter().find(|e| e.epsilon.to_bits() == eps.to_bits()).unwrap();
        assert_eq!(e.error(a, n).unwrap().to_bits(), v.to_bits());
    }

    let dir = std::env::temp_dir().join(format!("roughlayer-study-{}", std::process::id()));
    let report = emit_outputs(&rec, &dir).unwrap();
    assert_eq!(report.rows.len(), 8);
    for f in ["errors.csv", "rates.csv", "study.log"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let log = std::fs::read_to_string(dir.join("study.log")).unwrap();
    assert!(log.contains(&rec.config_hash));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn hash_tracks_configuration() {
    let a = small(RoughProfile::sine());
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.micro_h = 1.0 / 16.0;
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.epsilons = vec![0.5, 0.5, 0.25];
    assert!(c.validate().is_err());
}
