use amplab::ensembles::{EnsembleKind, EnsembleSpec, PriorSpec};
use amplab::harness::{
    fit_decay, gaussian_side, resolve_denoisers, run_experiment, DepthSetting, ExperimentConfig,
    ExperimentKind, InitSpec, RunSummary, Schedule,
};
use amplab::nonlinearities::{Denoiser, PairFunction, TestFunction};

fn universality(n_grid: Vec<usize>, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Universality, n_grid);
    cfg.trials = trials;
    cfg.master_seed = 11;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(EnsembleKind::Rademacher);
    cfg
}

#[test]
fn reusing_the_gaussian_stream_makes_both_sides_equal() {
    let mut cfg = universality(vec![60, 120], 3);
    cfg.ensemble = EnsembleSpec::gaussian();
    cfg.reuse_g_stream_for_a = true;
    let out = run_experiment(&cfg).unwrap();
    assert!(out
        .table
        .column("abs_diff")
        .unwrap()
        .iter()
        .all(|&d| d == 0.0));
}

#[test]
fn gaussian_side_reproduces_phi_g() {
    let cfg = universality(vec![80], 4);
    let out = run_experiment(&cfg).unwrap();
    let f = resolve_denoisers(&cfg).unwrap();
    for r in &out.table.records {
        let g = out.table.value(r, "phi_G").unwrap().unwrap();
        assert_eq!(
            g.to_bits(),
            gaussian_side(&cfg, &f, 80, r.trial).unwrap().to_bits()
        );
    }
}

#[test]
fn records_are_reproducible_and_ordered() {
    let cfg = universality(vec![50, 70], 2);
    let a = run_experiment(&cfg).unwrap().table.to_csv_bytes().unwrap();
    let b = run_experiment(&cfg).unwrap().table.to_csv_bytes().unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,trial,phi_A,phi_G,abs_diff,status,error");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("50,0,") && lines[4].starts_with("70,1,"));
    let other = ExperimentConfig {
        master_seed: 12,
        ..cfg
    };
    assert_ne!(
        text.as_bytes(),
        run_experiment(&other)
            .unwrap()
            .table
            .to_csv_bytes()
            .unwrap()
    );
}

/// Recomputes the summary from the CSV text alone.
fn summary_from_csv(csv_bytes: &[u8], metric: &str) -> Vec<(String, f64, usize)> {
    let mut rd = csv::Reader::from_reader(csv_bytes);
    let headers = rd.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == metric).unwrap();
    let status = headers.iter().position(|h| h == "status").unwrap();
    let mut groups: Vec<(String, f64, usize)> = Vec::new();
    for rec in rd.records() {
        let rec = rec.unwrap();
        if &rec[status] != "ok" {
            continue;
        }
        let v: f64 = rec[col].parse().unwrap();
        let key = rec[0].to_string();
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1 += v;
                g.2 += 1;
            }
            None => groups.push((key, v, 1)),
        }
    }
    groups
}

#[test]
fn summaries_agree_with_the_records_file() {
    let cfg = universality(vec![40, 90], 5);
    let out = run_experiment(&cfg).unwrap();
    let csv_bytes = out.table.to_csv_bytes().unwrap();
    let external = summary_from_csv(&csv_bytes, "abs_diff");
    assert_eq!(external.len(), out.summary.rows.len());
    for (row, (key, sum, count)) in out.summary.rows.iter().zip(&external) {
        assert_eq!(row.key["n"].to_string(), *key);
        assert_eq!(row.count, *count);
        let mean = row.mean.unwrap();
        assert!((mean * row.count as f64 - sum).abs() <= 1e-9 * sum.abs().max(1e-300));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("summary.json");
    out.summary.write_json(&path).unwrap();
    let back: RunSummary = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, out.summary);
    assert!(back.fits.contains_key("decay_slope"));
}

#[test]
fn failed_trials_are_recorded_and_excluded() {
    // the spectral start needs nonzero overlap, which a zero prior vector
    // cannot give; a tiny gamma below threshold still runs
    let mut cfg = ExperimentConfig::new(ExperimentKind::Bbp, vec![30]);
    cfg.trials = 3;
    cfg.gamma_grid = Some(vec![0.0, 3.0]);
    cfg.init = InitSpec::Spectral {
        power_depth: DepthSetting::Fixed(20),
    };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.table.records.len(), 6);
    for row in &out.summary.rows {
        assert_eq!(row.count + row.failed, 3);
    }
    let csv = String::from_utf8(out.table.to_csv_bytes().unwrap()).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.contains(",ok,") || l.contains(",failed,")));
}

#[test]
fn single_trial_groups_are_degenerate() {
    let cfg = universality(vec![40], 1);
    let row = &run_experiment(&cfg).unwrap().summary.rows[0];
    assert!(row.degenerate);
    assert_eq!(row.std, Some(0.0));
    assert_eq!(row.count, 1);
}

#[test]
fn constant_observable_has_no_spread() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration, vec![40, 80]);
    cfg.trials = 4;
    cfg.gamma = 2.0;
    cfg.phi = TestFunction::SePair {
        pair: PairFunction::Constant(0.25),
    };
    let out = run_experiment(&cfg).unwrap();
    for row in &out.summary.rows {
        assert_eq!(row.mean, Some(0.25));
        assert_eq!(row.std, Some(0.0));
    }
}

#[test]
fn constant_observable_is_predicted_exactly() {
    for init in [
        InitSpec::Independent,
        InitSpec::Spectral {
            power_depth: DepthSetting::Fixed(50),
        },
    ] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::StateEvolution, vec![60]);
        cfg.trials = 2;
        cfg.phi = TestFunction::SePair {
            pair: PairFunction::Constant(-1.5),
        };
        match init {
            InitSpec::Independent => {
                cfg.prior = PriorSpec::Gaussian;
                cfg.schedule = Schedule::Fixed;
                cfg.denoiser = Some(Denoiser::ScaledTanh {
                    scales: vec![1.0; 6],
                });
            }
            InitSpec::Spectral { .. } => cfg.gamma = 3.0,
        }
        cfg.init = init;
        let out = run_experiment(&cfg).unwrap();
        assert!(out
            .table
            .column("abs_error")
            .unwrap()
            .iter()
            .all(|&e| e == 0.0));
        assert!(out
            .table
            .column("se_prediction")
            .unwrap()
            .iter()
            .all(|&p| p == -1.5));
    }
}

#[test]
fn interpolation_endpoints_match_pure_runs() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Interpolation, vec![70]);
    cfg.trials = 3;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(EnsembleKind::Uniform);
    cfg.t_grid = Some(vec![0.0, 0.5, 1.0]);
    let out = run_experiment(&cfg).unwrap();
    let f = resolve_denoisers(&cfg).unwrap();
    let mut uni = cfg.clone();
    uni.experiment = ExperimentKind::Universality;
    uni.t_grid = None;
    let pure = run_experiment(&uni).unwrap();
    for r in out
        .table
        .records
        .iter()
        .filter(|r| r.group[1].as_f64() == 0.0)
    {
        let v = out.table.value(r, "phi").unwrap().unwrap();
        assert_eq!(v, gaussian_side(&cfg, &f, 70, r.trial).unwrap());
    }
    let at_one: Vec<f64> = out
        .table
        .records
        .iter()
        .filter(|r| r.group[1].as_f64() == 1.0)
        .map(|r| out.table.value(r, "phi").unwrap().unwrap())
        .collect();
    assert_eq!(at_one, pure.table.column("phi_A").unwrap());
    assert!(out.summary.fits.contains_key("max_adjacent_z_n70"));
}

#[test]
fn power_bound_rows_hold() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::PowerBound, vec![8, 32]);
    cfg.trials = 10;
    cfg.power_iterations = 15;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.table.records.len(), 20);
    assert!(out.table.column("pass").unwrap().iter().all(|&p| p == 1.0));
    let lhs = out.table.column("lhs").unwrap();
    let rhs = out.table.column("rhs").unwrap();
    assert!(lhs.iter().zip(&rhs).all(|(l, r)| *l <= r + 1e-8));
}

#[test]
fn decay_fit_matches_closed_form() {
    let c: f64 = 0.37;
    let points: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0]
        .iter()
        .map(|&n: &f64| (n, c * n.powf(-0.5)))
        .collect();
    assert!((fit_decay(&points).unwrap() + 0.5).abs() < 1e-12);
    // two points: slope is the secant in log-log
    let s = fit_decay(&[(10.0, 2.0), (40.0, 0.5)]).unwrap();
    assert!((s - (0.25f64.ln() / 4f64.ln())).abs() < 1e-12);
}

#[test]
fn config_validation_rejects_bad_input() {
    let bad = [
        r#"{"experiment":"universality","n_grid":[100,50],"gamma":2}"#,
        r#"{"experiment":"universality","n_grid":[],"gamma":2}"#,
        r#"{"experiment":"universality","n_grid":[100],"gamma":2,"trials":0}"#,
        r#"{"experiment":"universality","n_grid":[100],"gamma":0.5}"#,
        r#"{"experiment":"universality","n_grid":[100],"gamma":2,"schedule":"fixed"}"#,
        r#"{"experiment":"bbp","n_grid":[100]}"#,
        r#"{"experiment":"interpolation","n_grid":[100],"gamma":2,"t_grid":[0,1.5]}"#,
        r#"{"experiment":"universality","n_grid":[100],"gamma":2,"bogus":1}"#,
        r#"{"experiment":"power_bound","n_grid":[1000]}"#,
        r#"{"experiment":"state_evolution","n_grid":[100],"gamma":2,"schedule":"fixed","denoiser":{"kind":"identity"}}"#,
    ];
    for text in bad {
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(err.is_config_error(), "{text}: {err}");
    }
}

#[test]
fn config_round_trips_through_canonical_json() {
    let text = r#"{"experiment":"bbp","n_grid":[100,200],"gamma_grid":[0.5,2],
        "init":{"kind":"spectral","power_depth":40},"ensemble":{"kind":"centered_bernoulli","param":0.2}}"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(cfg.trials, 50);
    assert_eq!(
        cfg.init,
        InitSpec::Spectral {
            power_depth: DepthSetting::Fixed(40)
        }
    );
    let again = ExperimentConfig::from_json(&cfg.to_canonical_json()).unwrap();
    assert_eq!(again, cfg);
    let auto = ExperimentConfig::from_json(
        r#"{"experiment":"bbp","n_grid":[100],"gamma_grid":[2],"init":{"kind":"spectral","power_depth":"auto"}}"#,
    )
    .unwrap();
    assert_eq!(
        auto.init,
        InitSpec::Spectral {
            power_depth: DepthSetting::default()
        }
    );
}
