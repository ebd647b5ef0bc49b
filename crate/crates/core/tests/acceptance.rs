//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `cargo test --release --test acceptance -- 1 7 12` runs a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use amplab::amp::run_onsager;
use amplab::ensembles::{
    build_spiked, sample_prior, sample_wigner, stream_from_tags, EnsembleKind, EnsembleSpec,
    PriorSpec, SpikeSpec,
};
use amplab::harness::{
    gaussian_side, observable, resolve_denoisers, run_experiment, run_orbit, trial_data,
    DepthSetting, ExperimentConfig, ExperimentKind, ExperimentOutput, InitSpec, Schedule,
    SummaryRow,
};
use amplab::linalg::{jacobi_eigendecomp, SymmetricMatrix};
use amplab::nonlinearities::{fd_partial, Denoiser, PairFunction, TestFunction};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 20240611;

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(job)
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput, String> {
    run_experiment(cfg).map_err(|e| e.to_string())
}

fn row_with<'a>(rows: &'a [SummaryRow], key: &str, value: f64) -> Result<&'a SummaryRow, String> {
    rows.iter()
        .find(|r| r.key.get(key).and_then(|v| v.as_f64()) == Some(value))
        .ok_or_else(|| format!("no summary row with {key} = {value}"))
}

fn bbp_config(ensemble: EnsembleKind, gammas: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Bbp, vec![2000]);
    cfg.trials = 20;
    cfg.master_seed = SEED;
    cfg.ensemble = EnsembleSpec::new(ensemble);
    cfg.gamma_grid = Some(gammas);
    cfg.init = InitSpec::Spectral {
        power_depth: DepthSetting::default(),
    };
    cfg
}

fn bbp_means(out: &ExperimentOutput, gamma: f64) -> Result<(f64, f64, usize), String> {
    let row = row_with(&out.summary.rows, "gamma", gamma)?;
    let lambda = row.mean.ok_or("no successful trials")?;
    let overlap = row.also.get("overlap").ok_or("no overlap column")?.mean;
    Ok((lambda, overlap, row.failed))
}

fn check_above(out: &ExperimentOutput) -> Outcome {
    let (lambda, overlap, failed) = bbp_means(out, 2.0)?;
    let pass = (lambda - 2.5).abs() <= 0.1 && (overlap - 0.8660).abs() <= 0.05 && failed == 0;
    Ok((
        pass,
        format!("mean lambda1 {lambda:.4}, mean overlap {overlap:.4}, failed {failed}"),
    ))
}

fn check_below(out: &ExperimentOutput) -> Outcome {
    let (lambda, overlap, failed) = bbp_means(out, 0.5)?;
    let pass = (lambda - 2.0).abs() <= 0.1 && overlap <= 0.1 && failed == 0;
    Ok((
        pass,
        format!("mean lambda1 {lambda:.4}, mean overlap {overlap:.4}, failed {failed}"),
    ))
}

fn criterion_1() -> Outcome {
    let cfg = bbp_config(EnsembleKind::Gaussian, vec![2.0]);
    let start = Instant::now();
    let out = in_pool(1, || run(&cfg))?;
    let elapsed = start.elapsed();
    let (pass, detail) = check_above(&out)?;
    let fast = elapsed <= Duration::from_secs(120);
    Ok((
        pass && fast,
        format!("{detail}, {:.1}s single-threaded", elapsed.as_secs_f64()),
    ))
}

fn criterion_2() -> Outcome {
    let out = run(&bbp_config(EnsembleKind::Gaussian, vec![0.5]))?;
    check_below(&out)
}

fn criterion_3() -> Outcome {
    let out = run(&bbp_config(EnsembleKind::Rademacher, vec![0.5, 2.0]))?;
    let (above, a) = check_above(&out)?;
    let (below, b) = check_below(&out)?;
    Ok((above && below, format!("gamma 2: {a}; gamma 0.5: {b}")))
}

fn universality_config(ensemble: EnsembleKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Universality, vec![250, 500, 1000, 2000]);
    cfg.trials = 50;
    cfg.master_seed = SEED;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(ensemble);
    cfg
}

fn decay_check(out: &ExperimentOutput) -> Result<(bool, String), String> {
    let rows = &out.summary.rows;
    let mut inversions = 0;
    let mut large = false;
    for w in rows.windows(2) {
        let (m0, m1) = (
            w[0].mean.ok_or("empty group")?,
            w[1].mean.ok_or("empty group")?,
        );
        if m1 >= m0 {
            inversions += 1;
            let (s0, s1) = (w[0].stderr.unwrap_or(0.0), w[1].stderr.unwrap_or(0.0));
            if m1 - m0 > 2.0 * (s0 * s0 + s1 * s1).sqrt() {
                large = true;
            }
        }
    }
    let slope = *out.summary.fits.get("decay_slope").ok_or("no decay fit")?;
    let means: Vec<String> = rows
        .iter()
        .filter_map(|r| r.mean)
        .map(|m| format!("{m:.4}"))
        .collect();
    let pass = inversions <= 1 && !large && slope <= -0.25 && out.summary.failed == 0;
    Ok((
        pass,
        format!(
            "means [{}], slope {slope:.3}, inversions {inversions}",
            means.join(", ")
        ),
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (name, kind) in [
        ("rademacher", EnsembleKind::Rademacher),
        ("uniform", EnsembleKind::Uniform),
    ] {
        let out = in_pool(4, || run(&universality_config(kind)))?;
        let (ok, d) = decay_check(&out)?;
        pass &= ok;
        details.push(format!("{name}: {d}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(15 * 60);
    details.push(format!("{:.1}s with 4 workers", elapsed.as_secs_f64()));
    Ok((pass, details.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::StateEvolution, vec![2000]);
    cfg.trials = 5;
    cfg.master_seed = SEED;
    cfg.gamma = 2.0;
    cfg.phi = TestFunction::SePair {
        pair: PairFunction::TanhOverlap,
    };
    cfg.init = InitSpec::Spectral {
        power_depth: DepthSetting::default(),
    };
    let out = run(&cfg)?;
    let mut worst: f64 = 0.0;
    let mut per_k = Vec::new();
    for row in &out.summary.rows {
        let emp = row
            .also
            .get("empirical_value")
            .ok_or("missing empirical moments")?
            .mean;
        let pred = row
            .also
            .get("se_prediction")
            .ok_or("missing prediction")?
            .mean;
        worst = worst.max((emp - pred).abs());
        per_k.push(format!("{emp:.4} vs {pred:.4}"));
    }
    let pass = worst <= 0.05 && out.summary.failed == 0 && per_k.len() == cfg.iterations + 1;
    Ok((
        pass,
        format!("by k [{}], worst gap {worst:.4}", per_k.join(", ")),
    ))
}

fn criterion_6() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::StateEvolution, vec![2000]);
    cfg.trials = 20;
    cfg.master_seed = SEED;
    cfg.prior = PriorSpec::Gaussian;
    cfg.schedule = Schedule::Fixed;
    cfg.denoiser = Some(Denoiser::Identity);
    cfg.phi = TestFunction::SePair {
        pair: PairFunction::Square,
    };
    let out = run(&cfg)?;
    let means: Vec<f64> = out
        .summary
        .rows
        .iter()
        .map(|r| r.also.get("empirical_value").map(|m| m.mean))
        .collect::<Option<_>>()
        .ok_or("missing empirical moments")?;
    let worst = means.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let pass = worst <= 0.1 && out.summary.failed == 0 && means.len() == cfg.iterations + 1;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    Ok((pass, format!("mean variance by k [{}]", shown.join(", "))))
}

fn criterion_7() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::PowerBound, vec![64]);
    cfg.trials = 100;
    cfg.master_seed = SEED;
    let start = Instant::now();
    let out = run(&cfg)?;
    let elapsed = start.elapsed();
    let passes = out.table.column("pass").map_err(|e| e.to_string())?;
    let held = passes.iter().filter(|&&p| p == 1.0).count();
    let pass = held == 100 && elapsed <= Duration::from_secs(30);
    Ok((
        pass,
        format!("{held}/100 hold, {:.2}s", elapsed.as_secs_f64()),
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = stream_from_tags(SEED, &[8]);
    let mut worst_rec: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut pass = true;
    let mut count = 0;
    for n in [4, 16, 64, 128] {
        for inst in 0..100 {
            let m = match inst % 4 {
                // clustered spectrum: near-multiple of the identity
                0 => SymmetricMatrix::from_upper_fn(n, |i, j| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if i == j {
                        5.0 + 1e-6 * e
                    } else {
                        1e-6 * e
                    }
                }),
                // wide dynamic range
                1 => SymmetricMatrix::from_upper_fn(n, |i, j| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    e * 10f64.powi(rng.random_range(-3..4)) * if i == j { 1.0 } else { 0.5 }
                }),
                _ => SymmetricMatrix::from_upper_fn(n, |_, _| StandardNormal.sample(&mut rng)),
            }
            .map_err(|e| e.to_string())?;
            let eig = jacobi_eigendecomp(&m, 1e-14).map_err(|e| e.to_string())?;
            let rec = eig.reconstruction_error(&m) / m.frobenius_norm();
            let orth = eig.orthonormality_defect();
            worst_rec = worst_rec.max(rec);
            worst_orth = worst_orth.max(orth);
            pass &= rec <= 1e-9 && orth <= 1e-10;
            count += 1;
        }
    }
    Ok((
        pass,
        format!("{count} instances, worst relative reconstruction {worst_rec:.2e}, worst orthonormality {worst_orth:.2e}"),
    ))
}

fn random_denoiser(kind: usize, iterations: usize, rng: &mut impl Rng) -> Denoiser {
    let len = iterations + 1;
    match kind {
        0 => Denoiser::Identity,
        1 => Denoiser::ScaledTanh {
            scales: (0..len).map(|_| rng.random_range(0.3..3.0)).collect(),
        },
        2 => Denoiser::SmoothSoftThreshold {
            thresholds: (0..len).map(|_| rng.random_range(0.3..1.0)).collect(),
            width: rng.random_range(0.01..0.5),
        },
        _ => Denoiser::LinearCombo {
            weights: (0..len)
                .map(|k| (0..=k).map(|_| rng.random_range(-0.7..0.7)).collect())
                .collect(),
            offset: rng.random_range(-0.5..0.5),
        },
    }
}

fn criterion_9() -> Outcome {
    const ORBITS: usize = 50;
    const KINDS: usize = 4;
    const H: f64 = 1e-6;
    let (n, iterations) = (300, 5);
    let mut rng = stream_from_tags(SEED, &[9]);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for orbit_index in 0..ORBITS {
        for kind in 0..KINDS {
            let f = random_denoiser(kind, iterations, &mut rng);
            let fs = vec![f.clone(); iterations + 1];
            let mut stream = stream_from_tags(SEED, &[9, orbit_index as u64, kind as u64]);
            let u0 =
                sample_prior(n, &PriorSpec::Rademacher, &mut stream).map_err(|e| e.to_string())?;
            let x = sample_wigner(n, &EnsembleSpec::gaussian(), &mut stream)
                .map_err(|e| e.to_string())?;
            let gamma = rng.random_range(0.0..3.0);
            let op = build_spiked(x, &SpikeSpec::rank_one(gamma), Some(&u0))
                .map_err(|e| e.to_string())?;
            let orbit = run_onsager(&op, &fs, &u0, iterations).map_err(|e| e.to_string())?;
            for k in 1..iterations {
                let history = &orbit.iterates[..=k];
                for j in 1..=k {
                    let fd = fd_partial(&f, k, j, history, H).map_err(|e| e.to_string())?;
                    let b_fd = fd.iter().sum::<f64>() / n as f64;
                    worst = worst.max((orbit.onsager_log[k][j - 1] - b_fd).abs());
                    compared += 1;
                }
            }
        }
    }
    Ok((
        worst <= 1e-6,
        format!(
            "{compared} coefficients on {} orbits, worst gap {worst:.2e}",
            ORBITS * KINDS
        ),
    ))
}

fn criterion_10() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration, vec![500, 2000]);
    cfg.trials = 50;
    cfg.master_seed = SEED;
    cfg.gamma = 2.0;
    let out = run(&cfg)?;
    let ratio = *out
        .summary
        .fits
        .get("std_ratio_last_first")
        .ok_or("no std ratio")?;
    let stds: Vec<String> = out
        .summary
        .rows
        .iter()
        .filter_map(|r| r.std)
        .map(|s| format!("{s:.5}"))
        .collect();
    Ok((
        ratio <= 0.7 && out.summary.failed == 0,
        format!("std [{}], ratio {ratio:.3}", stds.join(", ")),
    ))
}

fn interpolation_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Interpolation, vec![1000]);
    cfg.trials = 30;
    cfg.master_seed = SEED;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(EnsembleKind::Rademacher);
    cfg.t_grid = Some(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    cfg
}

fn criterion_11() -> Outcome {
    let cfg = interpolation_config();
    let out = run(&cfg)?;
    let z = *out
        .summary
        .fits
        .get("max_adjacent_z_n1000")
        .ok_or("no adjacent fit")?;
    let f = resolve_denoisers(&cfg).map_err(|e| e.to_string())?;
    let mut exact = true;
    for record in &out.table.records {
        let t = record.group[1].as_f64();
        if t != 0.0 && t != 1.0 {
            continue;
        }
        let value = out
            .table
            .value(record, "phi")
            .map_err(|e| e.to_string())?
            .ok_or("failed trial")?;
        let reference = if t == 0.0 {
            gaussian_side(&cfg, &f, 1000, record.trial).map_err(|e| e.to_string())?
        } else {
            let data = trial_data(&cfg, 1000, record.trial).map_err(|e| e.to_string())?;
            let orbit = run_orbit(&cfg, data.a, &data.u0, &f).map_err(|e| e.to_string())?;
            observable(&cfg.phi, &orbit, &data.u0, cfg.iterations).map_err(|e| e.to_string())?
        };
        exact &= value.to_bits() == reference.to_bits();
    }
    Ok((
        z <= 5.0 && exact && out.summary.failed == 0,
        format!("max adjacent |diff| / pooled SE {z:.3}, endpoints bitwise equal: {exact}"),
    ))
}

fn criterion_12() -> Outcome {
    let mut checks = Vec::new();
    let mut uni = universality_config(EnsembleKind::Rademacher);
    uni.n_grid = vec![250, 500];
    uni.trials = 10;
    let mut bbp = bbp_config(EnsembleKind::Rademacher, vec![0.5, 2.0]);
    bbp.n_grid = vec![300];
    bbp.trials = 4;
    let mut interp = interpolation_config();
    interp.n_grid = vec![300];
    interp.trials = 6;
    let mut power = ExperimentConfig::new(ExperimentKind::PowerBound, vec![64]);
    power.trials = 20;
    power.master_seed = SEED;
    for (name, cfg) in [
        ("universality", uni),
        ("bbp", bbp),
        ("interpolation", interp),
        ("power_bound", power),
    ] {
        let csv = |threads: usize| -> Result<Vec<u8>, String> {
            in_pool(threads, || run(&cfg))?
                .table
                .to_csv_bytes()
                .map_err(|e| e.to_string())
        };
        let first = csv(1)?;
        let same = first == csv(1)? && first == csv(3)?;
        checks.push((name, same));
    }
    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(n, s)| format!("{n} {}", if *s { "identical" } else { "DIFFERS" }))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((pass, detail))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("bbp above threshold, gaussian noise", criterion_1),
        ("bbp below threshold, gaussian noise", criterion_2),
        ("bbp with rademacher noise", criterion_3),
        ("universality decay", criterion_4),
        ("state evolution from spectral start", criterion_5),
        ("identity denoiser fixed point", criterion_6),
        ("power method bound", criterion_7),
        ("jacobi oracle", criterion_8),
        ("onsager coefficients vs finite differences", criterion_9),
        ("concentration", criterion_10),
        ("interpolation", criterion_11),
        ("determinism", criterion_12),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
