use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{Engine, ExperimentConfig, ExperimentKind, InitSpec, Schedule};
use super::output::{Cell, RecordTable, RunSummary, TrialRecord};
use super::stats::fit_decay;
use crate::amp::{
    pair_average, phi_average, run_generalized, run_onsager, run_spectral_amp, AmpOrbit,
};
use crate::ensembles::{
    build_spiked, derive_seed, derive_streams, sample_prior, sample_wigner, stream_from_tags,
    EnsembleSpec, SpikeSpec, Stream,
};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigendecomp, norm2, SymmetricMatrix};
use crate::nonlinearities::{Denoiser, TestFunction};
use crate::spectral::{gap_check_with_margin, power_method_with_oracle, spectral_init, PowerDepth};
use crate::state_evolution::{
    se_covariance, se_covariance_expectation, se_predict_phi, se_spiked, SEParams, SeSchedule,
};

const CONCENTRATION_TAG: u64 = 0x434f_4e43;
/// Diagonal shift of the `power_bound` instances, which makes the top
/// eigenvalue dominant in magnitude.
pub const POWER_BOUND_SHIFT: f64 = 3.0;
/// Slack of the `power_bound` pass test.
pub const POWER_BOUND_SLACK: f64 = 1e-8;
const JACOBI_TOL: f64 = 1e-14;

/// Records and summary of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub table: RecordTable,
    pub summary: RunSummary,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Universality => run_universality(cfg),
        ExperimentKind::StateEvolution => run_state_evolution(cfg),
        ExperimentKind::Bbp => run_bbp(cfg),
        ExperimentKind::Interpolation => run_interpolation(cfg),
        ExperimentKind::Concentration => run_concentration(cfg),
        ExperimentKind::PowerBound => run_power_bound(cfg),
    }
}

/// Seed of all trials at dimension `n`.
pub fn seed_for_n(master_seed: u64, n: usize) -> u64 {
    derive_seed(master_seed, &[n as u64])
}

fn spike_for(gamma: f64) -> SpikeSpec {
    if gamma > 0.0 {
        SpikeSpec::rank_one(gamma)
    } else {
        SpikeSpec::none()
    }
}

/// The denoisers `f_0, ..., f_K` named by the config.
pub fn resolve_denoisers(cfg: &ExperimentConfig) -> Result<Vec<Denoiser>> {
    let len = cfg.iterations + 1;
    match cfg.schedule {
        Schedule::Fixed => {
            let f = cfg
                .denoiser
                .clone()
                .ok_or_else(|| Error::Config("schedule \"fixed\" needs a denoiser".into()))?;
            Ok(vec![f; len])
        }
        Schedule::BayesTanh => {
            let se = se_spiked(
                cfg.gamma,
                &cfg.prior,
                SeSchedule::Bayes,
                cfg.iterations,
                &cfg.quadrature,
            )?;
            Ok(vec![se.bayes_denoiser(); len])
        }
    }
}

fn trial_tasks(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    cfg.n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect()
}

fn power_depth(cfg: &ExperimentConfig) -> PowerDepth {
    match cfg.init {
        InitSpec::Spectral { power_depth } => power_depth.to_power_depth(),
        InitSpec::Independent => PowerDepth::Auto,
    }
}

/// Runs the configured engine on `x / sqrt(n) + (gamma / n) u0 u0^T`.
pub fn run_orbit(
    cfg: &ExperimentConfig,
    x: SymmetricMatrix,
    u0: &[f64],
    f: &[Denoiser],
) -> Result<AmpOrbit> {
    let op = build_spiked(x, &spike_for(cfg.gamma), Some(u0))?;
    match cfg.init {
        InitSpec::Spectral { power_depth } => {
            let opts = cfg.spectral.options(power_depth.to_power_depth());
            Ok(run_spectral_amp(&op, f, u0, cfg.iterations, &opts)?.orbit)
        }
        InitSpec::Independent => match cfg.engine {
            Engine::Onsager => run_onsager(&op, f, u0, cfg.iterations),
            Engine::Generalized => run_generalized(&op, f, u0, cfg.iterations),
        },
    }
}

/// `Phi_{k,n}`, with the signal `u0` in place of `x_0` for pair observables.
pub fn observable(phi: &TestFunction, orbit: &AmpOrbit, u0: &[f64], k: usize) -> Result<f64> {
    match phi {
        TestFunction::SePair { pair } => {
            let it = orbit
                .iterates
                .get(k)
                .ok_or_else(|| Error::invalid(format!("iteration {k} is beyond the orbit")))?;
            pair_average(*pair, u0, it)
        }
        _ => phi_average(orbit, phi, k),
    }
}

/// Signal vector plus both noise matrices of one universality trial.
pub struct TrialData {
    pub u0: Vec<f64>,
    pub a: SymmetricMatrix,
    pub g: SymmetricMatrix,
}

pub fn trial_data(cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<TrialData> {
    let s = derive_streams(seed_for_n(cfg.master_seed, n), trial as u64);
    let (mut shared, mut noise_g) = (s.shared, s.noise_g);
    let mut noise_a: Stream = if cfg.reuse_g_stream_for_a {
        noise_g.clone()
    } else {
        s.noise_a
    };
    let u0 = sample_prior(n, &cfg.prior, &mut shared)?;
    let g = sample_wigner(n, &EnsembleSpec::gaussian(), &mut noise_g)?;
    let a = sample_wigner(n, &cfg.ensemble, &mut noise_a)?;
    Ok(TrialData { u0, a, g })
}

/// `Phi_{K,n}(G)` of one trial, computed without touching `A`.
pub fn gaussian_side(
    cfg: &ExperimentConfig,
    f: &[Denoiser],
    n: usize,
    trial: usize,
) -> Result<f64> {
    let s = derive_streams(seed_for_n(cfg.master_seed, n), trial as u64);
    let (mut shared, mut noise_g) = (s.shared, s.noise_g);
    let u0 = sample_prior(n, &cfg.prior, &mut shared)?;
    let g = sample_wigner(n, &EnsembleSpec::gaussian(), &mut noise_g)?;
    let orbit = run_orbit(cfg, g, &u0, f)?;
    observable(&cfg.phi, &orbit, &u0, cfg.iterations)
}

fn universality_trial(
    cfg: &ExperimentConfig,
    f: &[Denoiser],
    n: usize,
    trial: usize,
) -> Result<(f64, f64)> {
    let TrialData { u0, a, g } = trial_data(cfg, n, trial)?;
    let k = cfg.iterations;
    let phi_a = observable(&cfg.phi, &run_orbit(cfg, a, &u0, f)?, &u0, k)?;
    let phi_g = observable(&cfg.phi, &run_orbit(cfg, g, &u0, f)?, &u0, k)?;
    Ok((phi_a, phi_g))
}

fn finish(
    cfg: &ExperimentConfig,
    mut table: RecordTable,
    key_len: usize,
    metric: &str,
    extra: &[&str],
) -> Result<ExperimentOutput> {
    table.sort();
    let rows = table.summarize(key_len, metric, extra)?;
    let summary = RunSummary {
        experiment: serde_json::to_value(cfg.experiment)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        master_seed: cfg.master_seed,
        records: table.records.len(),
        failed: table.failed_count(),
        rows,
        fits: BTreeMap::new(),
    };
    Ok(ExperimentOutput { table, summary })
}

/// `|Phi_{K,n}(A) - Phi_{K,n}(G)|` over independent `A` and `G` per trial.
pub fn run_universality(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let f = resolve_denoisers(cfg)?;
    let results: Vec<TrialRecord> = trial_tasks(cfg)
        .par_iter()
        .map(|&(n, trial)| {
            let group = vec![Cell::Int(n as u64)];
            match universality_trial(cfg, &f, n, trial) {
                Ok((a, g)) => TrialRecord::ok(
                    group,
                    trial,
                    vec![Cell::Real(a), Cell::Real(g), Cell::Real((a - g).abs())],
                ),
                Err(e) => TrialRecord::failed(group, trial, &e),
            }
        })
        .collect();
    let mut table = RecordTable::new(vec!["n"], vec!["phi_A", "phi_G", "abs_diff"]);
    table.records = results;
    let mut out = finish(cfg, table, 1, "abs_diff", &["phi_A", "phi_G"])?;
    let points: Vec<(f64, f64)> = out
        .summary
        .rows
        .iter()
        .filter_map(|r| Some((r.key["n"].as_f64()?, r.mean?)))
        .collect();
    if points.len() >= 2 {
        if let Ok(slope) = fit_decay(&points) {
            out.summary.fits.insert("decay_slope".into(), slope);
        }
    }
    Ok(out)
}

enum Predictions {
    Spiked(SEParams),
    Covariance(Vec<f64>),
}

/// Empirical `(1/n) sum_i phi` along the orbit against the state-evolution
/// prediction, for every `k <= K`.
pub fn run_state_evolution(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let k_max = cfg.iterations;
    let (f, predictions) = match cfg.init {
        InitSpec::Spectral { .. } => {
            let se = match cfg.schedule {
                Schedule::BayesTanh => se_spiked(
                    cfg.gamma,
                    &cfg.prior,
                    SeSchedule::Bayes,
                    k_max,
                    &cfg.quadrature,
                )?,
                Schedule::Fixed => {
                    let d = cfg.denoiser.as_ref().expect("validated");
                    se_spiked(
                        cfg.gamma,
                        &cfg.prior,
                        SeSchedule::Fixed(d),
                        k_max,
                        &cfg.quadrature,
                    )?
                }
            };
            let f = match cfg.schedule {
                Schedule::BayesTanh => vec![se.bayes_denoiser(); k_max + 1],
                Schedule::Fixed => resolve_denoisers(cfg)?,
            };
            (f, Predictions::Spiked(se))
        }
        InitSpec::Independent => {
            let f = resolve_denoisers(cfg)?;
            let q = &cfg.quadrature;
            let cov = se_covariance(&f, &cfg.prior, k_max, q)?;
            let preds = (0..=k_max)
                .map(|k| {
                    Ok(se_covariance_expectation(
                        &cov,
                        &cfg.prior,
                        &cfg.phi,
                        k,
                        q.mc_samples,
                        q.seed,
                    )?
                    .0)
                })
                .collect::<Result<Vec<f64>>>()?;
            (f, Predictions::Covariance(preds))
        }
    };
    let prediction = |k: usize| -> Result<f64> {
        match &predictions {
            Predictions::Spiked(se) => {
                let TestFunction::SePair { pair } = &cfg.phi else {
                    unreachable!("validated")
                };
                se_predict_phi(*pair, k, se, &cfg.prior, &cfg.quadrature)
            }
            Predictions::Covariance(p) => Ok(p[k]),
        }
    };
    let preds: Vec<f64> = (0..=k_max).map(prediction).collect::<Result<_>>()?;
    let results: Vec<Vec<TrialRecord>> = trial_tasks(cfg)
        .par_iter()
        .map(|&(n, trial)| {
            let run = || -> Result<Vec<f64>> {
                let s = derive_streams(seed_for_n(cfg.master_seed, n), trial as u64);
                let (mut shared, mut noise_a) = (s.shared, s.noise_a);
                let u0 = sample_prior(n, &cfg.prior, &mut shared)?;
                let x = sample_wigner(n, &cfg.ensemble, &mut noise_a)?;
                let orbit = run_orbit(cfg, x, &u0, &f)?;
                (0..=k_max)
                    .map(|k| observable(&cfg.phi, &orbit, &u0, k))
                    .collect()
            };
            let group = |k: usize| vec![Cell::Int(n as u64), Cell::Int(k as u64)];
            match run() {
                Ok(emp) => emp
                    .iter()
                    .zip(&preds)
                    .enumerate()
                    .map(|(k, (e, p))| {
                        TrialRecord::ok(
                            group(k),
                            trial,
                            vec![Cell::Real(*e), Cell::Real(*p), Cell::Real((e - p).abs())],
                        )
                    })
                    .collect(),
                Err(e) => (0..=k_max)
                    .map(|k| TrialRecord::failed(group(k), trial, &e))
                    .collect(),
            }
        })
        .collect();
    let mut table = RecordTable::new(
        vec!["n", "k"],
        vec!["empirical_value", "se_prediction", "abs_error"],
    );
    table.records = results.into_iter().flatten().collect();
    finish(
        cfg,
        table,
        2,
        "abs_error",
        &["empirical_value", "se_prediction"],
    )
}

/// Top eigenvalue, deflated radius and spectral-start overlap across `gamma_grid`.
pub fn run_bbp(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let grid = cfg.gamma_grid.clone().expect("validated");
    let tasks: Vec<(f64, usize, usize)> = grid
        .iter()
        .flat_map(|&g| trial_tasks(cfg).into_iter().map(move |(n, t)| (g, n, t)))
        .collect();
    let depth = power_depth(cfg);
    let results: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(gamma, n, trial)| {
            let group = vec![Cell::Real(gamma), Cell::Int(n as u64)];
            let run = || -> Result<Vec<Cell>> {
                let seed = derive_seed(cfg.master_seed, &[n as u64, gamma.to_bits()]);
                let s = derive_streams(seed, trial as u64);
                let (mut shared, mut noise_a) = (s.shared, s.noise_a);
                let u0 = sample_prior(n, &cfg.prior, &mut shared)?;
                let x = sample_wigner(n, &cfg.ensemble, &mut noise_a)?;
                let op = build_spiked(x, &spike_for(gamma), Some(&u0))?;
                let sp = &cfg.spectral;
                let gap = gap_check_with_margin(&op, sp.gap_depth, sp.deflation_rounds, sp.margin)?;
                let d = depth.resolve(&op)?;
                let (overlap, flag) = match spectral_init(&op, &u0, d) {
                    Ok(psi) => (
                        psi.iter().zip(&u0).map(|(a, b)| a * b).sum::<f64>() / n as f64,
                        false,
                    ),
                    Err(Error::Degenerate(_)) => (0.0, true),
                    Err(e) => return Err(e),
                };
                Ok(vec![
                    Cell::Real(gap.lambda1),
                    Cell::Real(gap.lambda2_abs),
                    Cell::Flag(gap.pass),
                    Cell::Real(overlap),
                    Cell::Flag(flag),
                    Cell::Int(d as u64),
                ])
            };
            match run() {
                Ok(values) => TrialRecord::ok(group, trial, values),
                Err(e) => TrialRecord::failed(group, trial, &e),
            }
        })
        .collect();
    let mut table = RecordTable::new(
        vec!["gamma", "n"],
        vec![
            "lambda1",
            "lambda2_abs",
            "gap_pass",
            "overlap",
            "overlap_flag",
            "power_depth",
        ],
    );
    table.records = results;
    finish(
        cfg,
        table,
        2,
        "lambda1",
        &["overlap", "gap_pass", "lambda2_abs"],
    )
}

/// `Phi_{K,n}` on `A(t) = sqrt(t) A + sqrt(1 - t) G` with `A`, `G` fixed per trial.
pub fn run_interpolation(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let f = resolve_denoisers(cfg)?;
    let t_grid = cfg.t_grid.clone().expect("validated");
    let results: Vec<Vec<TrialRecord>> = trial_tasks(cfg)
        .par_iter()
        .map(|&(n, trial)| {
            let group = |t: f64| vec![Cell::Int(n as u64), Cell::Real(t)];
            let data = match trial_data(cfg, n, trial) {
                Ok(d) => d,
                Err(e) => {
                    return t_grid
                        .iter()
                        .map(|&t| TrialRecord::failed(group(t), trial, &e))
                        .collect()
                }
            };
            t_grid
                .iter()
                .map(|&t| {
                    let run = || -> Result<f64> {
                        let x = data
                            .a
                            .linear_combination(t.sqrt(), &data.g, (1.0 - t).sqrt())?;
                        let orbit = run_orbit(cfg, x, &data.u0, &f)?;
                        observable(&cfg.phi, &orbit, &data.u0, cfg.iterations)
                    };
                    match run() {
                        Ok(v) => TrialRecord::ok(group(t), trial, vec![Cell::Real(v)]),
                        Err(e) => TrialRecord::failed(group(t), trial, &e),
                    }
                })
                .collect()
        })
        .collect();
    let mut table = RecordTable::new(vec!["n", "t"], vec!["phi"]);
    table.records = results.into_iter().flatten().collect();
    let mut out = finish(cfg, table, 2, "phi", &[])?;
    let mut worst: BTreeMap<u64, f64> = BTreeMap::new();
    for pair in out.summary.rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.key["n"] != b.key["n"] {
            continue;
        }
        if let (Some(ma), Some(mb), Some(sa), Some(sb)) = (a.mean, b.mean, a.stderr, b.stderr) {
            let pooled = (sa * sa + sb * sb).sqrt();
            let z = if pooled > 0.0 {
                (mb - ma).abs() / pooled
            } else {
                0.0
            };
            let n = a.key["n"].as_u64().unwrap_or_default();
            let e = worst.entry(n).or_insert(0.0);
            *e = e.max(z);
        }
    }
    for (n, z) in worst {
        out.summary.fits.insert(format!("max_adjacent_z_n{n}"), z);
    }
    Ok(out)
}

/// Spread of `Phi_{K,n}(G)` over trials with `u0` fixed per `n`.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let f = resolve_denoisers(cfg)?;
    let signals: Vec<Vec<f64>> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let mut shared = stream_from_tags(cfg.master_seed, &[n as u64, CONCENTRATION_TAG]);
            sample_prior(n, &cfg.prior, &mut shared)
        })
        .collect::<Result<_>>()?;
    let results: Vec<TrialRecord> = trial_tasks(cfg)
        .par_iter()
        .map(|&(n, trial)| {
            let group = vec![Cell::Int(n as u64)];
            let idx = cfg
                .n_grid
                .iter()
                .position(|&m| m == n)
                .expect("task from grid");
            let run = || -> Result<f64> {
                let u0 = &signals[idx];
                let mut noise_g =
                    derive_streams(seed_for_n(cfg.master_seed, n), trial as u64).noise_g;
                let g = sample_wigner(n, &EnsembleSpec::gaussian(), &mut noise_g)?;
                let orbit = run_orbit(cfg, g, u0, &f)?;
                observable(&cfg.phi, &orbit, u0, cfg.iterations)
            };
            match run() {
                Ok(v) => TrialRecord::ok(group, trial, vec![Cell::Real(v)]),
                Err(e) => TrialRecord::failed(group, trial, &e),
            }
        })
        .collect();
    let mut table = RecordTable::new(vec!["n"], vec!["phi"]);
    table.records = results;
    let mut out = finish(cfg, table, 1, "phi", &[])?;
    let rows = &out.summary.rows;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        if let (Some(s0), Some(s1)) = (first.std, last.std) {
            if rows.len() > 1 && s0 > 0.0 {
                out.summary
                    .fits
                    .insert("std_ratio_last_first".into(), s1 / s0);
            }
        }
    }
    Ok(out)
}

/// Distance of the power output to the oracle eigenvector against the bound
/// `max_{r >= 2} |lambda_r / lambda_1|^d / |<y^1, y0>|`.
pub fn run_power_bound(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let d = cfg.power_iterations;
    let results: Vec<TrialRecord> = trial_tasks(cfg)
        .par_iter()
        .map(|&(n, trial)| {
            let group = vec![Cell::Int(n as u64)];
            let run = || -> Result<Vec<Cell>> {
                let s = derive_streams(seed_for_n(cfg.master_seed, n), trial as u64);
                let (mut shared, mut noise_a) = (s.shared, s.noise_a);
                let a = sample_wigner(n, &cfg.ensemble, &mut noise_a)?;
                let scale = 1.0 / (n as f64).sqrt();
                let y = SymmetricMatrix::from_upper_fn(n, |i, j| {
                    scale * a.get(i, j) + if i == j { POWER_BOUND_SHIFT } else { 0.0 }
                })?;
                let mut y0: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut shared)).collect();
                let norm = norm2(&y0);
                y0.iter_mut().for_each(|v| *v /= norm);
                let eig = jacobi_eigendecomp(&y, JACOBI_TOL)?;
                let (res, lhs) = power_method_with_oracle(&y, &y0, d, &eig)?;
                let rhs = res.bound.expect("oracle run sets the bound");
                Ok(vec![
                    Cell::Int(d as u64),
                    Cell::Real(lhs),
                    Cell::Real(rhs),
                    Cell::Flag(lhs <= rhs + POWER_BOUND_SLACK),
                ])
            };
            match run() {
                Ok(v) => TrialRecord::ok(group, trial, v),
                Err(e) => TrialRecord::failed(group, trial, &e),
            }
        })
        .collect();
    let mut table = RecordTable::new(vec!["n"], vec!["d", "lhs", "rhs", "pass"]);
    table.records = results;
    finish(cfg, table, 1, "pass", &["lhs", "rhs"])
}
