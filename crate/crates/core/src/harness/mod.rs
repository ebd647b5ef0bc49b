//! Seeded experiments: configuration, trial orchestration, records and
//! summaries.
//!
//! Every trial draws its randomness from streams derived from
//! `(master_seed, n, trial)`, so results do not depend on how trials are
//! scheduled across threads. Records are sorted by group and trial before
//! they are written.

mod config;
mod experiments;
mod output;
pub mod selftest;
mod stats;

pub use config::{
    AutoTag, DepthSetting, Engine, ExperimentConfig, ExperimentKind, InitSpec, Schedule,
    SpectralSettings,
};
pub use experiments::{
    gaussian_side, observable, resolve_denoisers, run_bbp, run_concentration, run_experiment,
    run_interpolation, run_orbit, run_power_bound, run_state_evolution, run_universality,
    seed_for_n, trial_data, ExperimentOutput, TrialData, POWER_BOUND_SHIFT, POWER_BOUND_SLACK,
};
pub use output::{Cell, RecordTable, RunSummary, SummaryRow, TrialRecord};
pub use stats::{fit_decay, Moments};
