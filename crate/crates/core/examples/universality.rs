//! Compares AMP observables under Rademacher noise and Gaussian noise and
//! fits the decay of their gap in `n`.
//!
//! cargo run --release --example universality

use amplab::ensembles::{EnsembleKind, EnsembleSpec};
use amplab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> amplab::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Universality, vec![250, 500, 1000]);
    cfg.trials = 20;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(EnsembleKind::Rademacher);
    let out = run_experiment(&cfg)?;
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "n", "phi_A", "phi_G", "|diff|"
    );
    for row in &out.summary.rows {
        println!(
            "{:>6} {:>10.5} {:>10.5} {:>10.5}",
            row.key["n"].as_u64().unwrap_or_default(),
            row.also["phi_A"].mean,
            row.also["phi_G"].mean,
            row.mean.unwrap_or(f64::NAN),
        );
    }
    println!(
        "log-log slope of the mean gap: {:.3}",
        out.summary.fits["decay_slope"]
    );
    Ok(())
}
