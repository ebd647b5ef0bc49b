//! Mean of the AMP observable along the path `sqrt(t) A + sqrt(1 - t) G`
//! from Gaussian to Rademacher noise.
//!
//! cargo run --release --example interpolation

use amplab::ensembles::{EnsembleKind, EnsembleSpec};
use amplab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> amplab::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Interpolation, vec![600]);
    cfg.trials = 15;
    cfg.gamma = 2.0;
    cfg.ensemble = EnsembleSpec::new(EnsembleKind::Rademacher);
    cfg.t_grid = Some(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let out = run_experiment(&cfg)?;
    for row in &out.summary.rows {
        println!(
            "t = {:<5.2} mean {:.5} +- {:.5}",
            row.key["t"].as_f64().unwrap_or(f64::NAN),
            row.mean.unwrap_or(f64::NAN),
            row.stderr.unwrap_or(f64::NAN)
        );
    }
    println!(
        "largest adjacent step in standard errors: {:.2}",
        out.summary.fits["max_adjacent_z_n600"]
    );
    Ok(())
}
