//! Trial-to-trial spread of an AMP observable with the signal held fixed,
//! shrinking as `n` grows.
//!
//! cargo run --release --example concentration

use amplab::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> amplab::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration, vec![250, 500, 1000, 2000]);
    cfg.trials = 30;
    cfg.gamma = 2.0;
    let out = run_experiment(&cfg)?;
    for row in &out.summary.rows {
        let std = row.std.unwrap_or(f64::NAN);
        let n = row.key["n"].as_f64().unwrap_or(f64::NAN);
        println!(
            "n = {n:<5} mean {:.5}  std {std:.5}  std*sqrt(n) {:.4}",
            row.mean.unwrap_or(f64::NAN),
            std * n.sqrt()
        );
    }
    Ok(())
}
