//! Top eigenvalue and eigenvector overlap of a spiked Wigner matrix across
//! the BBP threshold, next to their large-n limits.
//!
//! cargo run --release --example bbp

use amplab::harness::{run_experiment, DepthSetting, ExperimentConfig, ExperimentKind, InitSpec};

fn main() -> amplab::Result<()> {
    let gammas = vec![0.5, 1.5, 2.0, 3.0];
    let mut cfg = ExperimentConfig::new(ExperimentKind::Bbp, vec![800]);
    cfg.trials = 5;
    cfg.gamma_grid = Some(gammas);
    cfg.init = InitSpec::Spectral {
        power_depth: DepthSetting::Fixed(300),
    };
    let out = run_experiment(&cfg)?;
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9} {:>6}",
        "gamma", "lambda1", "limit", "overlap", "limit", "gap"
    );
    for row in &out.summary.rows {
        let g = row.key["gamma"].as_f64().unwrap_or(f64::NAN);
        let (lim_l, lim_o) = if g > 1.0 {
            (g + 1.0 / g, (1.0 - 1.0 / (g * g)).sqrt())
        } else {
            (2.0, 0.0)
        };
        println!(
            "{g:>6.2} {:>9.4} {lim_l:>9.4} {:>9.4} {lim_o:>9.4} {:>6.2}",
            row.mean.unwrap_or(f64::NAN),
            row.also["overlap"].mean,
            row.also["gap_pass"].mean,
        );
    }
    Ok(())
}
