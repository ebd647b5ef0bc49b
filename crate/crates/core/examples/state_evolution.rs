//! State-evolution scalars for the Bayes tanh schedule and the matching
//! empirical overlaps of one spectrally initialized AMP run.
//!
//! cargo run --release --example state_evolution

use amplab::amp::{pair_average, run_spectral_amp, SpectralOptions};
use amplab::ensembles::{
    build_spiked, derive_streams, sample_prior, sample_wigner, EnsembleSpec, PriorSpec, SpikeSpec,
};
use amplab::nonlinearities::PairFunction;
use amplab::state_evolution::{se_predict_phi, se_spiked, QuadratureSpec, SeSchedule};

fn main() -> amplab::Result<()> {
    let (n, gamma, k_max) = (1500, 2.0, 5);
    let prior = PriorSpec::Rademacher;
    let quad = QuadratureSpec::default();
    let se = se_spiked(gamma, &prior, SeSchedule::Bayes, k_max, &quad)?;
    let f = vec![se.bayes_denoiser(); k_max + 1];

    let mut streams = derive_streams(3, 0);
    let u0 = sample_prior(n, &prior, &mut streams.shared)?;
    let x = sample_wigner(n, &EnsembleSpec::gaussian(), &mut streams.noise_a)?;
    let op = build_spiked(x, &SpikeSpec::rank_one(gamma), Some(&u0))?;
    let run = run_spectral_amp(&op, &f, &u0, k_max, &SpectralOptions::default())?;
    println!(
        "gap check: lambda1 {:.4}, |lambda2| {:.4}",
        run.gap.lambda1, run.gap.lambda2_abs
    );

    println!(
        "{:>3} {:>8} {:>8} {:>12} {:>12}",
        "k", "mu", "sigma", "E tanh(v)w", "empirical"
    );
    for k in 0..=k_max {
        let pred = se_predict_phi(PairFunction::TanhOverlap, k, &se, &prior, &quad)?;
        let emp = pair_average(PairFunction::TanhOverlap, &u0, &run.orbit.iterates[k])?;
        println!(
            "{k:>3} {:>8.4} {:>8.4} {pred:>12.5} {emp:>12.5}",
            se.mu[k], se.sigma[k]
        );
    }
    Ok(())
}
