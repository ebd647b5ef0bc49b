//! The Onsager-corrected recursion: coefficients from analytic partials
//! against finite differences, and the same orbit replayed through the
//! generalized recursion via the three-phase embedding.
//!
//! cargo run --release --example onsager

use amplab::amp::{run_generalized, run_onsager, ThreePhaseEmbedding};
use amplab::ensembles::{
    build_spiked, derive_streams, sample_prior, sample_wigner, EnsembleSpec, PriorSpec, SpikeSpec,
};
use amplab::nonlinearities::{fd_partial, Denoiser};

fn main() -> amplab::Result<()> {
    let (n, k_max) = (400, 4);
    let f = Denoiser::LinearCombo {
        weights: vec![
            vec![1.0],
            vec![0.3, 0.8],
            vec![0.0, -0.2, 0.9],
            vec![0.1, 0.0, 0.2, 0.7],
            vec![0.0; 5],
        ],
        offset: 0.0,
    };
    let fs = vec![f.clone(); k_max + 1];
    let mut s = derive_streams(5, 0);
    let u0 = sample_prior(n, &PriorSpec::Rademacher, &mut s.shared)?;
    let x = sample_wigner(n, &EnsembleSpec::gaussian(), &mut s.noise_a)?;
    let op = build_spiked(x, &SpikeSpec::rank_one(1.5), Some(&u0))?;

    let orbit = run_onsager(&op, &fs, &u0, k_max)?;
    for k in 1..k_max {
        for j in 1..=k {
            let fd = fd_partial(&f, k, j, &orbit.iterates[..=k], 1e-6)?;
            let b_fd = fd.iter().sum::<f64>() / n as f64;
            println!(
                "b[{k},{j}] analytic {:+.6}  finite difference {:+.6}",
                orbit.onsager_log[k][j - 1],
                b_fd
            );
        }
    }

    let emb = ThreePhaseEmbedding {
        denoisers: fs.clone(),
        coeffs: orbit.onsager_log.clone(),
    };
    let gen = run_generalized(&op, &emb.maps(k_max), &u0, 3 * k_max)?;
    let worst = (0..=k_max)
        .flat_map(|l| {
            gen.iterates[3 * l]
                .iter()
                .zip(&orbit.iterates[l])
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    println!("largest gap between embedded and direct iterates: {worst:.2e}");
    Ok(())
}
