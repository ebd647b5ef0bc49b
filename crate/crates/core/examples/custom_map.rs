//! Running the generalized recursion with a user-defined coordinate map.
//!
//! cargo run --release --example custom_map

use amplab::amp::run_generalized;
use amplab::ensembles::{
    build_spiked, derive_streams, sample_prior, sample_wigner, EnsembleSpec, PriorSpec, SpikeSpec,
};
use amplab::nonlinearities::CoordinateMap;

/// `F_k(x, u^{k-1}, ..., u^0) = clamp(x, -c, c)`: a bounded power iteration.
struct Clipped(f64);

impl CoordinateMap for Clipped {
    fn check(&self, _k: usize) -> amplab::Result<()> {
        Ok(())
    }

    fn value(&self, k: usize, point: &[f64]) -> f64 {
        point[k].clamp(-self.0, self.0)
    }
}

fn main() -> amplab::Result<()> {
    let n = 1000;
    let mut s = derive_streams(2, 0);
    let u0 = sample_prior(n, &PriorSpec::Rademacher, &mut s.shared)?;
    let x = sample_wigner(n, &EnsembleSpec::gaussian(), &mut s.noise_a)?;
    let op = build_spiked(x, &SpikeSpec::rank_one(2.5), Some(&u0))?;
    let maps: Vec<Clipped> = (0..8).map(|_| Clipped(1.0)).collect();
    let orbit = run_generalized(&op, &maps, &u0, 8)?;
    for (k, u) in orbit.iterates.iter().enumerate() {
        let overlap = u.iter().zip(&u0).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        println!("k = {k}: (1/n)<u^k, u0> = {overlap:+.4}");
    }
    Ok(())
}
