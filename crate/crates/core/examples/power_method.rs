//! Power iteration against the exact spectrum from the Jacobi oracle: the
//! realized error never exceeds the geometric bound.
//!
//! cargo run --release --example power_method

use amplab::ensembles::{sample_wigner, stream_from_tags, EnsembleSpec};
use amplab::linalg::{jacobi_eigendecomp, SymmetricMatrix};
use amplab::spectral::{power_method_with_oracle, start_vector};

fn main() -> amplab::Result<()> {
    let n = 64;
    let mut rng = stream_from_tags(1, &[]);
    let a = sample_wigner(n, &EnsembleSpec::gaussian(), &mut rng)?;
    let y = SymmetricMatrix::from_upper_fn(n, |i, j| {
        a.get(i, j) / (n as f64).sqrt() + if i == j { 3.0 } else { 0.0 }
    })?;
    let eig = jacobi_eigendecomp(&y, 1e-14)?;
    println!(
        "lambda1 {:.4}, lambda2 {:.4}, reconstruction error {:.2e}",
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.reconstruction_error(&y)
    );
    let y0 = start_vector(n);
    println!("{:>4} {:>12} {:>12}", "d", "error", "bound");
    for d in [1, 10, 40, 160, 640] {
        let (res, err) = power_method_with_oracle(&y, &y0, d, &eig)?;
        println!(
            "{d:>4} {err:>12.3e} {:>12.3e}",
            res.bound.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
