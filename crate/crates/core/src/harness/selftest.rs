//! Fast oracle checks behind the `selftest` subcommand.

use rand::Rng;
use rand_distr::StandardNormal;

use super::stats::fit_decay;
use crate::amp::{
    onsager_coeffs, run_generalized, run_onsager, run_onsager_with_coeffs, ThreePhaseEmbedding,
};
use crate::ensembles::{
    build_spiked, sample_wigner, stream_from_tags, EnsembleSpec, PriorSpec, SpikeSpec,
};
use crate::error::Result;
use crate::linalg::{cholesky, jacobi_eigendecomp, SymmetricMatrix};
use crate::nonlinearities::{fd_partial, Denoiser};
use crate::quadrature::gauss_hermite;
use crate::spectral::power_method_with_oracle;
use crate::state_evolution::{se_spiked, QuadratureSpec, SeSchedule};

/// Outcome of one check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((pass, detail)) => CheckResult { name, pass, detail },
        Err(e) => CheckResult {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        check("jacobi_reconstruction", || {
            let mut rng = stream_from_tags(1, &[]);
            let m = SymmetricMatrix::from_upper_fn(24, |_, _| rng.sample(StandardNormal))?;
            let e = jacobi_eigendecomp(&m, 1e-14)?;
            let rec = e.reconstruction_error(&m) / m.frobenius_norm();
            let orth = e.orthonormality_defect();
            Ok((
                rec <= 1e-9 && orth <= 1e-10,
                format!("reconstruction {rec:.2e}, orthonormality {orth:.2e}"),
            ))
        }),
        check("power_bound_diag_3_1_2", || {
            let y = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0])?;
            let y0 = vec![1.0 / 3f64.sqrt(); 3];
            let e = jacobi_eigendecomp(&y, 1e-14)?;
            let (_, lhs) = power_method_with_oracle(&y, &y0, 10, &e)?;
            let rhs = 3f64.sqrt() * (2.0f64 / 3.0).powi(10);
            Ok((
                lhs <= rhs + 1e-12,
                format!("distance {lhs:.3e} <= {rhs:.3e}"),
            ))
        }),
        check("gauss_hermite_moments", || {
            let rule = gauss_hermite(61)?;
            let m4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
            Ok(((m4 - 3.0).abs() < 1e-11, format!("E g^4 = {m4}")))
        }),
        check("cholesky_gram", || {
            let s = SymmetricMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]])?;
            let l = cholesky(&s, 0.0)?;
            let g = l.gram();
            let err = (g[0][0] - 4.0).abs() + (g[0][1] - 2.0).abs() + (g[1][1] - 3.0).abs();
            Ok((err < 1e-14, format!("gram error {err:.1e}")))
        }),
        check("onsager_coefficients_vs_finite_differences", || {
            let mut rng = stream_from_tags(2, &[]);
            let history: Vec<Vec<f64>> = (0..4)
                .map(|_| {
                    (0..50)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let denoisers = [
                Denoiser::Identity,
                Denoiser::ScaledTanh {
                    scales: vec![0.7, 1.3, 2.1, 0.4],
                },
                Denoiser::LinearCombo {
                    weights: vec![
                        vec![1.0],
                        vec![0.5, -1.0],
                        vec![0.2, 0.3, 0.4],
                        vec![1.0, 0.0, -2.0, 0.5],
                    ],
                    offset: 0.1,
                },
            ];
            let mut worst: f64 = 0.0;
            for f in &denoisers {
                let b = onsager_coeffs(f, 3, &history)?;
                for j in 1..=3 {
                    let fd = fd_partial(f, 3, j, &history, 1e-5)?;
                    let avg = fd.iter().sum::<f64>() / fd.len() as f64;
                    worst = worst.max((avg - b[j - 1]).abs());
                }
            }
            Ok((worst <= 1e-6, format!("max deviation {worst:.2e}")))
        }),
        check("state_evolution_identity_step", || {
            let se = se_spiked(
                2.0,
                &PriorSpec::Rademacher,
                SeSchedule::Fixed(&Denoiser::Identity),
                1,
                &QuadratureSpec::default(),
            )?;
            let err = (se.mu[1] - 3f64.sqrt()).abs() + (se.sigma[1] - 1.0).abs();
            Ok((
                err < 1e-10,
                format!("mu_1 = {}, sigma_1 = {}", se.mu[1], se.sigma[1]),
            ))
        }),
        check("three_phase_embedding", || {
            let n = 30;
            let mut rng = stream_from_tags(3, &[]);
            let x = sample_wigner(n, &EnsembleSpec::gaussian(), &mut rng)?;
            let op = build_spiked(x, &SpikeSpec::none(), None)?;
            let f = vec![
                Denoiser::ScaledTanh {
                    scales: vec![1.1, 0.8, 1.5]
                };
                3
            ];
            let v0: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let reference = run_onsager(&op, &f, &v0, 3)?;
            let coeffs = reference.onsager_log.clone();
            let injected = run_onsager_with_coeffs(&op, &f, &v0, 3, &coeffs)?;
            let emb = ThreePhaseEmbedding {
                denoisers: f,
                coeffs,
            };
            let gen = run_generalized(&op, &emb.maps(3), &v0, 9)?;
            let mut worst: f64 = 0.0;
            for l in 0..=3 {
                for (a, b) in gen.iterates[3 * l].iter().zip(&injected.iterates[l]) {
                    worst = worst.max((a - b).abs());
                }
            }
            Ok((worst <= 1e-9, format!("max deviation {worst:.2e}")))
        }),
        check("fit_decay_power_law", || {
            let s = fit_decay(&[(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)])?;
            Ok(((s + 1.0).abs() < 1e-12, format!("slope {s}")))
        }),
    ]
}
