//! Approximate message passing on spiked Wigner matrices.
//!
//! The crate covers the full experimental loop: noise ensembles and priors
//! ([`ensembles`]), coordinate-wise denoisers ([`nonlinearities`]), the
//! generalized and Onsager-corrected AMP recursions ([`amp`]), power-method
//! spectral initialization ([`spectral`]), deterministic state evolution
//! ([`state_evolution`]) and a seeded experiment harness ([`harness`]).
//!
//! ```
//! use amplab::ensembles::{build_spiked, derive_streams, sample_wigner, EnsembleSpec, SpikeSpec};
//! use amplab::amp::run_onsager;
//! use amplab::nonlinearities::Denoiser;
//!
//! let mut streams = derive_streams(7, 0);
//! let x = sample_wigner(200, &EnsembleSpec::gaussian(), &mut streams.noise_a).unwrap();
//! let op = build_spiked(x, &SpikeSpec::none(), None).unwrap();
//! let v0 = vec![1.0; 200];
//! let orbit = run_onsager(&op, &vec![Denoiser::Identity; 3], &v0, 3).unwrap();
//! assert_eq!(orbit.iterates.len(), 4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod amp;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nonlinearities;
pub mod quadrature;
pub mod spectral;
pub mod state_evolution;

pub use error::{Error, Result};
