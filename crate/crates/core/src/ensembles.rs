//! Seeded noise matrices, prior vectors, spike specifications and the lazy
//! spiked operator `X / sqrt(n) + sum_l (gamma_l / n) z^l (z^l)^T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{LinearOperator, SymmetricMatrix};

/// The generator behind every random stream.
pub type Stream = ChaCha8Rng;

const SQRT3: f64 = 1.732_050_807_568_877_2;

const ROLE_SHARED: u64 = 0x5348_4152_4544; // "SHARED"
const ROLE_NOISE_A: u64 = 0x4e4f_4953_4541; // "NOISEA"
const ROLE_NOISE_G: u64 = 0x4e4f_4953_4547; // "NOISEG"

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed obtained by chaining [`mix64`] over `tags`, starting from `master_seed`.
pub fn derive_seed(master_seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(mix64(master_seed), |acc, &tag| mix64(acc ^ mix64(tag)))
}

pub fn stream_from_tags(master_seed: u64, tags: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master_seed, tags))
}

/// The three independent random streams of one trial.
///
/// `shared` feeds the prior vector and spike data; the noise streams feed the
/// non-Gaussian matrix `A` and the Gaussian matrix `G` and never touch
/// `shared`.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    pub shared: Stream,
    pub noise_a: Stream,
    pub noise_g: Stream,
}

impl TrialStreams {
    /// Exchanges the roles of the two noise streams.
    pub fn swap_noise(self) -> Self {
        Self {
            shared: self.shared,
            noise_a: self.noise_g,
            noise_g: self.noise_a,
        }
    }
}

pub fn derive_streams(master_seed: u64, trial_index: u64) -> TrialStreams {
    TrialStreams {
        shared: stream_from_tags(master_seed, &[trial_index, ROLE_SHARED]),
        noise_a: stream_from_tags(master_seed, &[trial_index, ROLE_NOISE_A]),
        noise_g: stream_from_tags(master_seed, &[trial_index, ROLE_NOISE_G]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// `(B - p) / sqrt(p (1 - p))` with `B ~ Bernoulli(p)`.
    CenteredBernoulli,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    #[default]
    SameLaw,
    Zero,
}

/// Law of the upper-triangular entries of a Wigner noise matrix. Every kind
/// has mean 0 and variance 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    /// Success probability for `centered_bernoulli`; ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default)]
    pub diagonal_policy: DiagonalPolicy,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind) -> Self {
        Self {
            kind,
            param: None,
            diagonal_policy: DiagonalPolicy::SameLaw,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(EnsembleKind::Gaussian)
    }

    pub fn centered_bernoulli(p: f64) -> Self {
        Self {
            param: Some(p),
            ..Self::new(EnsembleKind::CenteredBernoulli)
        }
    }

    pub fn with_diagonal(mut self, policy: DiagonalPolicy) -> Self {
        self.diagonal_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == EnsembleKind::CenteredBernoulli {
            match self.param {
                Some(p) if p > 0.0 && p < 1.0 => {}
                other => {
                    return Err(Error::invalid(format!(
                        "centered_bernoulli needs param p in (0, 1), got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    fn sampler(&self) -> Result<impl Fn(&mut Stream) -> f64> {
        self.validate()?;
        let kind = self.kind;
        let p = self.param.unwrap_or(0.5);
        let hi = (1.0 - p) / (p * (1.0 - p)).sqrt();
        let lo = -p / (p * (1.0 - p)).sqrt();
        Ok(move |rng: &mut Stream| match kind {
            EnsembleKind::Gaussian => rng.sample(StandardNormal),
            EnsembleKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EnsembleKind::Uniform => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            EnsembleKind::CenteredBernoulli => {
                if rng.random::<f64>() < p {
                    hi
                } else {
                    lo
                }
            }
        })
    }
}

/// Samples a symmetric noise matrix with i.i.d. upper-triangular entries,
/// filled row by row.
pub fn sample_wigner(n: usize, ens: &EnsembleSpec, rng: &mut Stream) -> Result<SymmetricMatrix> {
    let draw = ens.sampler()?;
    let zero_diag = ens.diagonal_policy == DiagonalPolicy::Zero;
    SymmetricMatrix::from_upper_fn(n, |i, j| if i == j && zero_diag { 0.0 } else { draw(rng) })
}

/// Law of the signal coordinates `u0_i`: centered with unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Rademacher,
    UniformSqrt3,
    ThreePoint {
        values: [f64; 3],
        probabilities: [f64; 3],
    },
    /// Standard normal. Not compactly supported; used where the state
    /// evolution covariance recursion wants a Gaussian `V_0`.
    Gaussian,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if let PriorSpec::ThreePoint {
            values,
            probabilities,
        } = self
        {
            if probabilities.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::invalid(
                    "three_point probabilities must be nonnegative",
                ));
            }
            let total: f64 = probabilities.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "three_point probabilities sum to {total}, not 1"
                )));
            }
            let mean: f64 = values.iter().zip(probabilities).map(|(v, p)| v * p).sum();
            let var: f64 = values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * (v - mean).powi(2))
                .sum();
            if mean.abs() > 1e-9 || (var - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "three_point prior has mean {mean} and variance {var}; need 0 and 1"
                )));
            }
        }
        Ok(())
    }

    /// Atoms `(value, probability)` for finitely supported priors.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            PriorSpec::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            PriorSpec::ThreePoint {
                values,
                probabilities,
            } => Some(
                values
                    .iter()
                    .copied()
                    .zip(probabilities.iter().copied())
                    .filter(|&(_, p)| p > 0.0)
                    .collect(),
            ),
            PriorSpec::UniformSqrt3 | PriorSpec::Gaussian => None,
        }
    }

    pub fn sample_one(&self, rng: &mut Stream) -> f64 {
        match self {
            PriorSpec::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            PriorSpec::UniformSqrt3 => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            PriorSpec::ThreePoint {
                values,
                probabilities,
            } => {
                let u: f64 = rng.random();
                if u < probabilities[0] {
                    values[0]
                } else if u < probabilities[0] + probabilities[1] {
                    values[1]
                } else {
                    values[2]
                }
            }
            PriorSpec::Gaussian => rng.sample(StandardNormal),
        }
    }
}

pub fn sample_prior(n: usize, prior: &PriorSpec, rng: &mut Stream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("prior dimension must be at least 1"));
    }
    prior.validate()?;
    Ok((0..n).map(|_| prior.sample_one(rng)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeSource {
    /// Use the prior vector `u0` of the trial.
    PriorVector,
    /// A fixed vector with `||z||_2 = sqrt(n)`.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeComponent {
    pub gamma: f64,
    #[serde(default = "default_source")]
    pub source: SpikeSource,
}

fn default_source() -> SpikeSource {
    SpikeSource::PriorVector
}

/// Low-rank signal `Z = sum_l gamma_l z^l (z^l)^T`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub components: Vec<SpikeComponent>,
}

impl SpikeSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// `Z = gamma u0 u0^T`.
    pub fn rank_one(gamma: f64) -> Self {
        Self {
            components: vec![SpikeComponent {
                gamma,
                source: SpikeSource::PriorVector,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.gamma >= 0.0) || !c.gamma.is_finite() {
                return Err(Error::invalid(format!(
                    "spike gamma must be >= 0, got {}",
                    c.gamma
                )));
            }
            if let SpikeSource::Explicit(z) = &c.source {
                let target = (z.len() as f64).sqrt();
                let norm = crate::linalg::norm2(z);
                if (norm - target).abs() > 1e-8 * target {
                    return Err(Error::invalid(format!(
                        "explicit spike vector has norm {norm}, expected sqrt(n) = {target}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `X / sqrt(n) + sum_l (gamma_l / n) z^l (z^l)^T`, applied without forming
/// the low-rank part.
#[derive(Clone, Debug)]
pub struct SpikedOperator {
    noise: SymmetricMatrix,
    noise_scale: f64,
    spikes: Vec<(f64, Vec<f64>)>,
}

impl SpikedOperator {
    pub fn noise(&self) -> &SymmetricMatrix {
        &self.noise
    }

    pub fn spikes(&self) -> &[(f64, Vec<f64>)] {
        &self.spikes
    }

    pub fn into_noise(self) -> SymmetricMatrix {
        self.noise
    }

    /// Dense materialization, for checks at small `n`.
    pub fn to_dense(&self) -> SymmetricMatrix {
        let n = self.noise.n() as f64;
        SymmetricMatrix::from_upper_fn(self.noise.n(), |i, j| {
            let mut v = self.noise_scale * self.noise.get(i, j);
            for (gamma, z) in &self.spikes {
                v += gamma / n * z[i] * z[j];
            }
            v
        })
        .expect("dimension already validated")
    }
}

impl LinearOperator for SpikedOperator {
    fn dim(&self) -> usize {
        self.noise.n()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.noise.apply_into(x, out);
        let n = self.noise.n() as f64;
        for v in out.iter_mut() {
            *v *= self.noise_scale;
        }
        for (gamma, z) in &self.spikes {
            let c = gamma / n * z.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            for (o, zi) in out.iter_mut().zip(z) {
                *o += c * zi;
            }
        }
    }
}

pub fn build_spiked(
    x: SymmetricMatrix,
    spike: &SpikeSpec,
    prior_vector: Option<&[f64]>,
) -> Result<SpikedOperator> {
    spike.validate()?;
    let n = x.n();
    let mut spikes = Vec::with_capacity(spike.components.len());
    for c in &spike.components {
        let z = match &c.source {
            SpikeSource::PriorVector => prior_vector
                .ok_or_else(|| Error::invalid("spike uses the prior vector but none was supplied"))?
                .to_vec(),
            SpikeSource::Explicit(z) => z.clone(),
        };
        check_len(n, z.len())?;
        spikes.push((c.gamma, z));
    }
    Ok(SpikedOperator {
        noise_scale: 1.0 / (n as f64).sqrt(),
        noise: x,
        spikes,
    })
}
