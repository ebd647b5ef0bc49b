//! Deterministic state-evolution predictions.
//!
//! The rank-one spiked recursion
//!
//! ```text
//! mu_{k+1}      = gamma E[w f_k(mu_k w + sigma_k g)]
//! sigma_{k+1}^2 = E[f_k(mu_k w + sigma_k g)^2]
//! ```
//!
//! started from `mu_0 = sqrt(1 - 1/gamma^2)`, `sigma_0 = 1/gamma`, is
//! evaluated by product quadrature (exact enumeration over finite priors,
//! Gauss–Legendre over the uniform prior, Gauss–Hermite over `g`). Node
//! counts are doubled until two successive rules agree.
//!
//! The general covariance recursion `E V_{a+1} V_{b+1} = E f_a f_b` has a
//! joint dimension that grows with the depth, so it is estimated by seeded
//! Monte Carlo instead.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensembles::{stream_from_tags, PriorSpec};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, LowerTriangular, SymmetricMatrix, CHOLESKY_JITTER};
use crate::nonlinearities::{CoordinateMap, Denoiser, PairFunction, TestFunction};
use crate::quadrature::{gauss_hermite, gauss_legendre, MAX_HERMITE_NODES};

/// Two successive quadrature refinements must agree to this.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Refinement stops early once successive rules agree to this.
const QUADRATURE_TARGET: f64 = 1e-11;
/// Fallback jitter for marginally indefinite Monte Carlo covariances.
pub const COVARIANCE_JITTER: f64 = 1e-10;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const LEVEL_TAG: u64 = 0x0053_454c_4556_454c;
const EXPECT_TAG: u64 = 0x5345_4558_5045_4354;
/// `g` beyond this magnitude carries Gaussian mass below 1e-31.
const KINK_RANGE: f64 = 12.0;
const PANEL_NODES: usize = 8;
const PANEL_LEVELS: u32 = 4;

fn default_hermite() -> usize {
    61
}
fn default_legendre() -> usize {
    64
}
fn default_mc_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_hermite")]
    pub gauss_hermite_nodes: usize,
    #[serde(default = "default_legendre")]
    pub gauss_legendre_nodes: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            gauss_hermite_nodes: default_hermite(),
            gauss_legendre_nodes: default_legendre(),
            mc_samples: default_mc_samples(),
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gauss_hermite_nodes < 2 || self.gauss_legendre_nodes < 2 {
            return Err(Error::invalid("quadrature node counts must be at least 2"));
        }
        if self.gauss_hermite_nodes > MAX_HERMITE_NODES {
            return Err(Error::invalid(format!(
                "at most {MAX_HERMITE_NODES} Gauss-Hermite nodes are supported"
            )));
        }
        if self.mc_samples < 10_000 {
            return Err(Error::invalid("mc_samples must be at least 10^4"));
        }
        Ok(())
    }
}

/// Rule for `E h(w)` under the prior.
fn prior_rule(prior: &PriorSpec, legendre: usize, hermite: usize) -> Result<Vec<(f64, f64)>> {
    if let Some(atoms) = prior.atoms() {
        return Ok(atoms);
    }
    match prior {
        PriorSpec::UniformSqrt3 => Ok(gauss_legendre(legendre)?
            .into_iter()
            .map(|(t, w)| (SQRT3 * t, 0.5 * w))
            .collect()),
        PriorSpec::Gaussian => gauss_hermite(hermite),
        _ => unreachable!("finite priors handled above"),
    }
}

/// Doubles the resolution `levels` times, stopping once two successive
/// values agree.
fn refine(
    levels: u32,
    what: impl Fn(u32) -> String,
    eval: impl Fn(u32) -> Result<f64>,
) -> Result<f64> {
    let mut prev = eval(0)?;
    for level in 1..=levels {
        let next = eval(level)?;
        let diff = (next - prev).abs();
        if diff <= QUADRATURE_TARGET || (diff <= QUADRATURE_TOLERANCE && level == levels) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!(
        "no agreement to {QUADRATURE_TOLERANCE:e} by {}",
        what(levels)
    )))
}

fn hermite_levels(start: usize) -> u32 {
    let mut levels = 0;
    while start << (levels + 1) <= MAX_HERMITE_NODES {
        levels += 1;
    }
    levels
}

/// `E h(w, g)` with `w` from the prior and independent `g ~ N(0, 1)`,
/// refining both rules until successive values agree.
pub fn expect_signal_noise(
    prior: &PriorSpec,
    quad: &QuadratureSpec,
    h: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    prior.validate()?;
    quad.validate()?;
    let (gh, gl) = (quad.gauss_hermite_nodes, quad.gauss_legendre_nodes);
    refine(
        hermite_levels(gh),
        |l| format!("{} Gauss-Hermite nodes", gh << l),
        |l| {
            let g_rule = gauss_hermite(gh << l)?;
            let w_rule = prior_rule(prior, gl << l, gh << l)?;
            let mut total = 0.0;
            for &(w, pw) in &w_rule {
                let inner: f64 = g_rule.iter().map(|&(g, pg)| pg * h(w, g)).sum();
                total += pw * inner;
            }
            Ok(total)
        },
    )
}

/// [`expect_signal_noise`] for integrands that are only piecewise smooth in
/// `g`, with the breaks at `breaks(w)`. The `g` integral runs over
/// `[-KINK_RANGE, KINK_RANGE]`, cut at the breaks and on a unit grid, with
/// Gauss–Legendre on every piece.
pub fn expect_signal_noise_split(
    prior: &PriorSpec,
    quad: &QuadratureSpec,
    h: impl Fn(f64, f64) -> f64,
    breaks: impl Fn(f64) -> Vec<f64>,
) -> Result<f64> {
    prior.validate()?;
    quad.validate()?;
    let (gh, gl) = (quad.gauss_hermite_nodes, quad.gauss_legendre_nodes);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    refine(
        PANEL_LEVELS,
        |l| format!("{} Gauss-Legendre nodes per panel", PANEL_NODES << l),
        |l| {
            let panel_rule = gauss_legendre(PANEL_NODES << l)?;
            let w_rule = prior_rule(prior, gl << l, gh)?;
            let mut total = 0.0;
            for &(w, pw) in &w_rule {
                let mut edges: Vec<f64> = (-KINK_RANGE as i32..=KINK_RANGE as i32)
                    .map(f64::from)
                    .collect();
                edges.extend(breaks(w).into_iter().filter(|b| b.abs() < KINK_RANGE));
                edges.sort_by(f64::total_cmp);
                let mut inner = 0.0;
                for e in edges.windows(2) {
                    let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
                    if half <= 0.0 {
                        continue;
                    }
                    for &(t, pt) in &panel_rule {
                        let g = mid + half * t;
                        inner += half * pt * (-0.5 * g * g).exp() * h(w, g);
                    }
                }
                total += pw * norm * inner;
            }
            Ok(total)
        },
    )
}

/// State-evolution scalars `(mu_k, sigma_k)` for `k = 0..=K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SEParams {
    pub gamma: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SEParams {
    pub fn depth(&self) -> usize {
        self.mu.len() - 1
    }

    /// `tanh(a_k x)` with `a_k = mu_k / sigma_k^2`, the posterior mean of a
    /// Rademacher `w` observed as `mu_k w + sigma_k g`.
    pub fn bayes_denoiser(&self) -> Denoiser {
        Denoiser::ScaledTanh {
            scales: self
                .mu
                .iter()
                .zip(&self.sigma)
                .map(|(m, s)| m / (s * s))
                .collect(),
        }
    }
}

/// Denoiser family driving [`se_spiked`].
#[derive(Clone, Copy, Debug)]
pub enum SeSchedule<'a> {
    /// `tanh(mu_k / sigma_k^2 x)`, rebuilt from the recursion as it runs.
    Bayes,
    Fixed(&'a Denoiser),
}

fn scalar_map(f: &Denoiser, k: usize) -> Result<impl Fn(f64) -> f64 + '_> {
    f.check(k)?;
    if !f.is_single_argument(k) {
        return Err(Error::invalid(format!(
            "scalar state evolution needs f_{k} to depend on x_{k} only"
        )));
    }
    Ok(move |y: f64| {
        let mut point = vec![0.0; k + 1];
        point[k] = y;
        f.value(k, &point)
    })
}

/// One step of the spiked recursion with the scalar map `f`, which is
/// smooth and slowly varying away from the points `breakpoints`.
pub fn se_step(
    gamma: f64,
    prior: &PriorSpec,
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    mu: f64,
    sigma: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let expect = |h: &dyn Fn(f64, f64) -> f64| {
        if breakpoints.is_empty() {
            expect_signal_noise(prior, quad, h)
        } else {
            let breaks = |w: f64| breakpoints.iter().map(|y| (y - mu * w) / sigma).collect();
            expect_signal_noise_split(prior, quad, h, breaks)
        }
    };
    let m = gamma * expect(&|w, g| w * f(mu * w + sigma * g))?;
    let s2 = expect(&|w, g| f(mu * w + sigma * g).powi(2))?;
    Ok((m, s2.max(0.0).sqrt()))
}

pub fn se_spiked(
    gamma: f64,
    prior: &PriorSpec,
    schedule: SeSchedule<'_>,
    iterations: usize,
    quad: &QuadratureSpec,
) -> Result<SEParams> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "spiked state evolution needs gamma > 1, got {gamma}"
        )));
    }
    let mut mu = vec![(1.0 - 1.0 / (gamma * gamma)).sqrt()];
    let mut sigma = vec![1.0 / gamma];
    for k in 0..iterations {
        let (m, s) = (mu[k], sigma[k]);
        let (m1, s1) = match schedule {
            SeSchedule::Bayes => {
                let a = m / (s * s);
                se_step(gamma, prior, |y| (a * y).tanh(), &[0.0], m, s, quad)?
            }
            SeSchedule::Fixed(f) => se_step(
                gamma,
                prior,
                scalar_map(f, k)?,
                &f.breakpoints(k),
                m,
                s,
                quad,
            )?,
        };
        if !(s1 > 0.0) {
            return Err(Error::Degenerate(format!(
                "sigma_{} vanished; the denoiser output is identically zero",
                k + 1
            )));
        }
        mu.push(m1);
        sigma.push(s1);
    }
    Ok(SEParams { gamma, mu, sigma })
}

/// `E phi(w, mu_k w + sigma_k g)`.
pub fn se_predict_phi(
    pair: PairFunction,
    k: usize,
    se: &SEParams,
    prior: &PriorSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if k > se.depth() {
        return Err(Error::invalid(format!(
            "iteration {k} beyond state evolution depth {}",
            se.depth()
        )));
    }
    if let PairFunction::Constant(c) = pair {
        return Ok(c);
    }
    let (m, s) = (se.mu[k], se.sigma[k]);
    expect_signal_noise(prior, quad, |w, g| pair.eval(w, m * w + s * g))
}

/// Covariance of `(V_1, ..., V_K)` from the Gaussian recursion, with Monte
/// Carlo standard errors for each entry.
#[derive(Clone, Debug)]
pub struct SECovariance {
    pub sigma_matrix: SymmetricMatrix,
    pub standard_errors: SymmetricMatrix,
}

impl SECovariance {
    pub fn depth(&self) -> usize {
        self.sigma_matrix.n()
    }

    /// Covariance of `(V_1, ..., V_k)`.
    pub fn leading(&self, k: usize) -> Result<SymmetricMatrix> {
        if k == 0 || k > self.depth() {
            return Err(Error::invalid(format!("leading block {k} out of range")));
        }
        SymmetricMatrix::from_upper_fn(k, |i, j| self.sigma_matrix.get(i, j))
    }
}

fn factor_with_fallback(s: &SymmetricMatrix) -> Result<LowerTriangular> {
    cholesky(s, CHOLESKY_JITTER).or_else(|_| cholesky(s, COVARIANCE_JITTER))
}

/// Draws `(U_0, V_1, ..., V_k)` into `point` with `V = L z`.
fn draw_point(
    prior: &PriorSpec,
    factor: Option<&LowerTriangular>,
    rng: &mut crate::ensembles::Stream,
    z: &mut [f64],
    point: &mut [f64],
) {
    point[0] = prior.sample_one(rng);
    if let Some(l) = factor {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        l.mul_into(z, &mut point[1..]);
    }
}

/// Level-by-level Monte Carlo for `Sigma_{a+1,b+1} = E f_a(V_a..V_0) f_b(V_b..V_0)`
/// with `V_0 = U_0` drawn from the prior and `(V_1, ..., V_k)` jointly
/// Gaussian, independent of `U_0`.
pub fn se_covariance(
    f: &[Denoiser],
    prior: &PriorSpec,
    depth: usize,
    quad: &QuadratureSpec,
) -> Result<SECovariance> {
    if depth == 0 {
        return Err(Error::invalid("covariance recursion needs K >= 1"));
    }
    if f.len() < depth {
        return Err(Error::invalid(format!(
            "need {depth} denoisers, got {}",
            f.len()
        )));
    }
    quad.validate()?;
    prior.validate()?;
    for (k, fk) in f.iter().enumerate().take(depth) {
        fk.check(k)?;
    }
    let samples = quad.mc_samples;
    let mut sigma = SymmetricMatrix::zeros(depth)?;
    let mut errors = SymmetricMatrix::zeros(depth)?;
    for k in 0..depth {
        let factor = if k == 0 {
            None
        } else {
            let lead = SymmetricMatrix::from_upper_fn(k, |i, j| sigma.get(i, j))?;
            Some(factor_with_fallback(&lead)?)
        };
        let mut rng = stream_from_tags(quad.seed, &[LEVEL_TAG, k as u64]);
        let mut z = vec![0.0; k];
        let mut point = vec![0.0; k + 1];
        let mut outputs = vec![0.0; k + 1];
        let mut sums = vec![0.0; k + 1];
        let mut squares = vec![0.0; k + 1];
        for _ in 0..samples {
            draw_point(prior, factor.as_ref(), &mut rng, &mut z, &mut point);
            for (b, o) in outputs.iter_mut().enumerate() {
                *o = f[b].value(b, &point[..=b]);
            }
            let fk = outputs[k];
            for b in 0..=k {
                let prod = fk * outputs[b];
                sums[b] += prod;
                squares[b] += prod * prod;
            }
        }
        let m = samples as f64;
        for b in 0..=k {
            let mean = sums[b] / m;
            let var = (squares[b] / m - mean * mean).max(0.0) * m / (m - 1.0);
            sigma.set(k, b, mean);
            errors.set(k, b, (var / m).sqrt());
        }
    }
    factor_with_fallback(&sigma)?;
    Ok(SECovariance {
        sigma_matrix: sigma,
        standard_errors: errors,
    })
}

/// Monte Carlo `E phi(V_0, ..., V_k)` under the covariance recursion, with
/// its standard error. `V_0 = U_0` comes from the prior.
pub fn se_covariance_expectation(
    cov: &SECovariance,
    prior: &PriorSpec,
    phi: &TestFunction,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    phi.validate()?;
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if let TestFunction::SePair {
        pair: PairFunction::Constant(c),
    } = phi
    {
        return Ok((*c, 0.0));
    }
    let factor = if k == 0 {
        None
    } else {
        Some(factor_with_fallback(&cov.leading(k)?)?)
    };
    let mut rng = stream_from_tags(seed, &[EXPECT_TAG, k as u64]);
    let mut z = vec![0.0; k];
    let mut point = vec![0.0; k + 1];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        draw_point(prior, factor.as_ref(), &mut rng, &mut z, &mut point);
        let v = phi.value(&point);
        s += v;
        s2 += v * v;
    }
    let m = samples as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}
