//! Power iteration, the sign-corrected spectral initialization, and the
//! eigenvalue-gap check used to decide whether a spectral start is allowed.

use rand_distr::{Distribution, StandardNormal};

use crate::ensembles::stream_from_tags;
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm2, EigenDecomp, LinearOperator};

/// Margin by which the top eigenvalue must clear `max(|lambda_2|, 1)`.
pub const DEFAULT_GAP_MARGIN: f64 = 0.05;
/// Target accuracy of the automatic power depth.
pub const AUTO_DEPTH_EPSILON: f64 = 1e-6;
pub const AUTO_DEPTH_PREPASS: usize = 50;
pub const MAX_AUTO_DEPTH: usize = 1000;

const RADIUS_ITERATIONS: usize = 30;
const START_SEED: u64 = 0x7374_6172_7476_6563;

#[derive(Clone, Debug)]
pub struct PowerResult {
    /// Unit vector `Y^d y / ||Y^d y||`.
    pub vector: Vec<f64>,
    /// `v^T Y v` for the returned vector.
    pub rayleigh: f64,
    pub iterations_used: usize,
    /// Right-hand side of the power-method error bound, when exact eigendata
    /// was supplied.
    pub bound: Option<f64>,
}

/// `op + shift * I`.
pub struct Shifted<O> {
    pub op: O,
    pub shift: f64,
}

impl<O: LinearOperator> LinearOperator for Shifted<O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.shift * xi;
        }
    }
}

/// `op - lambda v v^T` for a unit vector `v`.
pub struct Deflated<'a, O> {
    pub op: O,
    pub lambda: f64,
    pub vector: &'a [f64],
}

impl<O: LinearOperator> LinearOperator for Deflated<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out);
        let c = self.lambda * self.vector.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        for (o, v) in out.iter_mut().zip(self.vector) {
            *o -= c * v;
        }
    }
}

/// `-op`.
pub struct Negated<O>(pub O);

impl<O: LinearOperator> LinearOperator for Negated<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.apply_into(x, out);
        for o in out.iter_mut() {
            *o = -*o;
        }
    }
}

fn rayleigh(op: &impl LinearOperator, x: &[f64], scratch: &mut [f64]) -> f64 {
    op.apply_into(x, scratch);
    x.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum()
}

/// Fixed pseudo-random unit vector of dimension `n`. It depends only on `n`,
/// never on the data, so it is independent of any signal.
pub fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = stream_from_tags(START_SEED, &[n as u64]);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// `d` steps of `y <- Y y / ||Y y||` from the unit vector `y0`.
pub fn power_method(op: &impl LinearOperator, y0: &[f64], d: usize) -> Result<PowerResult> {
    let n = op.dim();
    check_len(n, y0.len())?;
    if d == 0 {
        return Err(Error::invalid("power method needs at least one iteration"));
    }
    let norm0 = norm2(y0);
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "power method start has norm {norm0}, expected 1"
        )));
    }
    let mut x = y0.to_vec();
    let mut y = vec![0.0; n];
    for it in 0..d {
        op.apply_into(&x, &mut y);
        let norm = norm2(&y);
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(Error::Degenerate(format!(
                "power iterate vanished at step {}; start vector is orthogonal to the nonzero spectrum",
                it + 1
            )));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    let rayleigh = rayleigh(op, &x, &mut y);
    Ok(PowerResult {
        vector: x,
        rayleigh,
        iterations_used: d,
        bound: None,
    })
}

/// `max_{r >= 2} |lambda_r / lambda_1|^d / |<y^1, y0>|` for eigenvalues sorted
/// descending.
pub fn power_bound(eigenvalues: &[f64], overlap: f64, d: usize) -> f64 {
    let l1 = eigenvalues[0];
    let ratio = eigenvalues[1..]
        .iter()
        .map(|l| (l / l1).abs())
        .fold(0.0, f64::max);
    ratio.powi(d as i32) / overlap.abs()
}

/// Power method plus the error bound computed from exact eigendata, and the
/// realized distance to the sign-aligned top eigenvector.
pub fn power_method_with_oracle(
    op: &impl LinearOperator,
    y0: &[f64],
    d: usize,
    eig: &EigenDecomp,
) -> Result<(PowerResult, f64)> {
    let mut res = power_method(op, y0, d)?;
    let top = &eig.eigenvectors[0];
    let overlap: f64 = top.iter().zip(y0).map(|(a, b)| a * b).sum();
    res.bound = Some(power_bound(&eig.eigenvalues, overlap, d));
    let sign = if overlap >= 0.0 { 1.0 } else { -1.0 };
    let distance = res
        .vector
        .iter()
        .zip(top)
        .map(|(v, t)| (v - sign * t).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((res, distance))
}

/// `||op x||` after a short plain power run; approaches the spectral radius
/// from below.
pub fn spectral_radius_estimate(op: &impl LinearOperator, iterations: usize) -> f64 {
    let n = op.dim();
    let mut x = start_vector(n);
    let mut y = vec![0.0; n];
    let mut norm = 0.0;
    for _ in 0..iterations.max(1) {
        op.apply_into(&x, &mut y);
        norm = norm2(&y);
        if norm == 0.0 || !norm.is_finite() {
            return norm;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    norm
}

/// Largest algebraic eigenpair, by power iteration on `op + rho I` where
/// `rho` estimates the spectral radius.
pub fn largest_eigenpair(op: &impl LinearOperator, d: usize) -> Result<(f64, Vec<f64>)> {
    let n = op.dim();
    let rho = spectral_radius_estimate(op, RADIUS_ITERATIONS);
    if rho == 0.0 {
        return Ok((0.0, start_vector(n)));
    }
    let shifted = Shifted { op, shift: rho };
    let res = power_method(&shifted, &start_vector(n), d)?;
    Ok((res.rayleigh - rho, res.vector))
}

#[derive(Clone, Debug)]
pub struct GapCheck {
    pub lambda1: f64,
    pub lambda2_abs: f64,
    pub pass: bool,
    /// Unit approximation of the top eigenvector.
    pub top_vector: Vec<f64>,
}

pub fn gap_check(op: &impl LinearOperator, d: usize, deflation_rounds: usize) -> Result<GapCheck> {
    gap_check_with_margin(op, d, deflation_rounds, DEFAULT_GAP_MARGIN)
}

/// Estimates `lambda_1` and `max_{l >= 2} |lambda_l|` and tests
/// `lambda_1 > max(|lambda_2|, 1) + margin`.
pub fn gap_check_with_margin(
    op: &impl LinearOperator,
    d: usize,
    deflation_rounds: usize,
    margin: f64,
) -> Result<GapCheck> {
    if d == 0 || deflation_rounds == 0 {
        return Err(Error::invalid("gap check needs positive iteration counts"));
    }
    let (lambda1, top_vector) = largest_eigenpair(op, d)?;
    let lambda2_abs = deflated_radius(op, lambda1, &top_vector, deflation_rounds)?;
    Ok(GapCheck {
        lambda1,
        lambda2_abs,
        pass: lambda1 > lambda2_abs.max(1.0) + margin,
        top_vector,
    })
}

fn deflated_radius(
    op: &impl LinearOperator,
    lambda1: f64,
    top: &[f64],
    rounds: usize,
) -> Result<f64> {
    let deflated = Deflated {
        op,
        lambda: lambda1,
        vector: top,
    };
    let (up, _) = largest_eigenpair(&deflated, rounds)?;
    let (down, _) = largest_eigenpair(&Negated(&deflated), rounds)?;
    Ok(up.abs().max(down.abs()))
}

/// `ceil(log(n / eps^2) / log(lambda_1 / |lambda_2|))` from a coarse pre-pass,
/// capped at [`MAX_AUTO_DEPTH`].
pub fn auto_power_depth(op: &impl LinearOperator) -> Result<usize> {
    let (l1, top) = largest_eigenpair(op, AUTO_DEPTH_PREPASS)?;
    let l2 = deflated_radius(op, l1, &top, AUTO_DEPTH_PREPASS)?;
    let n = op.dim() as f64;
    if !(l1 > l2) || l2 <= 0.0 {
        return Ok(if l2 <= 0.0 && l1 > 0.0 {
            1
        } else {
            MAX_AUTO_DEPTH
        });
    }
    let d = ((n / (AUTO_DEPTH_EPSILON * AUTO_DEPTH_EPSILON)).ln() / (l1 / l2).ln()).ceil();
    Ok((d as usize).clamp(1, MAX_AUTO_DEPTH))
}

/// How many power iterations to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerDepth {
    Auto,
    Fixed(usize),
}

impl PowerDepth {
    pub fn resolve(self, op: &impl LinearOperator) -> Result<usize> {
        match self {
            PowerDepth::Auto => auto_power_depth(op),
            PowerDepth::Fixed(0) => Err(Error::invalid("power depth must be at least 1")),
            PowerDepth::Fixed(d) => Ok(d),
        }
    }
}

/// `sign(<psi, u0>) sqrt(n) psi` with `psi` the unit power-method output.
pub fn spectral_init(op: &impl LinearOperator, u0: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = op.dim();
    check_len(n, u0.len())?;
    let res = power_method(op, &start_vector(n), d)?;
    let overlap: f64 = res.vector.iter().zip(u0).map(|(a, b)| a * b).sum();
    if overlap == 0.0 {
        return Err(Error::Degenerate(
            "top eigenvector is orthogonal to the prior vector; sign is undefined".into(),
        ));
    }
    let s = overlap.signum() * (n as f64).sqrt();
    Ok(res.vector.iter().map(|v| s * v).collect())
}
