//! AMP orbits: the generalized recursion, the Onsager-corrected recursion
//! and its spectrally initialized variant, plus orbit averages.

use crate::ensembles::SpikedOperator;
use crate::error::{check_len, Error, Result};
use crate::linalg::LinearOperator;
use crate::nonlinearities::{eval_rows, CoordinateMap, Denoiser, PairFunction, TestFunction};
use crate::spectral::{
    gap_check_with_margin, spectral_init, GapCheck, PowerDepth, DEFAULT_GAP_MARGIN,
};

/// Any coordinate above this magnitude aborts a run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct AmpOrbit {
    /// `iterates[k]` is the `k`-th iterate; `iterates[0]` is the initialization.
    pub iterates: Vec<Vec<f64>>,
    /// `onsager_log[k]` holds `(b_{k,1}, ..., b_{k,k})`. Empty for generalized runs.
    pub onsager_log: Vec<Vec<f64>>,
}

impl AmpOrbit {
    pub fn n(&self) -> usize {
        self.iterates[0].len()
    }

    /// Index of the last iterate.
    pub fn last_iteration(&self) -> usize {
        self.iterates.len() - 1
    }
}

impl<T: CoordinateMap + ?Sized> CoordinateMap for &T {
    fn check(&self, k: usize) -> Result<()> {
        (**self).check(k)
    }

    fn value(&self, k: usize, point: &[f64]) -> f64 {
        (**self).value(k, point)
    }
}

fn check_finite(v: &[f64], iteration: usize) -> Result<()> {
    if v.iter()
        .all(|x| x.is_finite() && x.abs() <= DIVERGENCE_THRESHOLD)
    {
        Ok(())
    } else {
        Err(Error::Divergence { iteration })
    }
}

fn check_run_args(
    op: &impl LinearOperator,
    n_maps: usize,
    init: &[f64],
    iterations: usize,
) -> Result<()> {
    check_len(op.dim(), init.len())?;
    if n_maps < iterations {
        return Err(Error::invalid(format!(
            "{iterations} iterations need {iterations} maps, got {n_maps}"
        )));
    }
    check_finite(init, 0)
}

/// `u^{k+1}_i = F_k((X u^k)_i, u^{k-1}_i, ..., u^0_i)`.
///
/// `maps[k]` is evaluated at iteration `k` on the point
/// `(u^0_i, ..., u^{k-1}_i, (X u^k)_i)`: the newest slot holds the operator
/// output and `u^k` itself is not passed.
pub fn run_generalized<F: CoordinateMap>(
    op: &impl LinearOperator,
    maps: &[F],
    u0: &[f64],
    iterations: usize,
) -> Result<AmpOrbit> {
    check_run_args(op, maps.len(), u0, iterations)?;
    let n = u0.len();
    let mut iterates = vec![u0.to_vec()];
    let mut applied = vec![0.0; n];
    let mut point = Vec::with_capacity(iterations + 1);
    for k in 0..iterations {
        let f = &maps[k];
        f.check(k)?;
        op.apply_into(&iterates[k], &mut applied);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                point.clear();
                point.extend(iterates[..k].iter().map(|u| u[i]));
                point.push(applied[i]);
                f.value(k, &point)
            })
            .collect();
        check_finite(&next, k + 1)?;
        iterates.push(next);
    }
    Ok(AmpOrbit {
        iterates,
        onsager_log: Vec::new(),
    })
}

/// `b_{k,j} = (1/n) sum_i df_k/dv^{[j]}` for `j = 1..=k`. Empty at `k = 0`.
pub fn onsager_coeffs(f_k: &Denoiser, k: usize, history: &[Vec<f64>]) -> Result<Vec<f64>> {
    (1..=k)
        .map(|j| {
            let d = f_k.partial(k, j, history)?;
            Ok(d.iter().sum::<f64>() / d.len() as f64)
        })
        .collect()
}

/// `memory`, when present, stands in for `f_{-1}` and is subtracted at the
/// first step with coefficient `(1/n) sum_i df_0/dv^{[0]}_i`.
fn onsager_loop(
    op: &impl LinearOperator,
    f: &[Denoiser],
    v0: &[f64],
    iterations: usize,
    memory: Option<&[f64]>,
    mut coeffs: impl FnMut(usize, &[Vec<f64>]) -> Result<Vec<f64>>,
) -> Result<AmpOrbit> {
    check_run_args(op, f.len(), v0, iterations)?;
    let n = v0.len();
    let mut iterates = vec![v0.to_vec()];
    let mut onsager_log = Vec::with_capacity(iterations);
    // outputs[j] = f_j(v^j, ..., v^0)
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let fk = f[k].eval(k, &iterates)?;
        let b = coeffs(k, &iterates)?;
        if b.len() != k {
            return Err(Error::invalid(format!(
                "iteration {k} needs {k} Onsager coefficients, got {}",
                b.len()
            )));
        }
        let mut next = vec![0.0; n];
        op.apply_into(&fk, &mut next);
        for (j, bj) in (1..=k).zip(&b) {
            for (x, prev) in next.iter_mut().zip(&outputs[j - 1]) {
                *x -= bj * prev;
            }
        }
        if let (0, Some(mem)) = (k, memory) {
            let d = f[0].partial(0, 0, &iterates)?;
            let b0 = d.iter().sum::<f64>() / n as f64;
            for (x, m) in next.iter_mut().zip(mem) {
                *x -= b0 * m;
            }
        }
        check_finite(&next, k + 1)?;
        outputs.push(fk);
        onsager_log.push(b);
        iterates.push(next);
    }
    Ok(AmpOrbit {
        iterates,
        onsager_log,
    })
}

/// `v^{k+1} = X f_k(v^k, ..., v^0) - sum_{j=1}^k b_{k,j} f_{j-1}(v^{j-1}, ..., v^0)`
/// with `b_{k,j}` the empirical average of the analytic partials.
pub fn run_onsager(
    op: &impl LinearOperator,
    f: &[Denoiser],
    v0: &[f64],
    iterations: usize,
) -> Result<AmpOrbit> {
    onsager_loop(op, f, v0, iterations, None, |k, hist| {
        onsager_coeffs(&f[k], k, hist)
    })
}

/// [`run_onsager`] started at an eigenvector `psi` of the spiked operator
/// with SNR `gamma`, taking `f_{-1} = psi / gamma`.
///
/// `psi` is the fixed point of the linear recursion with `f(x) = x / gamma`
/// exactly when its eigenvalue is `gamma + 1/gamma`, so the first step
/// carries the memory term of that recursion:
/// `v^{[1]} = X f_0(psi) - b_{0,0} psi / gamma`.
pub fn run_onsager_from_eigenvector(
    op: &impl LinearOperator,
    f: &[Denoiser],
    psi: &[f64],
    iterations: usize,
    gamma: f64,
) -> Result<AmpOrbit> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "eigenvector memory needs gamma > 0, got {gamma}"
        )));
    }
    let memory: Vec<f64> = psi.iter().map(|x| x / gamma).collect();
    onsager_loop(op, f, psi, iterations, Some(&memory), |k, hist| {
        onsager_coeffs(&f[k], k, hist)
    })
}

/// [`run_onsager`] with externally supplied coefficients: `coeffs[k]` holds
/// `(b_{k,1}, ..., b_{k,k})`.
pub fn run_onsager_with_coeffs(
    op: &impl LinearOperator,
    f: &[Denoiser],
    v0: &[f64],
    iterations: usize,
    coeffs: &[Vec<f64>],
) -> Result<AmpOrbit> {
    if coeffs.len() < iterations {
        return Err(Error::invalid("missing Onsager coefficients"));
    }
    onsager_loop(op, f, v0, iterations, None, |k, _| Ok(coeffs[k].clone()))
}

/// Writes an Onsager orbit with fixed coefficients as a generalized orbit of
/// three times the length, with `u^{3l} = v^l`:
///
/// ```text
/// u^{3l+1} = 0
/// u^{3l+2} = f_l(u^{3l}, u^{3(l-1)}, ..., u^0)
/// u^{3l+3} = X u^{3l+2} - sum_{j=1}^l b_{l,j} u^{3j-1}
/// ```
#[derive(Clone, Debug)]
pub struct ThreePhaseEmbedding {
    pub denoisers: Vec<Denoiser>,
    pub coeffs: Vec<Vec<f64>>,
}

impl ThreePhaseEmbedding {
    /// The `3 * iterations` maps to pass to [`run_generalized`].
    pub fn maps(&self, iterations: usize) -> Vec<&Self> {
        vec![self; 3 * iterations]
    }
}

impl CoordinateMap for ThreePhaseEmbedding {
    fn check(&self, m: usize) -> Result<()> {
        let l = m / 3;
        let f = self
            .denoisers
            .get(l)
            .ok_or_else(|| Error::invalid(format!("no denoiser for Onsager step {l}")))?;
        f.check(l)?;
        if m % 3 == 2 && self.coeffs.get(l).is_none_or(|b| b.len() < l) {
            return Err(Error::invalid(format!(
                "missing Onsager coefficients for step {l}"
            )));
        }
        Ok(())
    }

    fn value(&self, m: usize, point: &[f64]) -> f64 {
        let l = m / 3;
        match m % 3 {
            0 => 0.0,
            1 => {
                let sub: Vec<f64> = (0..=l).map(|i| point[3 * i]).collect();
                self.denoisers[l].value(l, &sub)
            }
            _ => {
                let b = &self.coeffs[l];
                point[m] - (1..=l).map(|j| b[j - 1] * point[3 * j - 1]).sum::<f64>()
            }
        }
    }
}

/// `(1/n) sum_i phi(v_i^0, ..., v_i^k)`.
pub fn phi_average(orbit: &AmpOrbit, phi: &TestFunction, k: usize) -> Result<f64> {
    phi.validate()?;
    if k > orbit.last_iteration() {
        return Err(Error::invalid(format!(
            "iteration {k} is beyond the orbit's last iterate {}",
            orbit.last_iteration()
        )));
    }
    if let TestFunction::SePair {
        pair: PairFunction::Constant(c),
    } = phi
    {
        return Ok(*c);
    }
    let n = orbit.n();
    let mut point = vec![0.0; k + 1];
    let mut sum = 0.0;
    for i in 0..n {
        for (p, it) in point.iter_mut().zip(&orbit.iterates) {
            *p = it[i];
        }
        sum += phi.value(&point);
    }
    Ok(sum / n as f64)
}

/// `(1/n) sum_i phi(w_i, y_i)`.
pub fn pair_average(pair: PairFunction, signal: &[f64], iterate: &[f64]) -> Result<f64> {
    check_len(signal.len(), iterate.len())?;
    if let PairFunction::Constant(c) = pair {
        return Ok(c);
    }
    let sum: f64 = signal
        .iter()
        .zip(iterate)
        .map(|(&w, &y)| pair.eval(w, y))
        .sum();
    Ok(sum / signal.len() as f64)
}

/// Parameters of the spectral start.
#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub power_depth: PowerDepth,
    /// Shifted power iterations used by the gap check for the top eigenvalue.
    pub gap_depth: usize,
    pub deflation_rounds: usize,
    pub margin: f64,
    /// Smallest accepted `|<psi^1, u0>| / n`, with `||psi^1|| = sqrt(n)`.
    pub min_overlap: f64,
    /// Start with [`run_onsager_from_eigenvector`] at the SNR of the
    /// strongest spike instead of the plain first step.
    pub eigen_memory: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            power_depth: PowerDepth::Auto,
            gap_depth: 300,
            deflation_rounds: 100,
            margin: DEFAULT_GAP_MARGIN,
            min_overlap: 1e-3,
            eigen_memory: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralRun {
    pub orbit: AmpOrbit,
    pub gap: GapCheck,
    pub power_depth: usize,
    /// `(1/n) <psi, u0>` of the initialization.
    pub overlap: f64,
}

/// Checks the spectral-gap and overlap hypotheses, then runs the Onsager
/// recursion from the sign-corrected top eigenvector.
pub fn run_spectral_amp(
    op: &SpikedOperator,
    f: &[Denoiser],
    u0: &[f64],
    iterations: usize,
    opts: &SpectralOptions,
) -> Result<SpectralRun> {
    check_len(op.dim(), u0.len())?;
    let gap = gap_check_with_margin(op, opts.gap_depth, opts.deflation_rounds, opts.margin)?;
    if !gap.pass {
        return Err(Error::Precondition(format!(
            "top eigenvalue {:.4} does not clear max(|lambda_2| = {:.4}, 1) by {}",
            gap.lambda1, gap.lambda2_abs, opts.margin
        )));
    }
    let power_depth = opts.power_depth.resolve(op)?;
    let psi = spectral_init(op, u0, power_depth)?;
    let n = u0.len() as f64;
    let overlap = psi.iter().zip(u0).map(|(a, b)| a * b).sum::<f64>() / n;
    if !(overlap > opts.min_overlap) {
        return Err(Error::Precondition(format!(
            "spectral start overlap {overlap:.2e} is below {:.2e}",
            opts.min_overlap
        )));
    }
    let orbit = if opts.eigen_memory {
        let gamma = op.spikes().iter().map(|s| s.0).fold(f64::NAN, f64::max);
        if !(gamma > 0.0) {
            return Err(Error::Precondition(
                "eigenvector memory needs a spike with positive SNR".into(),
            ));
        }
        run_onsager_from_eigenvector(op, f, &psi, iterations, gamma)?
    } else {
        run_onsager(op, f, &psi, iterations)?
    };
    Ok(SpectralRun {
        orbit,
        gap,
        power_depth,
        overlap,
    })
}

/// `f_k` evaluated on the stored iterates, for `k <= orbit.last_iteration()`.
pub fn denoiser_outputs(orbit: &AmpOrbit, f: &[Denoiser], k: usize) -> Result<Vec<f64>> {
    eval_rows(&f[k], k, &orbit.iterates)
}
