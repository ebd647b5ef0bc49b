//! Coordinate-wise denoisers and test functions.
//!
//! A *point* is the per-coordinate history `(x_0, x_1, ..., x_k)` of an orbit,
//! indexed by iteration: `point[j]` is the value of the `j`-th iterate. A
//! denoiser at iteration `k` reads `point[..=k]`, and `j` in a partial
//! derivative refers to the same indexing.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const DEFAULT_SOFT_THRESHOLD_WIDTH: f64 = 1e-2;

/// A per-iteration scalar map `R^{k+1} -> R` applied independently to every
/// coordinate of an orbit.
pub trait CoordinateMap: Sync {
    /// Fails if the map is not defined at iteration `k`.
    fn check(&self, k: usize) -> Result<()>;

    /// Value at iteration `k`. `point` has at least `k + 1` entries.
    fn value(&self, k: usize, point: &[f64]) -> f64;
}

fn default_width() -> f64 {
    DEFAULT_SOFT_THRESHOLD_WIDTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Denoiser {
    /// `f_k = x_k`.
    Identity,
    /// `f_k = tanh(a_k x_k)`.
    ScaledTanh { scales: Vec<f64> },
    /// Soft threshold at `theta_k` whose derivative ramps linearly from 0 to 1
    /// over `|x| in [theta_k - width/2, theta_k + width/2]`.
    SmoothSoftThreshold {
        thresholds: Vec<f64>,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `f_k = offset + sum_j weights[k][j] x_j`; missing weights are zero.
    LinearCombo {
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
}

fn soft_threshold(x: f64, theta: f64, width: f64) -> f64 {
    let r = x.abs();
    let lo = theta - 0.5 * width;
    let mag = if r <= lo {
        0.0
    } else if r < theta + 0.5 * width {
        (r - lo).powi(2) / (2.0 * width)
    } else {
        r - theta
    };
    mag.copysign(x)
}

fn soft_threshold_slope(x: f64, theta: f64, width: f64) -> f64 {
    ((x.abs() - theta + 0.5 * width) / width).clamp(0.0, 1.0)
}

impl Denoiser {
    fn schedule_len(&self) -> Option<usize> {
        match self {
            Denoiser::Identity => None,
            Denoiser::ScaledTanh { scales } => Some(scales.len()),
            Denoiser::SmoothSoftThreshold { thresholds, .. } => Some(thresholds.len()),
            Denoiser::LinearCombo { weights, .. } => Some(weights.len()),
        }
    }

    /// True when `f_k` depends on `x_k` alone.
    pub fn is_single_argument(&self, k: usize) -> bool {
        match self {
            Denoiser::LinearCombo { weights, .. } => weights
                .get(k)
                .map(|w| w.iter().take(k).all(|&c| c == 0.0))
                .unwrap_or(true),
            _ => true,
        }
    }

    /// Global Lipschitz constant of `f_k` on `R^{k+1}`.
    pub fn lipschitz_constant(&self, k: usize) -> f64 {
        match self {
            Denoiser::Identity | Denoiser::SmoothSoftThreshold { .. } => 1.0,
            Denoiser::ScaledTanh { scales } => scales.get(k).map_or(f64::NAN, |a| a.abs()),
            Denoiser::LinearCombo { weights, .. } => weights.get(k).map_or(f64::NAN, |w| {
                w.iter().take(k + 1).map(|c| c * c).sum::<f64>().sqrt()
            }),
        }
    }

    /// Values of `x_k` where `f_k` is not smooth or turns sharply. Quadrature
    /// over `f_k` splits its range there.
    pub fn breakpoints(&self, k: usize) -> Vec<f64> {
        match self {
            Denoiser::SmoothSoftThreshold { thresholds, width } => match thresholds.get(k) {
                Some(&t) => {
                    let (lo, hi) = (t - 0.5 * width, t + 0.5 * width);
                    vec![-hi, -lo, lo, hi]
                }
                None => Vec::new(),
            },
            Denoiser::ScaledTanh { .. } => vec![0.0],
            Denoiser::Identity | Denoiser::LinearCombo { .. } => Vec::new(),
        }
    }

    /// `df_k / dx_j` at `point`, in closed form.
    pub fn partial_value(&self, k: usize, j: usize, point: &[f64]) -> f64 {
        match self {
            Denoiser::Identity => {
                if j == k {
                    1.0
                } else {
                    0.0
                }
            }
            Denoiser::ScaledTanh { scales } => {
                if j != k {
                    return 0.0;
                }
                let a = scales[k];
                let t = (a * point[k]).tanh();
                a * (1.0 - t * t)
            }
            Denoiser::SmoothSoftThreshold { thresholds, width } => {
                if j != k {
                    return 0.0;
                }
                soft_threshold_slope(point[k], thresholds[k], *width)
            }
            Denoiser::LinearCombo { weights, .. } => weights[k].get(j).copied().unwrap_or(0.0),
        }
    }

    /// `f_k` applied to every coordinate of `history[0..=k]`.
    pub fn eval(&self, k: usize, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        eval_rows(self, k, history)
    }

    /// `df_k / dv^{[j]}` at every coordinate.
    pub fn partial(&self, k: usize, j: usize, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_partial_args(self, k, j, history)?;
        Ok(map_points(k, history, |p| self.partial_value(k, j, p)))
    }
}

impl CoordinateMap for Denoiser {
    fn check(&self, k: usize) -> Result<()> {
        if let Some(len) = self.schedule_len() {
            if len < k + 1 {
                return Err(Error::invalid(format!(
                    "denoiser schedule has {len} entries, iteration {k} needs {}",
                    k + 1
                )));
            }
        }
        match self {
            Denoiser::ScaledTanh { scales } => {
                if !scales[k].is_finite() {
                    return Err(Error::invalid(format!("tanh scale a_{k} is not finite")));
                }
            }
            Denoiser::SmoothSoftThreshold { thresholds, width } => {
                if !(*width > 0.0) {
                    return Err(Error::invalid(
                        "soft threshold smoothing width must be positive",
                    ));
                }
                if !(thresholds[k] >= 0.5 * width) {
                    return Err(Error::invalid(format!(
                        "soft threshold theta_{k} = {} must be at least width / 2",
                        thresholds[k]
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn value(&self, k: usize, point: &[f64]) -> f64 {
        match self {
            Denoiser::Identity => point[k],
            Denoiser::ScaledTanh { scales } => (scales[k] * point[k]).tanh(),
            Denoiser::SmoothSoftThreshold { thresholds, width } => {
                soft_threshold(point[k], thresholds[k], *width)
            }
            Denoiser::LinearCombo { weights, offset } => {
                offset
                    + weights[k]
                        .iter()
                        .take(k + 1)
                        .zip(point)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            }
        }
    }
}

fn check_history(k: usize, history: &[Vec<f64>]) -> Result<usize> {
    if history.len() < k + 1 {
        return Err(Error::invalid(format!(
            "iteration {k} needs {} iterates, got {}",
            k + 1,
            history.len()
        )));
    }
    let n = history[0].len();
    for h in &history[..=k] {
        check_len(n, h.len())?;
    }
    Ok(n)
}

fn check_partial_args(
    f: &impl CoordinateMap,
    k: usize,
    j: usize,
    history: &[Vec<f64>],
) -> Result<()> {
    f.check(k)?;
    check_history(k, history)?;
    if j > k {
        return Err(Error::invalid(format!(
            "partial index {j} exceeds iteration {k}"
        )));
    }
    Ok(())
}

/// Calls `g` on the point of every coordinate.
fn map_points(k: usize, history: &[Vec<f64>], mut g: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let n = history[0].len();
    let mut point = vec![0.0; k + 1];
    (0..n)
        .map(|i| {
            for (p, h) in point.iter_mut().zip(history) {
                *p = h[i];
            }
            g(&point)
        })
        .collect()
}

/// Applies a coordinate map at iteration `k` to `history[0..=k]`.
pub fn eval_rows(f: &impl CoordinateMap, k: usize, history: &[Vec<f64>]) -> Result<Vec<f64>> {
    f.check(k)?;
    check_history(k, history)?;
    Ok(map_points(k, history, |p| f.value(k, p)))
}

/// Central difference `(f(x + h e_j) - f(x - h e_j)) / 2h` at every coordinate.
pub fn fd_partial(
    f: &impl CoordinateMap,
    k: usize,
    j: usize,
    history: &[Vec<f64>],
    h: f64,
) -> Result<Vec<f64>> {
    check_partial_args(f, k, j, history)?;
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut shifted = vec![0.0; k + 1];
    Ok(map_points(k, history, |p| {
        shifted.copy_from_slice(p);
        shifted[j] = p[j] + h;
        let up = f.value(k, &shifted);
        shifted[j] = p[j] - h;
        let down = f.value(k, &shifted);
        (up - down) / (2.0 * h)
    }))
}

/// Two-argument observable `phi(w, y)` of a signal coordinate `w` and an
/// iterate coordinate `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFunction {
    /// `tanh(y) w`
    TanhOverlap,
    /// `y`
    Linear,
    /// `w y`
    Overlap,
    /// `y^2`
    Square,
    Constant(f64),
}

impl PairFunction {
    pub fn eval(&self, w: f64, y: f64) -> f64 {
        match *self {
            PairFunction::TanhOverlap => y.tanh() * w,
            PairFunction::Linear => y,
            PairFunction::Overlap => w * y,
            PairFunction::Square => y * y,
            PairFunction::Constant(c) => c,
        }
    }
}

/// Observable averaged along an orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `clamp(x_k, -bound, bound)`
    LastCoordClipped { bound: f64 },
    /// `tanh(x_k) tanh(x_0)`
    TanhProduct,
    /// `phi(x_0, x_k)`; experiments substitute the signal `u0` for `x_0`.
    SePair { pair: PairFunction },
    /// `x_k x_0`. Only pseudo-Lipschitz: diagnostics only.
    RawOverlap,
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        if let TestFunction::LastCoordClipped { bound } = self {
            if !(*bound > 0.0) {
                return Err(Error::invalid(format!(
                    "clip bound must be positive, got {bound}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_diagnostic(&self) -> bool {
        matches!(self, TestFunction::RawOverlap)
    }

    /// Lipschitz constant on `R^{k+1}`, when one exists.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            TestFunction::LastCoordClipped { .. } => Some(1.0),
            TestFunction::TanhProduct => Some(2.0),
            TestFunction::SePair { .. } | TestFunction::RawOverlap => None,
        }
    }

    /// Value at `point = (x_0, ..., x_k)`; assumes [`validate`](Self::validate) passed.
    pub fn value(&self, point: &[f64]) -> f64 {
        let k = point.len() - 1;
        match self {
            TestFunction::LastCoordClipped { bound } => point[k].clamp(-bound, *bound),
            TestFunction::TanhProduct => point[k].tanh() * point[0].tanh(),
            TestFunction::SePair { pair } => pair.eval(point[0], point[k]),
            TestFunction::RawOverlap => point[k] * point[0],
        }
    }
}

/// `phi(x_0, ..., x_k)`.
pub fn phi_eval(phi: &TestFunction, point: &[f64]) -> Result<f64> {
    phi.validate()?;
    if point.is_empty() {
        return Err(Error::invalid(
            "test function needs at least one coordinate",
        ));
    }
    Ok(phi.value(point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_history(k: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..=k)
            .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect()
    }

    fn builtins() -> Vec<Denoiser> {
        vec![
            Denoiser::Identity,
            Denoiser::ScaledTanh {
                scales: vec![0.5, 1.3, 2.0, 0.7, 3.0],
            },
            Denoiser::SmoothSoftThreshold {
                thresholds: vec![0.5, 1.0, 0.2, 1.5, 0.8],
                width: 0.1,
            },
            Denoiser::LinearCombo {
                weights: vec![
                    vec![1.0],
                    vec![0.3, -0.5],
                    vec![0.0, 1.0, 2.0],
                    vec![-1.0, 0.5, 0.5, 0.25],
                    vec![0.1, 0.2, 0.3, 0.4, 0.5],
                ],
                offset: 0.25,
            },
        ]
    }

    #[test]
    fn identity_reads_newest_coordinate() {
        // point (x0, x1, x2) = (0, -1, 2.5)
        let h = vec![vec![0.0], vec![-1.0], vec![2.5]];
        assert_eq!(Denoiser::Identity.eval(2, &h).unwrap(), vec![2.5]);
        assert_eq!(Denoiser::Identity.partial(2, 2, &h).unwrap(), vec![1.0]);
        assert_eq!(Denoiser::Identity.partial(2, 1, &h).unwrap(), vec![0.0]);
    }

    #[test]
    fn scaled_tanh_values() {
        let f = Denoiser::ScaledTanh {
            scales: vec![1.0, 2.0],
        };
        assert_eq!(f.eval(0, &[vec![0.0]]).unwrap(), vec![0.0]);
        let v = f.eval(1, &[vec![7.0], vec![0.5]]).unwrap()[0];
        assert_eq!(v, 1.0f64.tanh());
        let a = Denoiser::ScaledTanh { scales: vec![3.5] };
        assert_eq!(a.partial(0, 0, &[vec![0.0]]).unwrap(), vec![3.5]);
    }

    #[test]
    fn short_schedule_is_rejected() {
        let f = Denoiser::ScaledTanh { scales: vec![1.0] };
        let h = vec![vec![0.0]; 2];
        assert!(f.eval(1, &h).is_err());
        assert!(f.partial(1, 1, &h).is_err());
        assert!(f.partial(0, 1, &h).is_err());
    }

    #[test]
    fn soft_threshold_shape() {
        let f = Denoiser::SmoothSoftThreshold {
            thresholds: vec![1.0],
            width: 0.2,
        };
        assert_eq!(f.value(0, &[0.5]), 0.0);
        assert!((f.value(0, &[3.0]) - 2.0).abs() < 1e-15);
        assert!((f.value(0, &[-3.0]) + 2.0).abs() < 1e-15);
        let bad = Denoiser::SmoothSoftThreshold {
            thresholds: vec![0.01],
            width: 0.2,
        };
        assert!(bad.check(0).is_err());
    }

    #[test]
    fn fd_of_flat_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_history(2, 10, &mut rng);
        let id = fd_partial(&Denoiser::Identity, 2, 2, &h, 1e-5).unwrap();
        assert!(id.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let flat = Denoiser::ScaledTanh {
            scales: vec![0.0; 3],
        };
        assert!(fd_partial(&flat, 2, 2, &h, 1e-5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(fd_partial(&flat, 2, 2, &h, 0.0).is_err());
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in builtins() {
            for k in 0..5 {
                let h = random_history(k, 50, &mut rng);
                for j in 0..=k {
                    let a = f.partial(k, j, &h).unwrap();
                    let d = fd_partial(&f, k, j, &h, 1e-5).unwrap();
                    for (x, y) in a.iter().zip(&d) {
                        assert!((x - y).abs() <= 1e-6, "{f:?} k={k} j={j}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn denoisers_respect_lipschitz_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in builtins().into_iter().take(3) {
            let k = 3;
            let l = f.lipschitz_constant(k);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..=k).map(|_| rng.random_range(-4.0..4.0)).collect();
                let y: Vec<f64> = (0..=k).map(|_| rng.random_range(-4.0..4.0)).collect();
                let d: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((f.value(k, &x) - f.value(k, &y)).abs() <= l * d + 1e-12);
            }
        }
    }

    #[test]
    fn test_functions_respect_lipschitz_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for phi in [
            TestFunction::LastCoordClipped { bound: 1.5 },
            TestFunction::TanhProduct,
        ] {
            let l = phi.lipschitz_constant().unwrap();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
                let d: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((phi.value(&x) - phi.value(&y)).abs() <= l * d + 1e-12);
            }
        }
    }

    #[test]
    fn eval_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_history(3, 12, &mut rng);
        let perm: Vec<usize> = (0..12).rev().collect();
        let hp: Vec<Vec<f64>> = h
            .iter()
            .map(|v| perm.iter().map(|&i| v[i]).collect())
            .collect();
        for f in builtins() {
            let out = f.eval(3, &h).unwrap();
            let outp = f.eval(3, &hp).unwrap();
            for (a, &i) in outp.iter().zip(&perm) {
                assert_eq!(*a, out[i]);
            }
        }
    }

    #[test]
    fn phi_values() {
        let clip = TestFunction::LastCoordClipped { bound: 10.0 };
        assert_eq!(phi_eval(&clip, &[9.0, 3.0]).unwrap(), 3.0);
        assert_eq!(
            phi_eval(&TestFunction::TanhProduct, &[2.0, 0.0]).unwrap(),
            0.0
        );
        assert_eq!(
            phi_eval(&TestFunction::RawOverlap, &[3.0, 7.0, 2.0]).unwrap(),
            6.0
        );
        assert!(phi_eval(&TestFunction::LastCoordClipped { bound: 0.0 }, &[1.0]).is_err());
        assert!(TestFunction::RawOverlap.is_diagnostic());
        let pair = TestFunction::SePair {
            pair: PairFunction::Overlap,
        };
        assert_eq!(phi_eval(&pair, &[2.0, 5.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn serde_shapes() {
        let f: Denoiser =
            serde_json::from_str(r#"{"kind":"scaled_tanh","scales":[1.0,2.0]}"#).unwrap();
        assert_eq!(
            f,
            Denoiser::ScaledTanh {
                scales: vec![1.0, 2.0]
            }
        );
        let p: TestFunction =
            serde_json::from_str(r#"{"kind":"se_pair","pair":{"constant":1.5}}"#).unwrap();
        assert_eq!(
            p,
            TestFunction::SePair {
                pair: PairFunction::Constant(1.5)
            }
        );
        assert!(serde_json::from_str::<TestFunction>(r#"{"kind":"tanh_squared"}"#).is_err());
    }
}
