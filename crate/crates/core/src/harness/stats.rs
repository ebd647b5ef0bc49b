use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample statistics of one group of values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation (divisor `count - 1`); 0 when `count == 1`.
    pub std: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Moments {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("no values to summarize"));
        }
        let count = values.len();
        let m = count as f64;
        let mean = values.iter().sum::<f64>() / m;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std,
            stderr: std / m.sqrt(),
            count,
        })
    }

    /// True when the spread is undefined.
    pub fn is_degenerate(&self) -> bool {
        self.count < 2
    }
}

/// Least-squares slope of `ln(value)` against `ln(n)`.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<f64> {
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*v > 0.0) || !(*n > 0.0)) {
        return Err(Error::invalid(format!(
            "decay fit needs positive n and values, got ({n}, {v})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("decay fit needs at least two distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
