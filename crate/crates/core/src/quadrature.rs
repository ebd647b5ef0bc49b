//! Gauss–Hermite and Gauss–Legendre rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported Gauss–Hermite rule.
pub const MAX_HERMITE_NODES: usize = 512;

const NEWTON_EPS: f64 = 3e-14;
const NEWTON_MAX: usize = 100;
const QL_MAX_ITER: usize = 60;

/// Nodes and probability weights for `E f(g)`, `g ~ N(0, 1)`.
///
/// Golub–Welsch: the nodes are the eigenvalues of the Jacobi matrix of the
/// probabilists' Hermite recurrence and the weights are the squared first
/// components of its unit eigenvectors.
pub fn gauss_hermite(n: usize) -> Result<Vec<(f64, f64)>> {
    if !(2..=MAX_HERMITE_NODES).contains(&n) {
        return Err(Error::invalid(format!(
            "Gauss-Hermite node count must be in [2, {MAX_HERMITE_NODES}], got {n}"
        )));
    }
    let mut d = vec![0.0; n];
    let mut e: Vec<f64> = (1..=n)
        .map(|k| if k < n { (k as f64).sqrt() } else { 0.0 })
        .collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut z)?;
    let mut rule: Vec<(f64, f64)> = d.into_iter().zip(z).map(|(x, v)| (x, v * v)).collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rule)
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `d` and
/// couplings `e[i]` between rows `i` and `i + 1`. Only the first row `z` of
/// the eigenvector matrix is tracked.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::Accuracy(format!(
                    "tridiagonal QL stalled at row {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Nodes and weights on `[-1, 1]` for `integral f(t) dt`.
pub fn gauss_legendre(n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::invalid("Gauss-Legendre needs at least 2 nodes"));
    }
    let nf = n as f64;
    let mut rule = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        rule[i] = (-z, wi);
        rule[n - 1 - i] = (z, wi);
    }
    Ok(rule)
}
