//! Dense symmetric storage, vector kernels, a cyclic Jacobi eigensolver and a
//! jittered Cholesky factorization.
//!
//! Everything here is `f64`. The Jacobi solver is the reference eigensolver
//! that the power method and the spectral-gap checks are verified against; it
//! is meant for matrices up to a thousand or so rows.

use crate::error::{check_len, Error, Result};

/// Default diagonal jitter added before a Cholesky factorization.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Largest dimension accepted by [`jacobi_eigendecomp`].
pub const JACOBI_MAX_DIM: usize = 1024;

const JACOBI_MAX_SWEEPS: usize = 100;

pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum())
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `y <- a * x + y`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
    check_len(y.len(), x.len())?;
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
    Ok(())
}

pub fn scale(a: f64, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v *= a;
    }
}

/// A real symmetric linear map on `R^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `op(x)` into `out`. Both slices must have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
}

/// Symmetric `n x n` matrix stored as its packed upper triangle, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        Ok(Self {
            n,
            data: vec![0.0; packed_len(n)],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        Ok(m)
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                m.data[idx] = f(i, j);
                idx += 1;
            }
        }
        Ok(m)
    }

    /// Takes the upper triangle of a dense row-major square matrix. The lower
    /// triangle must mirror it exactly.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            check_len(n, row.len())?;
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::from_upper_fn(n, |i, j| rows[i][j])
    }

    pub fn from_packed(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        check_len(packed_len(n), data.len())?;
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Packed upper triangle, row-major.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn row_offset(&self, i: usize) -> usize {
        i * self.n - i * i.saturating_sub(1) / 2
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.row_offset(lo) + (hi - lo)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = self.index(i, j);
        self.data[idx] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        let mut idx = 0;
        for i in 0..self.n {
            sum += self.data[idx] * self.data[idx];
            for v in &self.data[idx + 1..idx + self.n - i] {
                sum += 2.0 * v * v;
            }
            idx += self.n - i;
        }
        sum.sqrt()
    }

    /// Entrywise `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &SymmetricMatrix, b: f64) -> Result<Self> {
        check_len(self.n, other.n)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self { n: self.n, data })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        y.fill(0.0);
        let mut off = 0;
        for i in 0..n {
            let len = n - i;
            let row = &self.data[off..off + len];
            let xi = x[i];
            let mut acc = row[0] * xi;
            let tail = &row[1..];
            let xs = &x[i + 1..];
            let ys = &mut y[i + 1..];
            for ((a, xj), yj) in tail.iter().zip(xs).zip(ys.iter_mut()) {
                acc += a * xj;
                *yj += a * xi;
            }
            y[i] += acc;
            off += len;
        }
    }
}

impl LinearOperator for SymmetricMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out)
    }
}

/// `M x` for symmetric `M`.
pub fn sym_matvec(m: &SymmetricMatrix, x: &[f64]) -> Result<Vec<f64>> {
    m.matvec(x)
}

/// Eigenvalues sorted descending, with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[r]` is the unit eigenvector for `eigenvalues[r]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomp {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Dense `Q diag(lambda) Q^T`, row-major.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut out = vec![vec![0.0; n]; n];
        for (lambda, q) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let s = lambda * q[i];
                for j in 0..n {
                    out[i][j] += s * q[j];
                }
            }
        }
        out
    }

    /// `max |Q^T Q - I|` over all entries.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, qa) in self.eigenvectors.iter().enumerate() {
            for (b, qb) in self.eigenvectors.iter().enumerate().skip(a) {
                let d: f64 = qa.iter().zip(qb).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// `||Q diag(lambda) Q^T - M||_F`.
    pub fn reconstruction_error(&self, m: &SymmetricMatrix) -> f64 {
        let r = self.reconstruct();
        let mut sum = 0.0;
        for (i, row) in r.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let d = v - m.get(i, j);
                sum += d * d;
            }
        }
        sum.sqrt()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps over all `(p, q)` pairs in row order, annihilating each
/// off-diagonal entry with a plane rotation, until the largest off-diagonal
/// magnitude is at most `tol * ||M||_F`.
pub fn jacobi_eigendecomp(m: &SymmetricMatrix, tol: f64) -> Result<EigenDecomp> {
    let n = m.n();
    if n > JACOBI_MAX_DIM {
        return Err(Error::invalid(format!(
            "Jacobi oracle limited to n <= {JACOBI_MAX_DIM}, got {n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("Jacobi tolerance must be positive"));
    }

    let mut a = m.to_rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let threshold = tol * m.frobenius_norm();

    let max_off = |a: &[Vec<f64>]| {
        let mut worst: f64 = 0.0;
        for (p, row) in a.iter().enumerate() {
            for x in &row[p + 1..] {
                worst = worst.max(x.abs());
            }
        }
        worst
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if max_off(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A <- A J
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                // A <- J^T A
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                // V <- V J
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = max_off(&a);
        if residual > threshold {
            return Err(Error::NotConverged {
                sweeps: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let eigenvalues = order.iter().map(|&r| a[r][r]).collect();
    let eigenvectors = order
        .iter()
        .map(|&r| v.iter().map(|row| row[r]).collect())
        .collect();
    Ok(EigenDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Lower-triangular factor stored packed by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    #[inline]
    fn index(i: usize, j: usize) -> usize {
        i * (i + 1) / 2 + j
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[Self::index(i, j)]
        }
    }

    /// `L z` written into `out`.
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.data[Self::index(i, 0)..=Self::index(i, i)];
            *o = row.iter().zip(z).map(|(l, x)| l * x).sum();
        }
    }

    /// Dense `L L^T`, row-major.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out[i][j] = s;
                out[j][i] = s;
            }
        }
        out
    }
}

/// Cholesky factor of `S + jitter * I`.
pub fn cholesky(s: &SymmetricMatrix, jitter: f64) -> Result<LowerTriangular> {
    if !(jitter >= 0.0) {
        return Err(Error::invalid("Cholesky jitter must be nonnegative"));
    }
    let n = s.n();
    let mut l = LowerTriangular {
        n,
        data: vec![0.0; packed_len(n)],
    };
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s.get(i, j);
            if i == j {
                sum += jitter;
            }
            let ri = LowerTriangular::index(i, 0);
            let rj = LowerTriangular::index(j, 0);
            for k in 0..j {
                sum -= l.data[ri + k] * l.data[rj + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::NotPositiveSemidefinite { row: i, pivot: sum });
                }
                l.data[ri + i] = sum.sqrt();
            } else {
                l.data[ri + j] = sum / l.data[rj + j];
            }
        }
    }
    Ok(l)
}
