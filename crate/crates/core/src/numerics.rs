//! Dense complex linear algebra and quadrature used by the impedance model and
//! both optimizers.
//!
//! Everything here is a pure function of its inputs. Matrices are stored
//! row-major; sizes in this crate stay around a thousand rows at most, so
//! O(n^3) factorizations are fine.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

pub type C64 = Complex64;

/// Pivots smaller than this fraction of the largest input entry are singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1.0e-14;

/// Relative tolerance for the power-iteration spectral norm.
pub const SPECTRAL_NORM_TOL: f64 = 1.0e-6;

/// Iteration cap for the power-iteration spectral norm.
pub const SPECTRAL_NORM_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is singular at pivot index {pivot_index}")]
    SingularMatrix { pivot_index: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrices and vectors must be non-empty")]
    Empty,
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("power iteration did not converge in {iterations} iterations (estimate {estimate})")]
    NonConvergence { estimate: f64, iterations: usize },
    #[error("invalid quadrature request: {0}")]
    InvalidQuadrature(String),
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, NumericsError> {
        let first = rows.first().ok_or(NumericsError::Empty)?;
        let cols = first.len();
        if cols == 0 {
            return Err(NumericsError::Empty);
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(NumericsError::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let m = Self {
            rows: rows.len(),
            cols,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }

    /// Column vector (n x 1).
    pub fn column(v: &[C64]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn check_finite(&self) -> Result<(), NumericsError> {
        match self.data.iter().position(|z| !z.is_finite()) {
            Some(index) => Err(NumericsError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * alpha).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^H v` without materializing the adjoint.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "vector length differs from row count");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Non-empty vector of finite complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Result<Self, NumericsError> {
        if entries.is_empty() {
            return Err(NumericsError::Empty);
        }
        if let Some(index) = entries.iter().position(|z| !z.is_finite()) {
            return Err(NumericsError::NonFinite { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        Self(vec![C64::new(0.0, 0.0); n])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        vec_norm(&self.0)
    }
}

impl std::ops::Deref for ComplexVector {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// LU factorization with partial (row) pivoting: `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl LuFactorization {
    pub fn new(a: &ComplexMatrix) -> Result<Self, NumericsError> {
        if !a.is_square() {
            return Err(NumericsError::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        a.check_finite()?;
        let n = a.rows;
        let threshold = SINGULAR_PIVOT_RATIO * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs < threshold || pivot_abs == 0.0 {
                return Err(NumericsError::SingularMatrix { pivot_index: k });
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu.data[k * n + j];
                    lu.data[i * n + j] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>, NumericsError> {
        let n = self.dim();
        if b.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: C64 = row[..i].iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: C64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Explicit inverse, one solve per identity column.
    pub fn inverse(&self) -> Result<ComplexMatrix, NumericsError> {
        let n = self.dim();
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.fill(C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            for (i, v) in self.solve(&e)?.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }

    /// Solves `A^T x = b` (plain transpose, no conjugation).
    pub fn solve_transposed(&self, b: &[C64]) -> Result<Vec<C64>, NumericsError> {
        let n = self.dim();
        if b.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        // A^T = U^T L^T P, so solve U^T w = b, L^T v = w, x = P^T v.
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.lu[(k, i)] * w[k];
            }
            w[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in (i + 1)..n {
                s -= self.lu[(k, i)] * w[k];
            }
            w[i] = s;
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = w[k];
        }
        Ok(x)
    }
}

/// Solves `A X = B` for every column of `B`.
pub fn lu_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if b.rows != a.rows {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows,
            actual: b.rows,
        });
    }
    let lu = LuFactorization::new(a)?;
    let mut x = ComplexMatrix::zeros(b.rows, b.cols);
    for j in 0..b.cols {
        let col = lu.solve(&b.col_vec(j))?;
        for (i, v) in col.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

pub fn invert(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    lu_solve(a, &ComplexMatrix::identity(a.rows))
}

/// Result of the power-iteration spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NormEstimate {
    /// The estimate, or `NonConvergence` carrying it when the tolerance was missed.
    pub fn checked(self) -> Result<f64, NumericsError> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(NumericsError::NonConvergence {
                estimate: self.value,
                iterations: self.iterations,
            })
        }
    }
}

/// Largest singular value by power iteration on `A^H A`.
///
/// Starts from the normalized all-ones vector. Stops once the eigen-residual
/// `|A^H A v - lambda v|` drops below `SPECTRAL_NORM_TOL * lambda`, or once the
/// singular-value estimate changes by less than `SPECTRAL_NORM_TOL` (relative)
/// on two consecutive iterations. The second test covers clustered leading
/// singular values, where the vector converges slowly but the value does not.
pub fn spectral_norm(a: &ComplexMatrix) -> NormEstimate {
    let n = a.cols;
    if a.max_abs() == 0.0 {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut v = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut lambda = 0.0;
    let mut prev_sigma = f64::NAN;
    let mut stalls = 0;
    for it in 1..=SPECTRAL_NORM_MAX_ITERS {
        let av = a.matvec(&v);
        let mut u = a.adjoint_matvec(&av);
        lambda = av.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let u_norm = vec_norm(&u);
        if u_norm == 0.0 {
            // Start vector fell in the null space; restart on the heaviest column.
            let j = (0..n)
                .max_by(|&x, &y| {
                    let cx = vec_norm(&a.col_vec(x));
                    let cy = vec_norm(&a.col_vec(y));
                    cx.total_cmp(&cy)
                })
                .unwrap_or(0);
            v = vec![C64::new(0.0, 0.0); n];
            v[j] = C64::new(1.0, 0.0);
            continue;
        }
        let residual = u
            .iter()
            .zip(&v)
            .map(|(ui, vi)| (ui - vi * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        for ui in u.iter_mut() {
            *ui /= u_norm;
        }
        v = u;
        let sigma = lambda.sqrt();
        if (sigma - prev_sigma).abs() <= SPECTRAL_NORM_TOL * sigma {
            stalls += 1;
        } else {
            stalls = 0;
        }
        prev_sigma = sigma;
        if residual <= SPECTRAL_NORM_TOL * lambda || stalls >= 2 {
            // One more Rayleigh quotient on the refreshed vector.
            let av = a.matvec(&v);
            lambda = lambda.max(av.iter().map(|z| z.norm_sqr()).sum::<f64>());
            return NormEstimate {
                value: lambda.sqrt(),
                iterations: it,
                converged: true,
            };
        }
    }
    NormEstimate {
        value: lambda.sqrt(),
        iterations: SPECTRAL_NORM_MAX_ITERS,
        converged: false,
    }
}

/// Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self, NumericsError> {
        if n == 0 {
            return Err(NumericsError::InvalidQuadrature("order must be >= 1".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn reference_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn reference_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<T, F>(&self, lo: f64, hi: f64, mut f: F) -> T
    where
        T: std::iter::Sum<T>,
        F: FnMut(f64) -> T,
        T: std::ops::Mul<f64, Output = T>,
    {
        self.mapped(lo, hi).map(|(x, w)| f(x) * w).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [lo, hi].
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    if !(lo < hi) {
        return Err(NumericsError::InvalidQuadrature(format!(
            "interval [{lo}, {hi}] is empty"
        )));
    }
    let rule = GaussLegendre::new(n)?;
    Ok(rule.mapped(lo, hi).unzip())
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_to_pi(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = angle - two_pi * ((angle + PI) / two_pi).floor();
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

/// Phase of `z`, with the phase of zero taken as 0.
pub fn phase_or_zero(z: C64) -> f64 {
    if z == C64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}
