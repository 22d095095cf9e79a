//! Dense complex linear algebra.
//!
//! Everything here works on [`ComplexMatrix`], a row-major dense matrix of
//! `Complex64`. The eigensolver reduces to upper Hessenberg form with
//! Householder reflectors and then runs a single-shift complex QR iteration
//! with Wilkinson shifts and deflation, producing a complex Schur form.
//! Sizes of interest are small superoperators (a few hundred at most).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("QR iteration did not converge after {sweeps} sweeps (dim {dim})")]
    NoConvergence { dim: usize, sweeps: usize },
    #[error("leading eigenvalue is degenerate: {first} and {second} (real gap {gap:e})")]
    Degenerate { first: C64, second: C64, gap: f64 },
    #[error("eigenpair residual {residual:e} exceeds {bound:e} for eigenvalue {value}")]
    Residual {
        value: C64,
        residual: f64,
        bound: f64,
    },
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Dimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LinalgError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Builds a matrix from real nested rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(C64::conj).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, k: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * k).collect(),
        }
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(C64::new(k, 0.0))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖A − A†‖_F ≤ tol·‖A‖_F` (absolute when `A` is zero).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let diff = (self - &self.adjoint()).frobenius_norm();
        diff <= tol * self.frobenius_norm().max(1.0)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self · v` into an existing buffer.
    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    fn require_square(&self, what: &str) -> Result<usize, LinalgError> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

/// `Σ conj(a_i) b_i`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

/// LU factorization with partial pivoting. Exactly zero (or denormal) pivots
/// are replaced by `ε·‖A‖` so that near-singular shifted systems used by
/// inverse iteration still produce a usable solve.
pub struct Lu {
    n: usize,
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        let n = a.require_square("LU")?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let floor = EPS * a.frobenius_norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| lu[(x, k)].norm().total_cmp(&lu[(y, k)].norm()))
                .unwrap();
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            if lu[(k, k)].norm() < floor {
                lu[(k, k)] = C64::new(floor, 0.0);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(b.rows, self.n);
        let mut out = ComplexMatrix::zeros(b.rows, b.cols);
        let mut col = vec![C64::new(0.0, 0.0); b.rows];
        for j in 0..b.cols {
            for i in 0..b.rows {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

/// Tunables for the eigensolver. Defaults match the library-wide tolerances.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Total QR sweeps allowed, as a multiple of the dimension.
    pub sweeps_per_dim: usize,
    /// Residual bound relative to `‖M‖_F` for every returned eigenpair.
    pub residual_tol: f64,
    /// Minimum real-part gap between the leading and next eigenvalue.
    pub gap_tol: f64,
    /// Inverse-iteration steps for the leading eigenpair.
    pub inverse_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            sweeps_per_dim: 100,
            residual_tol: 1e-10,
            gap_tol: 1e-9,
            inverse_iterations: 3,
        }
    }
}

/// Eigenvalues (and optionally eigenvectors) sorted by descending real part,
/// ties broken by descending imaginary part.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors, `M v = λ v`.
    pub right_vectors: Option<Vec<Vec<C64>>>,
    /// Unit-norm left eigenvectors, `u† M = λ u†`.
    pub left_vectors: Option<Vec<Vec<C64>>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Leading eigenpair with `left† · right = 1`.
#[derive(Debug, Clone)]
pub struct LeadingEigenpair {
    pub value: C64,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
    /// Real-part gap to the next eigenvalue (infinite for 1x1).
    pub gap: f64,
}

/// Householder reduction to upper Hessenberg form, `A = Q H Q†`.
fn hessenberg(a: &ComplexMatrix, want_q: bool) -> (ComplexMatrix, Option<ComplexMatrix>) {
    let n = a.rows;
    let mut h = a.clone();
    let mut q = want_q.then(|| ComplexMatrix::identity(n));
    for k in 0..n.saturating_sub(2) {
        let alpha_norm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        // v = x + phase·‖x‖·e1, reflector P = I − 2 v v† / (v† v)
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(C64::norm_sqr).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // H ← P H
        for j in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * h[(k + 1 + t, j)])
                .sum();
            let s = s * beta;
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vi * s;
            }
        }
        // H ← H P
        for i in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| h[(i, k + 1 + t)] * vi)
                .sum();
            let s = s * beta;
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= s * vi.conj();
            }
        }
        if let Some(q) = q.as_mut() {
            for i in 0..n {
                let s: C64 = v
                    .iter()
                    .enumerate()
                    .map(|(t, vi)| q[(i, k + 1 + t)] * vi)
                    .sum();
                let s = s * beta;
                for (t, vi) in v.iter().enumerate() {
                    q[(i, k + 1 + t)] -= s * vi.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    (h, q)
}

/// Rotation `G = [[c, s], [−s̄, c]]` with `G·[x; y] = [r; 0]`.
#[inline]
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let nrm = ax.hypot(ay);
    let c = ax / nrm;
    let s = (x / ax) * y.conj() / nrm;
    (c, s)
}

/// Eigenvalue of the 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let l1 = mean + disc;
    let l2 = mean - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition of a Hessenberg matrix in place. When `z` is
/// supplied the full triangular form is maintained and the rotations are
/// accumulated into `z`.
fn schur_in_place(
    h: &mut ComplexMatrix,
    mut z: Option<&mut ComplexMatrix>,
    max_sweeps: usize,
) -> Result<(), LinalgError> {
    let n = h.rows;
    let full = z.is_some();
    let hnorm = h.frobenius_norm();
    let mut sweeps = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        // Look for a negligible subdiagonal entry in the active block.
        let mut lo = hi;
        while lo > 0 {
            let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if scale == 0.0 {
                scale = hnorm;
            }
            if h[(lo, lo - 1)].norm() <= EPS * scale {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        sweeps += 1;
        its += 1;
        if sweeps > max_sweeps {
            return Err(LinalgError::NoConvergence {
                dim: n,
                sweeps: max_sweeps,
            });
        }
        let shift = if its.is_multiple_of(10) {
            // exceptional shift to break cycles
            let ex = h[(hi, hi - 1)].re.abs()
                + if hi >= 2 {
                    h[(hi - 1, hi - 2)].re.abs()
                } else {
                    0.0
                };
            h[(hi, hi)] + C64::new(ex, 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        let col_end = if full { n } else { hi + 1 };
        let row_start = if full { 0 } else { lo };
        for k in lo..hi {
            let (x, y) = if k == lo {
                (h[(lo, lo)] - shift, h[(lo + 1, lo)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let first_col = if k == lo { lo } else { k - 1 };
            for j in first_col..col_end {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = C64::new(0.0, 0.0);
            }
            let last_row = (k + 2).min(hi);
            for i in row_start..=last_row {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let a = z[(i, k)];
                    let b = z[(i, k + 1)];
                    z[(i, k)] = a * c + b * s.conj();
                    z[(i, k + 1)] = -a * s + b * c;
                }
            }
        }
    }
    Ok(())
}

fn order_indices(values: &[C64]) -> Vec<usize> {
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let tie = 1e-12 * scale;
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        if (x.re - y.re).abs() <= tie {
            y.im.total_cmp(&x.im)
        } else {
            y.re.total_cmp(&x.re)
        }
    });
    idx
}

fn sort_spectrum(values: &[C64]) -> Vec<C64> {
    order_indices(values)
        .into_iter()
        .map(|i| values[i])
        .collect()
}

/// Eigenvalues only, sorted by descending real part.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>, LinalgError> {
    eigenvalues_with(m, &EigenOptions::default())
}

pub fn eigenvalues_with(m: &ComplexMatrix, opts: &EigenOptions) -> Result<Vec<C64>, LinalgError> {
    let n = m.require_square("eigenvalues")?;
    let (mut h, _) = hessenberg(m, false);
    schur_in_place(&mut h, None, opts.sweeps_per_dim * n)?;
    let diag: Vec<C64> = (0..n).map(|i| h[(i, i)]).collect();
    Ok(sort_spectrum(&diag))
}

/// Full eigendecomposition: eigenvalues with unit right and left eigenvectors.
pub fn eigen_spectrum(m: &ComplexMatrix) -> Result<Spectrum, LinalgError> {
    eigen_spectrum_with(m, &EigenOptions::default())
}

pub fn eigen_spectrum_with(
    m: &ComplexMatrix,
    opts: &EigenOptions,
) -> Result<Spectrum, LinalgError> {
    let n = m.require_square("eigen_spectrum")?;
    let (mut t, q) = hessenberg(m, true);
    let mut z = q.expect("hessenberg requested Q");
    schur_in_place(&mut t, Some(&mut z), opts.sweeps_per_dim * n)?;

    let tnorm = t.frobenius_norm().max(f64::MIN_POSITIVE);
    let small = EPS * tnorm;
    let guard = |d: C64| {
        if d.norm() < small {
            C64::new(small, 0.0)
        } else {
            d
        }
    };

    let diag: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut rights = Vec::with_capacity(n);
    let mut lefts = Vec::with_capacity(n);
    for k in 0..n {
        let lam = diag[k];
        // (T − λI) x = 0, x_k = 1, upper-triangular back substitution
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let s: C64 = (i + 1..=k).map(|j| t[(i, j)] * x[j]).sum();
            x[i] = -s / guard(t[(i, i)] - lam);
        }
        // (T† − λ̄I) y = 0, y_k = 1, forward substitution on the lower triangle
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in k + 1..n {
            let s: C64 = (k..i).map(|j| t[(j, i)].conj() * y[j]).sum();
            y[i] = -s / guard((t[(i, i)] - lam).conj());
        }
        let mut v = z.mul_vec(&x);
        let mut u = z.mul_vec(&y);
        normalize(&mut v);
        normalize(&mut u);
        rights.push(v);
        lefts.push(u);
    }

    let order = order_indices(&diag);
    let eigenvalues: Vec<C64> = order.iter().map(|&i| diag[i]).collect();
    let right_vectors: Vec<Vec<C64>> = order.iter().map(|&i| rights[i].clone()).collect();
    let left_vectors: Vec<Vec<C64>> = order.iter().map(|&i| lefts[i].clone()).collect();

    let bound = opts.residual_tol * m.frobenius_norm().max(f64::MIN_POSITIVE);
    for (lam, v) in eigenvalues.iter().zip(&right_vectors) {
        let r = residual(m, *lam, v);
        if r > bound {
            return Err(LinalgError::Residual {
                value: *lam,
                residual: r,
                bound,
            });
        }
    }

    Ok(Spectrum {
        eigenvalues,
        right_vectors: Some(right_vectors),
        left_vectors: Some(left_vectors),
    })
}

fn normalize(v: &mut [C64]) {
    let nrm = vec_norm(v);
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
}

/// `‖M v − λ v‖₂`
pub fn residual(m: &ComplexMatrix, lam: C64, v: &[C64]) -> f64 {
    let mv = m.mul_vec(v);
    mv.iter()
        .zip(v)
        .map(|(a, b)| (a - lam * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn inverse_iteration(lu: &Lu, n: usize, steps: usize) -> Vec<C64> {
    // deterministic, generic start vector
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.1 * (i as f64).sin(), 0.05 * (i as f64 + 1.0).cos()))
        .collect();
    normalize(&mut v);
    for _ in 0..steps.max(1) {
        v = lu.solve(&v);
        normalize(&mut v);
    }
    v
}

/// Eigenvalue with the largest real part, with right and left eigenvectors
/// scaled so that `left† · right = 1`.
pub fn max_real_eigenpair(m: &ComplexMatrix) -> Result<LeadingEigenpair, LinalgError> {
    max_real_eigenpair_with(m, &EigenOptions::default())
}

pub fn max_real_eigenpair_with(
    m: &ComplexMatrix,
    opts: &EigenOptions,
) -> Result<LeadingEigenpair, LinalgError> {
    let n = m.require_square("max_real_eigenpair")?;
    let values = eigenvalues_with(m, opts)?;
    let value = values[0];
    let gap = if n > 1 {
        values[0].re - values[1].re
    } else {
        f64::INFINITY
    };
    if gap < opts.gap_tol {
        return Err(LinalgError::Degenerate {
            first: values[0],
            second: values[1],
            gap,
        });
    }

    let shifted = m - &ComplexMatrix::identity(n).scale(value);
    let right = inverse_iteration(&Lu::new(&shifted)?, n, opts.inverse_iterations);
    let mut left = inverse_iteration(&Lu::new(&shifted.adjoint())?, n, opts.inverse_iterations);

    let bound = opts.residual_tol * m.frobenius_norm().max(f64::MIN_POSITIVE);
    let r = residual(m, value, &right);
    if r > bound {
        return Err(LinalgError::Residual {
            value,
            residual: r,
            bound,
        });
    }
    let overlap = inner(&left, &right);
    if overlap.norm() > 0.0 {
        // left† right = 1 ⇒ left ← left / conj(overlap)
        let k = overlap.conj();
        for x in left.iter_mut() {
            *x /= k;
        }
    }
    Ok(LeadingEigenpair {
        value,
        right,
        left,
        gap,
    })
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn lin_comb(terms: &[(f64, &ComplexMatrix)]) -> ComplexMatrix {
    let (k0, m0) = terms[0];
    let mut out = m0.scale_real(k0);
    for &(k, m) in &terms[1..] {
        for (o, x) in out.data.iter_mut().zip(&m.data) {
            *o += x * k;
        }
    }
    out
}

/// `e^{m}` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = m.require_square("expm")?;
    let norm = m.one_norm();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale_real(0.5f64.powi(squarings));
    let b = &PADE13;
    let id = ComplexMatrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)]);
    let u_tail = lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)]);
    let u = &a * &(&(&a6 * &u_inner) + &u_tail);
    let v_inner = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)]);
    let v_tail = lin_comb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)]);
    let v = &(&a6 * &v_inner) + &v_tail;
    let mut r = Lu::new(&(&v - &u))?.solve_matrix(&(&v + &u));
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// `e^{m t} v`.
pub fn expm_apply(m: &ComplexMatrix, t: f64, v: &[C64]) -> Result<Vec<C64>, LinalgError> {
    let n = m.require_square("expm_apply")?;
    if v.len() != n {
        return Err(LinalgError::Dimension(format!(
            "vector of length {} for a {n}x{n} matrix",
            v.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(LinalgError::Dimension(format!(
            "propagation time must be non-negative, got {t}"
        )));
    }
    Ok(expm(&m.scale_real(t))?.mul_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_eigenvalues() {
        let ev = eigen_spectrum(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(ev.dim(), 2);
        for z in ev.eigenvalues {
            assert!(close(z, c(1.0, 0.0), 1e-14));
        }
    }

    #[test]
    fn nilpotent_eigenvalues() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let ev = eigen_spectrum(&m).unwrap();
        for z in ev.eigenvalues {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_ordering() {
        let m = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 3.0), c(-4.0, 0.0)]);
        let ev = eigen_spectrum(&m).unwrap();
        let want = [c(2.0, 3.0), c(1.0, 0.0), c(-4.0, 0.0)];
        for (z, w) in ev.eigenvalues.iter().zip(want) {
            assert!(close(*z, w, 1e-14), "{z} vs {w}");
        }
    }

    #[test]
    fn ties_ordered_by_imaginary_part() {
        let m = ComplexMatrix::diagonal(&[c(-1.0, -2.0), c(-1.0, 2.0), c(0.0, 0.0)]);
        let ev = eigenvalues(&m).unwrap();
        assert!(close(ev[1], c(-1.0, 2.0), 1e-14));
        assert!(close(ev[2], c(-1.0, -2.0), 1e-14));
    }

    #[test]
    fn non_square_rejected() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eigen_spectrum(&m), Err(LinalgError::Dimension(_))));
        assert!(matches!(
            max_real_eigenpair(&m),
            Err(LinalgError::Dimension(_))
        ));
    }

    #[test]
    fn construction_checks() {
        assert!(ComplexMatrix::new(0, 1, vec![]).is_err());
        assert!(ComplexMatrix::new(1, 2, vec![c(1.0, 0.0)]).is_err());
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn leading_pair_of_diagonal() {
        let m = ComplexMatrix::diagonal(&[c(-1.0, 0.0), c(-2.0, 0.0), c(0.5, 0.0)]);
        let p = max_real_eigenpair(&m).unwrap();
        assert!(close(p.value, c(0.5, 0.0), 1e-14));
        assert!((p.right[2].norm() - 1.0).abs() < 1e-12);
        assert!(close(inner(&p.left, &p.right), c(1.0, 0.0), 1e-12));
        assert!((p.gap - 1.5).abs() < 1e-14);
    }

    #[test]
    fn leading_pair_degenerate() {
        let m = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(1.0, 0.0), c(-3.0, 0.0)]);
        assert!(matches!(
            max_real_eigenpair(&m),
            Err(LinalgError::Degenerate { .. })
        ));
    }

    #[test]
    fn left_vector_of_non_normal_matrix() {
        let m = ComplexMatrix::from_real_rows(&[&[-1.0, 5.0], &[0.0, -3.0]]).unwrap();
        let p = max_real_eigenpair(&m).unwrap();
        // u† M = λ u†  ⇔  M† u = λ̄ u
        let r = residual(&m.adjoint(), p.value.conj(), &p.left);
        assert!(r < 1e-12 * vec_norm(&p.left));
    }

    #[test]
    fn expm_zero_is_identity() {
        let v = vec![c(0.3, -1.0), c(2.0, 0.5)];
        let out = expm_apply(&ComplexMatrix::zeros(2, 2), 3.0, &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn expm_diagonal() {
        let m = ComplexMatrix::diagonal(&[c(-1.0, 0.0), c(-2.0, 0.0)]);
        let out = expm_apply(&m, 1.0, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(((out[0].re - (-1.0f64).exp()) / (-1.0f64).exp()).abs() < 1e-14);
        assert!(((out[1].re - (-2.0f64).exp()) / (-2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn expm_rotation() {
        // e^{tJ} with J = [[0, 1], [-1, 0]] rotates by angle t
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        let t = 40.0;
        let out = expm_apply(&m, t, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(close(out[0], c(t.cos(), 0.0), 1e-12));
        assert!(close(out[1], c(-t.sin(), 0.0), 1e-12));
    }

    #[test]
    fn expm_rejects_bad_input() {
        let m = ComplexMatrix::identity(2);
        assert!(expm_apply(&m, 1.0, &[c(1.0, 0.0)]).is_err());
        assert!(expm_apply(&m, -1.0, &[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn lu_solves() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0)],
            vec![c(3.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            vec![c(1.0, 1.0), c(1.0, 0.0), c(4.0, 0.0)],
        ])
        .unwrap();
        let x = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let b = a.mul_vec(&x);
        let got = Lu::new(&a).unwrap().solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!(close(*g, *w, 1e-13));
        }
    }

    #[test]
    fn kron_layout() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = ComplexMatrix::identity(2);
        let k = a.kron(&b);
        assert_eq!(k[(0, 2)], c(2.0, 0.0));
        assert_eq!(k[(3, 1)], c(3.0, 0.0));
        assert_eq!(k[(1, 0)], c(0.0, 0.0));
    }
}
