//! Dense complex linear algebra used by every solver.
//!
//! Storage is row-major `Vec<Complex64>`. Problem sizes are a few hundred
//! by a few thousand, so plain loops over contiguous rows are fast enough
//! and keep results bit-reproducible.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// Dense complex vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    /// Wraps `data`, rejecting NaN or infinite entries.
    pub fn new(data: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            data: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(data: Vec<Complex64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.data.iter()
    }

    /// Sum of complex moduli.
    pub fn norm1(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).sum()
    }

    pub fn norm2_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sqr().sqrt()
    }

    /// Largest complex modulus, 0 for an empty vector.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Number of entries with nonzero modulus.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|c| c.norm_sqr() > 0.0).count()
    }

    /// Hermitian inner product `<self, other> = sum conj(self_i) * other_i`.
    pub fn dot(&self, other: &Self) -> Result<Complex64> {
        check_dim("dot", self.len(), other.len())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("add", self.len(), other.len())?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim("sub", self.len(), other.len())?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|&a| a * factor).collect())
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|&a| a * factor).collect())
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_vec_unchecked(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.data[i]
    }
}

impl FromIterator<Complex64> for ComplexVector {
    /// Collects without a finiteness check; callers producing values from
    /// finite arithmetic on finite inputs rely on this.
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Self::from_vec_unchecked(iter.into_iter().collect())
    }
}

/// Dense row-major complex matrix.
///
/// When every entry is real (BPSK training matrices), a packed copy of the
/// real parts is kept and products use real-by-complex arithmetic.
#[derive(Debug, Clone)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    real: Option<Vec<f64>>,
    /// Column-major copy of `real`, for products with sparse vectors.
    real_t: Option<Vec<f64>>,
}

impl PartialEq for ComplexMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

fn real_parts(data: &[Complex64]) -> Option<Vec<f64>> {
    data.iter()
        .all(|c| c.im == 0.0)
        .then(|| data.iter().map(|c| c.re).collect())
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        check_dim("ComplexMatrix::new", rows * cols, data.len())?;
        if let Some(i) = data.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self::from_parts_unchecked(rows, cols, data))
    }

    fn from_parts_unchecked(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        let real = real_parts(&data);
        let real_t = real.as_ref().map(|re| {
            let mut t = vec![0.0; rows * cols];
            for i in 0..rows {
                for j in 0..cols {
                    t[j * rows + i] = re[i * cols + j];
                }
            }
            t
        });
        Self {
            rows,
            cols,
            data,
            real,
            real_t,
        }
    }

    /// True when all entries have zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.real.is_some()
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            check_dim("ComplexMatrix::from_rows", n_cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self::from_parts_unchecked(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Copies rows `start..start + count` into a new matrix.
    pub fn row_block(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.rows {
            return Err(Error::InvalidParameter(format!(
                "row block {start}..{} out of range for {} rows",
                start + count,
                self.rows
            )));
        }
        let data = self.data[start * self.cols..(start + count) * self.cols].to_vec();
        Ok(Self::from_parts_unchecked(count, self.cols, data))
    }

    /// `A v`.
    pub fn matvec(&self, v: &ComplexVector) -> Result<ComplexVector> {
        check_dim("matvec", self.cols, v.len())?;
        let v = v.as_slice();
        if let Some(ret) = &self.real_t {
            let nnz = v.iter().filter(|c| c.re != 0.0 || c.im != 0.0).count();
            if nnz * 4 <= self.cols {
                let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
                for (col, &vj) in ret.chunks_exact(self.rows).zip(v) {
                    if vj.re == 0.0 && vj.im == 0.0 {
                        continue;
                    }
                    for (o, &a) in out.iter_mut().zip(col) {
                        o.re += a * vj.re;
                        o.im += a * vj.im;
                    }
                }
                return Ok(ComplexVector::from_vec_unchecked(out));
            }
        }
        if let Some(re) = &self.real {
            return Ok(re
                .chunks_exact(self.cols)
                .map(|row| real_row_dot(row, v))
                .collect());
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `A^H v`.
    pub fn adjoint_matvec(&self, v: &ComplexVector) -> Result<ComplexVector> {
        check_dim("adjoint_matvec", self.rows, v.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        if let Some(re) = &self.real {
            for (row, &vi) in re.chunks_exact(self.cols).zip(v.as_slice()) {
                for (o, &a) in out.iter_mut().zip(row) {
                    o.re += a * vi.re;
                    o.im += a * vi.im;
                }
            }
            return Ok(ComplexVector::from_vec_unchecked(out));
        }
        for (row, &vi) in self.data.chunks_exact(self.cols).zip(v.as_slice()) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * vi;
            }
        }
        Ok(ComplexVector::from_vec_unchecked(out))
    }

    /// Builds the `rows x support.len()` submatrix of the selected columns.
    pub fn select_columns(&self, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Empty("column support"));
        }
        if let Some(&bad) = support.iter().find(|&&j| j >= self.cols) {
            return Err(Error::InvalidParameter(format!(
                "column {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * support.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(support.iter().map(|&j| row[j]));
        }
        Ok(Self::from_parts_unchecked(self.rows, support.len(), data))
    }
}

/// `sum_j row[j] * v[j]` for a real row, with four independent partial
/// sums so the loop pipelines.
fn real_row_dot(row: &[f64], v: &[Complex64]) -> Complex64 {
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    let mut rc = row.chunks_exact(4);
    let mut vc = v.chunks_exact(4);
    for (r, x) in (&mut rc).zip(&mut vc) {
        for k in 0..4 {
            acc[k].re += r[k] * x[k].re;
            acc[k].im += r[k] * x[k].im;
        }
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for (&a, b) in rc.remainder().iter().zip(vc.remainder()) {
        tail.re += a * b.re;
        tail.im += a * b.im;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Toeplitz convolution matrix with `A[i, j] = probe[i - j]` (zero outside
/// the probe), so `A x` is the linear convolution of `probe` and `x`
/// truncated to the first `num_obs` samples.
pub fn build_convolution_matrix(
    probe: &ComplexVector,
    channel_len: usize,
    num_obs: usize,
) -> Result<ComplexMatrix> {
    if probe.is_empty() {
        return Err(Error::Empty("probe"));
    }
    if channel_len == 0 || num_obs == 0 {
        return Err(Error::InvalidParameter(format!(
            "channel_len and num_obs must be positive, got {channel_len} and {num_obs}"
        )));
    }
    let p = probe.as_slice();
    let mut data = vec![Complex64::new(0.0, 0.0); num_obs * channel_len];
    for i in 0..num_obs {
        let row = &mut data[i * channel_len..(i + 1) * channel_len];
        for (j, entry) in row.iter_mut().enumerate().take(i + 1) {
            if let Some(&s) = p.get(i - j) {
                *entry = s;
            }
        }
    }
    ComplexMatrix::new(num_obs, channel_len, data)
}

/// Outcome of power iteration on the Gram operator `v -> A^H A v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the relative change dropped below `tol`.
    pub converged: bool,
}

const POWER_FALLBACK_SEED: u64 = 0x5eed_0f_9a11;

/// Estimates `lambda_max(A^H A)` by power iteration.
///
/// Starts from the all-ones vector; if that lies in the null space of `A`
/// a seeded random start is used instead.
pub fn max_eigenvalue_gram(a: &ComplexMatrix, tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    if a.frobenius_norm() == 0.0 {
        return Err(Error::InvalidParameter("matrix is identically zero".into()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "power iteration needs tol > 0 and max_iter > 0, got {tol} and {max_iter}"
        )));
    }

    let n = a.cols();
    let mut v: ComplexVector = vec![Complex64::new(1.0, 0.0); n].into_iter().collect();
    if a.matvec(&v)?.norm2() <= 1e-12 * a.frobenius_norm() * (n as f64).sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_FALLBACK_SEED);
        v = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
    }
    v = v.scale_real(1.0 / v.norm2());

    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let av = a.matvec(&v)?;
        // Rayleigh quotient of the Gram matrix for unit v is ||A v||^2.
        let next = av.norm2_sqr();
        let w = a.adjoint_matvec(&av)?;
        let w_norm = w.norm2();
        if w_norm == 0.0 {
            return Ok(EigenEstimate {
                value: next,
                iterations: it,
                converged: true,
            });
        }
        v = w.scale_real(1.0 / w_norm);
        if it > 1 && (next - lambda).abs() <= tol * next {
            return Ok(EigenEstimate {
                value: next,
                iterations: it,
                converged: true,
            });
        }
        lambda = next;
    }
    Ok(EigenEstimate {
        value: lambda,
        iterations: max_iter,
        converged: false,
    })
}
