use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            let row = self.row(r);
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.6}")).collect();
            writeln!(f, "  {}{}", shown.join(", "), if self.cols > 8 { ", ..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "buffer of length {} cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input (test convenience).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&v| T::from_f64(v)));
        }
        Self { rows: r, cols: c, data }
    }

    pub fn column(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · other`. Zero entries of `self` are skipped, which makes sparse
    /// bag-of-words feature matrices and post-ReLU activations cheap without
    /// changing the result.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.shape(), other.shape()));
        }
        let n = other.cols;
        let mut out = Self::zeros(self.rows, n);
        let mut nonzero: Vec<(usize, T)> = Vec::with_capacity(self.cols);
        for i in 0..self.rows {
            nonzero.clear();
            nonzero.extend(self.row(i).iter().enumerate().filter(|(_, &a)| a != T::zero()).map(|(k, &a)| (k, a)));
            let out_row = &mut out.data[i * n..(i + 1) * n];
            let b = |k: usize| &other.data[k * n..(k + 1) * n];
            let mut quads = nonzero.chunks_exact(4);
            for q in &mut quads {
                axpy4(out_row, [q[0].1, q[1].1, q[2].1, q[3].1], [b(q[0].0), b(q[1].0), b(q[2].0), b(q[3].0)]);
            }
            for &(k, a) in quads.remainder() {
                axpy(out_row, a, b(k));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape("matmul_tn", self.shape(), other.shape()));
        }
        let n = other.cols;
        let mut out = Self::zeros(self.cols, n);
        let quads = self.rows / 4 * 4;
        for i in (0..quads).step_by(4) {
            let bs = [other.row(i), other.row(i + 1), other.row(i + 2), other.row(i + 3)];
            for k in 0..self.cols {
                let a = [self.get(i, k), self.get(i + 1, k), self.get(i + 2, k), self.get(i + 3, k)];
                if a.iter().all(|&v| v == T::zero()) {
                    continue;
                }
                axpy4(&mut out.data[k * n..(k + 1) * n], a, bs);
            }
        }
        for i in quads..self.rows {
            let b_row = other.row(i);
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != T::zero() {
                    axpy(&mut out.data[k * n..(k + 1) * n], a, b_row);
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`. The right operand is a weight matrix in practice, so
    /// transposing it is cheap and lets the row kernel of `matmul` do the work.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape("matmul_nt", self.shape(), other.shape()));
        }
        self.matmul(&other.transpose())
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn mean_abs(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        let total = self.data.iter().fold(T::zero(), |acc, &v| acc + v.abs());
        total / T::from_usize(self.data.len())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the largest entry in each row; ties resolve to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

#[inline]
fn axpy<T: Real>(out: &mut [T], a: T, b: &[T]) {
    for (o, &x) in out.iter_mut().zip(b) {
        *o += a * x;
    }
}

/// Four fused rank-1 row updates; one pass over `out` instead of four.
#[inline]
fn axpy4<T: Real>(out: &mut [T], a: [T; 4], b: [&[T]; 4]) {
    let n = out.len();
    let (b0, b1, b2, b3) = (&b[0][..n], &b[1][..n], &b[2][..n], &b[3][..n]);
    for j in 0..n {
        out[j] += a[0] * b0[j] + a[1] * b1[j] + a[2] * b2[j] + a[3] * b3[j];
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn matmul_variants_agree_with_naive_loops() {
        let mut s = 7;
        let a = Matrix::from_fn(5, 4, |_, _| lcg(&mut s));
        let b = Matrix::from_fn(4, 3, |_, _| lcg(&mut s));
        let c = Matrix::from_fn(5, 3, |_, _| lcg(&mut s));
        assert!(a.matmul(&b).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-12);
        assert!(a.matmul_tn(&c).unwrap().max_abs_diff(&naive(&a.transpose(), &c)) < 1e-12);
        assert!(c.matmul_nt(&b).unwrap().max_abs_diff(&naive(&c, &b.transpose())) < 1e-12);
    }

    #[test]
    fn blocked_kernels_handle_remainders_and_zero_entries() {
        let mut s = 3;
        for (n, k, m) in [(1, 1, 1), (7, 9, 5), (13, 6, 1), (4, 8, 4)] {
            let a = Matrix::from_fn(n, k, |i, j| if (i + j) % 3 == 0 { 0.0 } else { lcg(&mut s) });
            let b = Matrix::from_fn(k, m, |_, _| lcg(&mut s));
            let c = Matrix::from_fn(n, m, |_, _| lcg(&mut s));
            assert!(a.matmul(&b).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-12);
            assert!(a.matmul_tn(&c).unwrap().max_abs_diff(&naive(&a.transpose(), &c)) < 1e-12);
        }
    }

    #[test]
    fn matmul_rejects_mismatched_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let err = a.matmul(&a).unwrap_err();
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        let m = Matrix::<f64>::from_rows(&[[1.0, 1.0, 0.0], [0.0, 2.0, 3.0]]);
        assert_eq!(m.argmax_rows(), vec![0, 2]);
    }
}
