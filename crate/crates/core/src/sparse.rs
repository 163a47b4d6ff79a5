//! Compressed sparse row matrices and sparse-dense products.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists. Columns within a row must
    /// be strictly increasing.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(c, v) in row {
                if c >= cols {
                    return Err(Error::Graph(format!("column {c} out of range in row {r}")));
                }
                if prev.is_some_and(|p| p >= c) {
                    return Err(Error::Graph(format!("row {r} columns not strictly increasing")));
                }
                prev = Some(c);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
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
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.row(i).1.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.rows, rows).expect("transpose of a valid CSR matrix is valid")
    }

    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Sparse-dense product `self · h`. Each output row accumulates its
    /// nonzeros in column order, so the result is bitwise reproducible.
    pub fn spmm(&self, h: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != h.rows() {
            return Err(Error::shape("spmm", (self.rows, self.cols), h.shape()));
        }
        let width = h.cols();
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, &b) in out_row.iter_mut().zip(h.row(j)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }
}

/// A sparse operator paired with its transpose, for use on the tape
/// (the backward pass of `S·H` is `Sᵀ·G`).
#[derive(Debug, Clone)]
pub struct SparseOperator<T> {
    forward: CsrMatrix<T>,
    transpose: Option<CsrMatrix<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn new(forward: CsrMatrix<T>) -> Self {
        let transpose = if forward.is_symmetric() {
            None
        } else {
            Some(forward.transpose())
        };
        Self { forward, transpose }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            forward: CsrMatrix::identity(n),
            transpose: None,
        }
    }

    #[inline]
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.forward
    }

    #[inline]
    pub fn transposed(&self) -> &CsrMatrix<T> {
        self.transpose.as_ref().unwrap_or(&self.forward)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.forward.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.forward.cols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmm_matches_dense_product() {
        let s = CsrMatrix::from_rows(3, vec![vec![(0, 2.0), (2, 1.0)], vec![], vec![(1, -1.0)]]).unwrap();
        let h = Matrix::<f64>::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let got = s.spmm(&h).unwrap();
        let want = s.to_dense().matmul(&h).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn rejects_unsorted_columns() {
        assert!(CsrMatrix::<f64>::from_rows(3, vec![vec![(2, 1.0), (1, 1.0)]]).is_err());
    }

    #[test]
    fn transpose_roundtrip() {
        let s = CsrMatrix::from_rows(4, vec![vec![(0, 1.0), (3, 2.0)], vec![(1, 5.0)]]).unwrap();
        assert_eq!(s.transpose().transpose(), s);
        assert_eq!(s.transpose().get(3, 0), 2.0);
    }
}
