use super::dense::{Mat, View};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compressed sparse row block.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    pub fn from_dense(m: &Mat<T>) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != T::zero() {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut m = Mat::zeros(rows, cols);
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::Shape(format!("entry ({i},{j}) outside {rows}x{cols}")));
            }
            m.set(i, j, m.get(i, j) + v);
        }
        Ok(Self::from_dense(&m))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row_entries(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Columns `[start, end)` re-indexed from zero.
    pub fn col_block(&self, start: usize, end: usize) -> Self {
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                if j >= start && j < end {
                    indices.push(j - start);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: end - start,
            indptr,
            indices,
            values,
        }
    }

    pub fn row_block(&self, start: usize, end: usize) -> Self {
        let base = self.indptr[start];
        Self {
            rows: end - start,
            cols: self.cols,
            indptr: self.indptr[start..=end].iter().map(|p| p - base).collect(),
            indices: self.indices[base..self.indptr[end]].to_vec(),
            values: self.values[base..self.indptr[end]].to_vec(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Csr<U> {
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = f(*v);
        }
        out
    }
}

/// `op(a) * b` with `a` sparse; `op` transposes when `a_t` is set.
pub(crate) fn spmm<T: Scalar>(a: &Csr<T>, a_t: bool, b: View<'_, T>) -> Mat<T> {
    let n = b.cols;
    if !a_t {
        debug_assert_eq!(a.cols, b.rows);
        let mut out = Mat::zeros(a.rows, n);
        for i in 0..a.rows {
            let row = &mut out.as_mut_slice()[i * n..(i + 1) * n];
            for (k, v) in a.row_entries(i) {
                for (j, c) in row.iter_mut().enumerate() {
                    *c = *c + v * b.at(k, j);
                }
            }
        }
        out
    } else {
        debug_assert_eq!(a.rows, b.rows);
        let mut out = Mat::zeros(a.cols, n);
        for k in 0..a.rows {
            for (i, v) in a.row_entries(k) {
                let row = &mut out.as_mut_slice()[i * n..(i + 1) * n];
                for (j, c) in row.iter_mut().enumerate() {
                    *c = *c + v * b.at(k, j);
                }
            }
        }
        out
    }
}
