use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix held by a single worker.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
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
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Columns `[start, end)` as a new matrix.
    pub fn col_block(&self, start: usize, end: usize) -> Self {
        Self::from_fn(self.rows, end - start, |i, j| self.get(i, start + j))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Plain product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(gemm(View::of(self, false), View::of(other, false)))
    }
}

/// Strided read-only access to a dense block, possibly transposed.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T> {
    data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    row_stride: usize,
    col_stride: usize,
}

impl<'a, T: Scalar> View<'a, T> {
    pub fn of(m: &'a Mat<T>, transposed: bool) -> Self {
        if transposed {
            Self {
                data: &m.data,
                rows: m.cols,
                cols: m.rows,
                row_stride: 1,
                col_stride: m.cols,
            }
        } else {
            Self {
                data: &m.data,
                rows: m.rows,
                cols: m.cols,
                row_stride: m.cols,
                col_stride: 1,
            }
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.row_stride + j * self.col_stride]
    }

    #[cfg(test)]
    pub fn to_mat(self) -> Mat<T> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j))
    }
}

/// `a * b` accumulated in i-k-j order.
pub(crate) fn gemm<T: Scalar>(a: View<'_, T>, b: View<'_, T>) -> Mat<T> {
    debug_assert_eq!(a.cols, b.rows);
    let (m, n) = (a.rows, b.cols);
    let mut out = Mat::zeros(m, n);
    for i in 0..m {
        let row = &mut out.data[i * n..(i + 1) * n];
        for k in 0..a.cols {
            let aik = a.at(i, k);
            if aik == T::zero() {
                continue;
            }
            for (j, c) in row.iter_mut().enumerate() {
                *c = *c + aik * b.at(k, j);
            }
        }
    }
    out
}
