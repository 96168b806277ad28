use super::Layout;
use crate::comm::Communicator;
use crate::distmat::{matmul, DistMatrix, Mat, Partition};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A linear map `K: ℝᵖ → ℝˡ` acting on local slices.
pub trait LinearOperator<T: Scalar> {
    /// Global `(l, p)`.
    fn shape(&self) -> (usize, usize);
    fn forward(&self, x: &[T]) -> Result<Vec<T>>;
    fn adjoint(&self, y: &[T]) -> Result<Vec<T>>;

    fn primal_layout(&self) -> Layout<'_> {
        Layout::Local
    }

    fn dual_layout(&self) -> Layout<'_> {
        Layout::Local
    }

    /// Length of this worker's slice of a primal vector.
    fn primal_local_len(&self) -> usize {
        self.shape().1
    }

    fn dual_local_len(&self) -> usize {
        self.shape().0
    }
}

impl<T: Scalar, K: LinearOperator<T> + ?Sized> LinearOperator<T> for &K {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        (**self).forward(x)
    }
    fn adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        (**self).adjoint(y)
    }
    fn primal_layout(&self) -> Layout<'_> {
        (**self).primal_layout()
    }
    fn dual_layout(&self) -> Layout<'_> {
        (**self).dual_layout()
    }
    fn primal_local_len(&self) -> usize {
        (**self).primal_local_len()
    }
    fn dual_local_len(&self) -> usize {
        (**self).dual_local_len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Identity(pub usize);

impl<T: Scalar> LinearOperator<T> for Identity {
    fn shape(&self) -> (usize, usize) {
        (self.0, self.0)
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(x.to_vec())
    }

    fn adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        Ok(y.to_vec())
    }
}

/// A dense matrix held whole by one worker.
#[derive(Clone, Debug)]
pub struct DenseOperator<T> {
    a: Mat<T>,
}

impl<T: Scalar> DenseOperator<T> {
    pub fn new(a: Mat<T>) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.a
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("vector of length {got}, operator expects {want}")));
    }
    Ok(())
}

impl<T: Scalar> LinearOperator<T> for DenseOperator<T> {
    fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(x.len(), self.a.cols())?;
        Ok((0..self.a.rows())
            .map(|i| self.a.row(i).iter().zip(x).fold(T::zero(), |s, (&a, &v)| s + a * v))
            .collect())
    }

    fn adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        check_len(y.len(), self.a.rows())?;
        let mut out = vec![T::zero(); self.a.cols()];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.a.row(i)) {
                *o = *o + a * yi;
            }
        }
        Ok(out)
    }
}

/// A distributed matrix used as an operator.
///
/// With `K` split by columns the primal vector is split by rows and the
/// dual vector is replicated; with `K` split by rows the primal vector is
/// replicated and the dual vector split. A replicated `K` keeps both
/// vectors replicated.
#[derive(Clone, Debug)]
pub struct DistOperator<'c, T: Scalar> {
    comm: &'c Communicator,
    k: DistMatrix<T>,
}

impl<'c, T: Scalar> DistOperator<'c, T> {
    pub fn new(comm: &'c Communicator, k: DistMatrix<T>) -> Self {
        Self { comm, k }
    }

    pub fn matrix(&self) -> &DistMatrix<T> {
        &self.k
    }

    fn vector(&self, v: &[T], len: usize, split: bool) -> Result<DistMatrix<T>> {
        let part = if split {
            Partition::ByRow
        } else {
            Partition::Replicated
        };
        DistMatrix::from_local(self.comm, len, 1, part, Mat::from_vec(v.len(), 1, v.to_vec())?)
    }

    fn apply(&self, k: &DistMatrix<T>, v: &[T], split_in: bool) -> Result<Vec<T>> {
        let (_, n) = k.shape();
        if k.partition() == Partition::Replicated {
            check_len(v.len(), n)?;
            return Ok(k.block().product_dense(k.is_transposed(), &Mat::from_vec(n, 1, v.to_vec())?).into_vec());
        }
        let x = self.vector(v, n, split_in)?;
        let out = matmul(self.comm, k, &x, None)?;
        Ok(out.local_dense().into_vec())
    }
}

impl<T: Scalar> LinearOperator<T> for DistOperator<'_, T> {
    fn shape(&self) -> (usize, usize) {
        self.k.shape()
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.apply(&self.k, x, self.k.partition() == Partition::ByCol)
    }

    fn adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        self.apply(&self.k.t(), y, self.k.partition() == Partition::ByRow)
    }

    fn primal_layout(&self) -> Layout<'_> {
        match self.k.partition() {
            Partition::ByCol => Layout::Split(self.comm),
            _ => Layout::Local,
        }
    }

    fn dual_layout(&self) -> Layout<'_> {
        match self.k.partition() {
            Partition::ByRow => Layout::Split(self.comm),
            _ => Layout::Local,
        }
    }

    fn primal_local_len(&self) -> usize {
        match self.k.partition() {
            Partition::ByCol => self.k.local_shape().1,
            _ => self.k.cols(),
        }
    }

    fn dual_local_len(&self) -> usize {
        match self.k.partition() {
            Partition::ByRow => self.k.local_shape().0,
            _ => self.k.rows(),
        }
    }
}

/// `[A; B]`: both blocks share the primal space and their dual vectors
/// are concatenated. Both blocks must use the same layouts.
#[derive(Clone, Debug)]
pub struct Stacked<A, B> {
    pub top: A,
    pub bottom: B,
}

impl<A, B> Stacked<A, B> {
    pub fn new(top: A, bottom: B) -> Self {
        Self { top, bottom }
    }
}

impl<T: Scalar, A: LinearOperator<T>, B: LinearOperator<T>> LinearOperator<T> for Stacked<A, B> {
    fn shape(&self) -> (usize, usize) {
        let (l1, p) = self.top.shape();
        let (l2, _) = self.bottom.shape();
        (l1 + l2, p)
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = self.top.forward(x)?;
        y.extend(self.bottom.forward(x)?);
        Ok(y)
    }

    fn adjoint(&self, y: &[T]) -> Result<Vec<T>> {
        let n = self.top.dual_local_len();
        if y.len() < n {
            return Err(Error::Shape("dual vector too short for stacked operator".into()));
        }
        let mut a = self.top.adjoint(&y[..n])?;
        let b = self.bottom.adjoint(&y[n..])?;
        for (u, v) in a.iter_mut().zip(b) {
            *u = *u + v;
        }
        Ok(a)
    }

    fn primal_layout(&self) -> Layout<'_> {
        self.top.primal_layout()
    }

    fn dual_layout(&self) -> Layout<'_> {
        self.top.dual_layout()
    }

    fn primal_local_len(&self) -> usize {
        self.top.primal_local_len()
    }

    fn dual_local_len(&self) -> usize {
        self.top.dual_local_len() + self.bottom.dual_local_len()
    }
}
