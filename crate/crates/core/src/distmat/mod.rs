//! Matrices split into equal row or column blocks across the workers of a
//! world, or replicated on every worker.
//!
//! A [`DistMatrix`] carries a transpose tag: [`DistMatrix::t`] flips the
//! logical shape and swaps `ByRow`/`ByCol` while the stored block is shared
//! and left untouched. Every accessor below speaks in logical coordinates.

mod dense;
pub mod io;
mod matmul;
mod sparse;

use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use dense::Mat;
pub use matmul::{matmul, Scenario};
pub use sparse::Csr;

pub(crate) use dense::{gemm, View};
pub(crate) use sparse::spmm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partition {
    ByRow,
    ByCol,
    Replicated,
}

impl Partition {
    /// The partition seen through a transpose.
    pub fn flip(self) -> Self {
        match self {
            Self::ByRow => Self::ByCol,
            Self::ByCol => Self::ByRow,
            Self::Replicated => Self::Replicated,
        }
    }

    pub fn is_distributed(self) -> bool {
        self != Self::Replicated
    }
}

/// Initial contents for [`DistMatrix::create`].
#[derive(Clone, Copy, Debug)]
pub enum Init<'a, T> {
    Uniform { lo: f64, hi: f64 },
    Normal,
    Zeros,
    Ones,
    /// Scatter a full matrix that only `root` needs to supply.
    FromFull { root: usize, data: Option<&'a Mat<T>> },
}

/// Stored local block.
#[derive(Clone, Debug, PartialEq)]
pub enum Block<T> {
    Dense(Mat<T>),
    Sparse(Csr<T>),
}

impl<T: Scalar> Block<T> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Dense(m) => m.shape(),
            Self::Sparse(s) => (s.rows(), s.cols()),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        match self {
            Self::Dense(m) => m.get(i, j),
            Self::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> Mat<T> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Sparse(s) => s.to_dense(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Block<U> {
        match self {
            Self::Dense(m) => Block::Dense(m.cast()),
            Self::Sparse(s) => Block::Sparse(s.cast()),
        }
    }

    /// `op(self) * op(other)` where `op` transposes per flag.
    pub(crate) fn product(&self, self_t: bool, other: &Block<T>, other_t: bool) -> Mat<T> {
        let dense_other;
        let b = match other {
            Self::Dense(m) => m,
            Self::Sparse(s) => {
                dense_other = s.to_dense();
                &dense_other
            }
        };
        self.product_view(self_t, View::of(b, other_t))
    }

    pub(crate) fn product_dense(&self, self_t: bool, other: &Mat<T>) -> Mat<T> {
        self.product_view(self_t, View::of(other, false))
    }

    fn product_view(&self, self_t: bool, bv: View<'_, T>) -> Mat<T> {
        match self {
            Self::Dense(a) => gemm(View::of(a, self_t), bv),
            Self::Sparse(a) => spmm(a, self_t, bv),
        }
    }
}

/// Unary elementwise maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Exp,
    Log,
    Sqrt,
    Abs,
    Clamp(f64, f64),
    SoftThreshold(f64),
}

impl Unary {
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Self::Exp => v.exp(),
            Self::Log => v.ln(),
            Self::Sqrt => v.sqrt(),
            Self::Abs => v.abs(),
            Self::Clamp(lo, hi) => v.max(T::lit(lo)).min(T::lit(hi)),
            Self::SoftThreshold(l) => soft_threshold(v, T::lit(l)),
        }
    }
}

#[inline]
pub(crate) fn soft_threshold<T: Scalar>(v: T, l: T) -> T {
    if v > l {
        v - l
    } else if v < -l {
        v + l
    } else {
        T::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    #[inline]
    pub fn apply<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            Self::Add => a + b,
            Self::Sub => a - b,
            Self::Mul => a * b,
            Self::Div => a / b,
            Self::Pow => a.powf(b),
        }
    }
}

/// Extent of [`DistMatrix::reduce_sum`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Along {
    All,
    /// Sum down the rows, giving a `1 x cols` result.
    Rows,
    /// Sum across the columns, giving a `rows x 1` result.
    Cols,
}

#[derive(Clone, Debug)]
pub enum Reduced<T: Scalar> {
    Scalar(T),
    Matrix(DistMatrix<T>),
}

/// A globally shaped matrix whose payload lives on the workers of a world.
#[derive(Clone, Debug)]
pub struct DistMatrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    partition: Partition,
    block: Arc<Block<T>>,
    transposed: bool,
    rank: usize,
    world: usize,
}

fn check_split(len: usize, world: usize, what: &str) -> Result<usize> {
    if !len.is_multiple_of(world) {
        return Err(Error::Partition(format!(
            "{what} {len} is not a multiple of the world size {world}"
        )));
    }
    Ok(len / world)
}

fn storage_local_shape(
    rows: usize,
    cols: usize,
    partition: Partition,
    world: usize,
) -> Result<(usize, usize)> {
    Ok(match partition {
        Partition::ByRow => (check_split(rows, world, "row count")?, cols),
        Partition::ByCol => (rows, check_split(cols, world, "column count")?),
        Partition::Replicated => (rows, cols),
    })
}

/// Reorders a row-major `rows x cols` matrix into `world` consecutive
/// row-major column blocks, or back when `inverse` is set.
fn col_blocks<T: Scalar>(data: &[T], rows: usize, cols: usize, world: usize, inverse: bool) -> Vec<T> {
    let b = cols / world;
    let mut out = vec![T::zero(); data.len()];
    for t in 0..world {
        for i in 0..rows {
            for j in 0..b {
                let full = i * cols + t * b + j;
                let blocked = t * rows * b + i * b + j;
                if inverse {
                    out[full] = data[blocked];
                } else {
                    out[blocked] = data[full];
                }
            }
        }
    }
    out
}

impl<T: Scalar> DistMatrix<T> {
    /// Builds a matrix of global shape `rows x cols`. Random initializers
    /// draw the full matrix on rank 0 from `seed` and scatter it, so the
    /// values do not depend on the world size.
    pub fn create(
        comm: &Communicator,
        rows: usize,
        cols: usize,
        partition: Partition,
        init: Init<'_, T>,
        seed: u64,
    ) -> Result<Self> {
        let (lr, lc) = storage_local_shape(rows, cols, partition, comm.world_size())?;
        let local = |v: T| Mat::filled(lr, lc, v);
        match init {
            Init::Zeros => Self::from_local(comm, rows, cols, partition, local(T::zero())),
            Init::Ones => Self::from_local(comm, rows, cols, partition, local(T::one())),
            Init::FromFull { root, data } => Self::from_full(comm, root, data, rows, cols, partition),
            Init::Uniform { .. } | Init::Normal => {
                let full = comm
                    .is_root()
                    .then(|| random_mat(rows, cols, &init, seed))
                    .transpose()?;
                Self::from_full(comm, 0, full.as_ref(), rows, cols, partition)
            }
        }
    }

    /// Distributes `full`, which only `root` has to provide.
    pub fn from_full(
        comm: &Communicator,
        root: usize,
        full: Option<&Mat<T>>,
        rows: usize,
        cols: usize,
        partition: Partition,
    ) -> Result<Self> {
        let world = comm.world_size();
        let (lr, lc) = storage_local_shape(rows, cols, partition, world)?;
        let payload: Vec<T> = if comm.rank() == root {
            let m = full.ok_or_else(|| Error::Contract("root must supply the full matrix".into()))?;
            if m.shape() != (rows, cols) {
                return Err(Error::Shape(format!(
                    "expected a {rows}x{cols} matrix, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            match partition {
                Partition::ByCol => col_blocks(m.as_slice(), rows, cols, world, false),
                _ => m.as_slice().to_vec(),
            }
        } else {
            vec![T::zero(); rows * cols]
        };
        let local = match partition {
            Partition::Replicated => comm.broadcast(root, &payload)?,
            _ => comm.scatter(root, &payload)?,
        };
        Self::from_local(comm, rows, cols, partition, Mat::from_vec(lr, lc, local)?)
    }

    /// Wraps a block already held by this worker.
    pub fn from_local(
        comm: &Communicator,
        rows: usize,
        cols: usize,
        partition: Partition,
        local: Mat<T>,
    ) -> Result<Self> {
        Self::from_block(comm, rows, cols, partition, Block::Dense(local))
    }

    pub fn from_block(
        comm: &Communicator,
        rows: usize,
        cols: usize,
        partition: Partition,
        block: Block<T>,
    ) -> Result<Self> {
        Self::assemble(comm.rank(), comm.world_size(), rows, cols, partition, block)
    }

    fn assemble(
        rank: usize,
        world: usize,
        rows: usize,
        cols: usize,
        partition: Partition,
        block: Block<T>,
    ) -> Result<Self> {
        let expect = storage_local_shape(rows, cols, partition, world)?;
        if block.shape() != expect {
            return Err(Error::Shape(format!(
                "local block is {:?}, expected {expect:?} for a {rows}x{cols} {partition:?} matrix",
                block.shape()
            )));
        }
        Ok(Self {
            rows,
            cols,
            partition,
            block: Arc::new(block),
            transposed: false,
            rank,
            world,
        })
    }

    /// A matrix identical on every worker, built without communication.
    pub fn replicated(comm: &Communicator, m: Mat<T>) -> Self {
        let (rows, cols) = m.shape();
        Self {
            rows,
            cols,
            partition: Partition::Replicated,
            block: Arc::new(Block::Dense(m)),
            transposed: false,
            rank: comm.rank(),
            world: comm.world_size(),
        }
    }

    /// Same layout as `self` with a new logical local block.
    fn like(&self, partition: Partition, rows: usize, cols: usize, local: Mat<T>) -> Result<Self> {
        Self::assemble(self.rank, self.world, rows, cols, partition, Block::Dense(local))
    }

    /// Stores the local block in CSR form.
    /// Same layout with every stored value converted to `U`.
    pub fn cast<U: Scalar>(&self) -> DistMatrix<U> {
        DistMatrix {
            rows: self.rows,
            cols: self.cols,
            partition: self.partition,
            block: Arc::new(self.block.cast()),
            transposed: self.transposed,
            rank: self.rank,
            world: self.world,
        }
    }

    pub fn to_sparse(&self) -> Self {
        let mut out = self.clone();
        if let Block::Dense(m) = &*self.block {
            out.block = Arc::new(Block::Sparse(Csr::from_dense(m)));
        }
        out
    }

    pub fn is_sparse(&self) -> bool {
        matches!(*self.block, Block::Sparse(_))
    }

    pub fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    pub fn partition(&self) -> Partition {
        if self.transposed {
            self.partition.flip()
        } else {
            self.partition
        }
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn world_size(&self) -> usize {
        self.world
    }

    /// Shape of this worker's share in logical orientation.
    pub fn local_shape(&self) -> (usize, usize) {
        let (r, c) = self.block.shape();
        if self.transposed {
            (c, r)
        } else {
            (r, c)
        }
    }

    /// Global logical index of this worker's `(0, 0)` entry.
    pub fn local_offset(&self) -> (usize, usize) {
        let (lr, lc) = self.local_shape();
        match self.partition() {
            Partition::ByRow => (self.rank * lr, 0),
            Partition::ByCol => (0, self.rank * lc),
            Partition::Replicated => (0, 0),
        }
    }

    #[inline]
    pub fn local_get(&self, i: usize, j: usize) -> T {
        if self.transposed {
            self.block.get(j, i)
        } else {
            self.block.get(i, j)
        }
    }

    pub fn block(&self) -> &Block<T> {
        &self.block
    }

    /// The local share in logical orientation as a dense row-major matrix.
    pub fn local_dense(&self) -> Mat<T> {
        match (&*self.block, self.transposed) {
            (Block::Dense(m), false) => m.clone(),
            (Block::Dense(m), true) => m.transpose(),
            (Block::Sparse(s), t) => {
                let d = s.to_dense();
                if t {
                    d.transpose()
                } else {
                    d
                }
            }
        }
    }

    /// Local values of a dense block in storage order. For a vector this is
    /// its local segment regardless of the transpose tag.
    pub fn local_values(&self) -> Option<&[T]> {
        match &*self.block {
            Block::Dense(m) => Some(m.as_slice()),
            Block::Sparse(_) => None,
        }
    }

    /// Mutable local values; densifies a sparse block and unshares storage.
    pub fn local_values_mut(&mut self) -> &mut [T] {
        if let Block::Sparse(s) = &*self.block {
            self.block = Arc::new(Block::Dense(s.to_dense()));
        }
        match Arc::make_mut(&mut self.block) {
            Block::Dense(m) => m.as_mut_slice(),
            Block::Sparse(_) => unreachable!(),
        }
    }

    /// Logical transpose; the stored block is shared, not copied.
    pub fn t(&self) -> Self {
        let mut out = self.clone();
        out.transposed = !out.transposed;
        out
    }

    /// Collects the full logical matrix at `root`.
    pub fn gather_full(&self, comm: &Communicator, root: usize) -> Result<Option<Mat<T>>> {
        let stored = self.block.to_dense();
        let full = match self.partition {
            Partition::Replicated => (comm.rank() == root).then_some(stored),
            _ => comm
                .gather(root, stored.as_slice())?
                .map(|data| self.assemble_storage(data))
                .transpose()?,
        };
        Ok(full.map(|m| if self.transposed { m.transpose() } else { m }))
    }

    /// Collects the full logical matrix on every worker.
    pub fn all_gather_full(&self, comm: &Communicator) -> Result<Mat<T>> {
        let stored = self.block.to_dense();
        let full = match self.partition {
            Partition::Replicated => stored,
            _ => self.assemble_storage(comm.all_gather(stored.as_slice())?)?,
        };
        Ok(if self.transposed { full.transpose() } else { full })
    }

    fn assemble_storage(&self, data: Vec<T>) -> Result<Mat<T>> {
        let data = match self.partition {
            Partition::ByCol => col_blocks(&data, self.rows, self.cols, self.world, true),
            _ => data,
        };
        Mat::from_vec(self.rows, self.cols, data)
    }

    /// Elementwise combination with stretch-one broadcasting.
    pub fn elementwise(&self, op: BinaryOp, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| op.apply(a, b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.elementwise(BinaryOp::Add, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.elementwise(BinaryOp::Sub, other)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.elementwise(BinaryOp::Mul, other)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.elementwise(BinaryOp::Div, other)
    }

    pub fn pow(&self, other: &Self) -> Result<Self> {
        self.elementwise(BinaryOp::Pow, other)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        let (ar, ac) = self.shape();
        let (br, bc) = other.shape();
        let stretch = |a: usize, b: usize| match (a, b) {
            _ if a == b => Some(a),
            (1, _) => Some(b),
            (_, 1) => Some(a),
            _ => None,
        };
        let (Some(rows), Some(cols)) = (stretch(ar, br), stretch(ac, bc)) else {
            return Err(Error::Shape(format!(
                "cannot combine {ar}x{ac} with {br}x{bc}"
            )));
        };
        let (pa, pb) = (self.partition(), other.partition());
        let partition = match (pa, pb) {
            (Partition::Replicated, p) | (p, Partition::Replicated) => p,
            (p, q) if p == q => p,
            _ => {
                return Err(Error::Partition(format!(
                    "cannot combine {pa:?} with {pb:?} elementwise"
                )))
            }
        };
        let (lr, lc) = storage_local_shape(rows, cols, partition, self.world)?;
        let (r0, c0) = match partition {
            Partition::ByRow => (self.rank * lr, 0),
            Partition::ByCol => (0, self.rank * lc),
            Partition::Replicated => (0, 0),
        };
        let index = |m: &Self, gi: usize, gj: usize| -> (usize, usize) {
            let (mr, mc) = m.shape();
            let (or, oc) = m.local_offset();
            let i = if mr == 1 { 0 } else { gi - or };
            let j = if mc == 1 { 0 } else { gj - oc };
            (i, j)
        };
        let local = Mat::from_fn(lr, lc, |i, j| {
            let (gi, gj) = (i + r0, j + c0);
            let (ai, aj) = index(self, gi, gj);
            let (bi, bj) = index(other, gi, gj);
            f(self.local_get(ai, aj), other.local_get(bi, bj))
        });
        self.like(partition, rows, cols, local)
    }

    /// Applies `f` to every stored entry; layout is unchanged.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let block = match &*self.block {
            Block::Dense(m) => Block::Dense(m.map(f)),
            Block::Sparse(s) if f(T::zero()) == T::zero() => Block::Sparse(s.map_values(f)),
            Block::Sparse(s) => Block::Dense(s.to_dense().map(f)),
        };
        Self {
            block: Arc::new(block),
            ..self.clone()
        }
    }

    pub fn apply_unary(&self, u: Unary) -> Self {
        self.map(|v| u.apply(v))
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    pub fn add_scalar(&self, a: T) -> Self {
        self.map(|v| v + a)
    }

    /// Sums all entries, or along one dimension. Summing across the split
    /// dimension needs one all-reduce.
    pub fn reduce_sum(&self, comm: &Communicator, along: Along) -> Result<Reduced<T>> {
        let (lr, lc) = self.local_shape();
        let part = self.partition();
        match along {
            Along::All => {
                let mut s = T::zero();
                for i in 0..lr {
                    for j in 0..lc {
                        s = s + self.local_get(i, j);
                    }
                }
                if part.is_distributed() {
                    s = comm.all_reduce(&[s])?[0];
                }
                Ok(Reduced::Scalar(s))
            }
            Along::Rows => {
                let mut v = vec![T::zero(); lc];
                for i in 0..lr {
                    for (j, x) in v.iter_mut().enumerate() {
                        *x = *x + self.local_get(i, j);
                    }
                }
                let cols = self.cols();
                let (p, v) = match part {
                    Partition::ByRow => (Partition::Replicated, comm.all_reduce(&v)?),
                    p => (p, v),
                };
                Ok(Reduced::Matrix(self.like(p, 1, cols, Mat::from_vec(1, v.len(), v)?)?))
            }
            Along::Cols => {
                let v: Vec<T> = (0..lr)
                    .map(|i| (0..lc).fold(T::zero(), |s, j| s + self.local_get(i, j)))
                    .collect();
                let rows = self.rows();
                let (p, v) = match part {
                    Partition::ByCol => (Partition::Replicated, comm.all_reduce(&v)?),
                    p => (p, v),
                };
                Ok(Reduced::Matrix(self.like(p, rows, 1, Mat::from_vec(v.len(), 1, v)?)?))
            }
        }
    }

    /// Global sum of all entries.
    pub fn sum(&self, comm: &Communicator) -> Result<T> {
        match self.reduce_sum(comm, Along::All)? {
            Reduced::Scalar(s) => Ok(s),
            Reduced::Matrix(_) => unreachable!(),
        }
    }

    /// `<self, other>` for identically laid out operands of equal shape.
    pub fn dot(&self, comm: &Communicator, other: &Self) -> Result<T> {
        if self.shape() != other.shape() || self.partition() != other.partition() {
            return Err(Error::Shape("dot needs equal shapes and partitions".into()));
        }
        let (lr, lc) = self.local_shape();
        let mut s = T::zero();
        for i in 0..lr {
            for j in 0..lc {
                s = s + self.local_get(i, j) * other.local_get(i, j);
            }
        }
        if self.partition().is_distributed() {
            s = comm.all_reduce(&[s])?[0];
        }
        Ok(s)
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self, comm: &Communicator) -> Result<T> {
        self.dot(comm, self)
    }

    /// The global diagonal as a column vector, replicated or split by rows.
    pub fn diag(&self, comm: &Communicator, distribute: bool) -> Result<Self> {
        let (n, c) = self.shape();
        if n != c {
            return Err(Error::Shape(format!("diag of a non-square {n}x{c} matrix")));
        }
        let (lr, lc) = self.local_shape();
        let (r0, c0) = self.local_offset();
        let (start, len) = match self.partition() {
            Partition::ByRow => (r0, lr),
            Partition::ByCol => (c0, lc),
            Partition::Replicated => (0, n),
        };
        let seg: Vec<T> = (start..start + len)
            .map(|g| self.local_get(g - r0, g - c0))
            .collect();
        match (self.partition(), distribute) {
            (Partition::Replicated, false) => self.like(Partition::Replicated, n, 1, Mat::from_vec(n, 1, seg)?),
            (Partition::Replicated, true) => {
                let b = check_split(n, self.world, "diagonal length")?;
                let own = seg[self.rank * b..(self.rank + 1) * b].to_vec();
                self.like(Partition::ByRow, n, 1, Mat::from_vec(b, 1, own)?)
            }
            (_, true) => self.like(Partition::ByRow, n, 1, Mat::from_vec(len, 1, seg)?),
            (_, false) => {
                let full = comm.all_gather(&seg)?;
                self.like(Partition::Replicated, n, 1, Mat::from_vec(n, 1, full)?)
            }
        }
    }

    /// Overwrites the global diagonal in place.
    pub fn fill_diag(&mut self, v: T) -> Result<()> {
        let (n, c) = self.shape();
        if n != c {
            return Err(Error::Shape(format!("fill_diag of a non-square {n}x{c} matrix")));
        }
        let (lr, lc) = self.local_shape();
        let (r0, c0) = self.local_offset();
        let stored_cols = self.block.shape().1;
        let transposed = self.transposed;
        let vals = self.local_values_mut();
        for g in 0..n {
            if g >= r0 && g < r0 + lr && g >= c0 && g < c0 + lc {
                let (i, j) = (g - r0, g - c0);
                let (si, sj) = if transposed { (j, i) } else { (i, j) };
                vals[si * stored_cols + sj] = v;
            }
        }
        Ok(())
    }

    /// Prefix sums along `dim` (0 = down rows, 1 = across columns).
    pub fn cumsum(&self, comm: &Communicator, dim: usize) -> Result<Self> {
        if dim > 1 {
            return Err(Error::Shape(format!("cumsum along dimension {dim}")));
        }
        let mut local = self.local_dense();
        let (lr, lc) = local.shape();
        if dim == 0 {
            for i in 1..lr {
                for j in 0..lc {
                    local.set(i, j, local.get(i, j) + local.get(i - 1, j));
                }
            }
        } else {
            for i in 0..lr {
                for j in 1..lc {
                    local.set(i, j, local.get(i, j) + local.get(i, j - 1));
                }
            }
        }
        let split = matches!(
            (self.partition(), dim),
            (Partition::ByRow, 0) | (Partition::ByCol, 1)
        );
        if split {
            let totals: Vec<T> = if dim == 0 {
                (0..lc).map(|j| local.get(lr - 1, j)).collect()
            } else {
                (0..lr).map(|i| local.get(i, lc - 1)).collect()
            };
            let all = comm.all_gather(&totals)?;
            let k = totals.len();
            let mut carry = vec![T::zero(); k];
            for t in 0..self.rank {
                for (c, v) in carry.iter_mut().zip(&all[t * k..(t + 1) * k]) {
                    *c = *c + *v;
                }
            }
            for i in 0..lr {
                for j in 0..lc {
                    let c = if dim == 0 { carry[j] } else { carry[i] };
                    local.set(i, j, c + local.get(i, j));
                }
            }
        }
        let (r, c) = self.shape();
        self.like(self.partition(), r, c, local)
    }
}

fn random_mat<T: Scalar>(rows: usize, cols: usize, init: &Init<'_, T>, seed: u64) -> Result<Mat<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<T> = match *init {
        Init::Uniform { lo, hi } => {
            let d = Uniform::new(lo, hi).map_err(|e| Error::Config(e.to_string()))?;
            (0..rows * cols).map(|_| T::lit(d.sample(&mut rng))).collect()
        }
        _ => (0..rows * cols)
            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
            .collect(),
    };
    Mat::from_vec(rows, cols, data)
}

/// Draws a full `rows x cols` matrix exactly as [`DistMatrix::create`] does.
pub fn seeded_matrix<T: Scalar>(rows: usize, cols: usize, init: Init<'_, T>, seed: u64) -> Result<Mat<T>> {
    match init {
        Init::Uniform { .. } | Init::Normal => random_mat(rows, cols, &init, seed),
        Init::Zeros => Ok(Mat::zeros(rows, cols)),
        Init::Ones => Ok(Mat::filled(rows, cols, T::one())),
        Init::FromFull { data, .. } => data
            .cloned()
            .ok_or_else(|| Error::Contract("no matrix supplied".into())),
    }
}
