use super::{DistMatrix, Mat, Partition};
use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use Partition::{ByCol, ByRow, Replicated};

/// One of the eleven distributed multiplication layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub id: u8,
    pub a: Partition,
    pub b: Partition,
    pub out: Partition,
    pub communication: &'static str,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Self::new(1, ByRow, ByRow, ByRow, "1 all-gather (r x q)"),
        Self::new(2, ByRow, ByCol, ByRow, "1 all-gather (r x q)"),
        Self::new(3, ByRow, ByCol, ByCol, "1 all-gather (r x p)"),
        Self::new(4, ByRow, Replicated, ByRow, "none"),
        Self::new(5, ByCol, ByRow, Replicated, "1 all-reduce (p x q)"),
        Self::new(6, ByCol, ByRow, ByRow, "T reductions (p x q/T each)"),
        Self::new(7, ByCol, ByRow, ByCol, "T reductions (p x q/T each)"),
        Self::new(8, ByCol, ByCol, ByCol, "1 all-gather (p x r)"),
        Self::new(9, ByCol, Replicated, Replicated, "1 all-reduce (p x q)"),
        Self::new(10, Replicated, ByRow, Replicated, "1 all-reduce (p x q)"),
        Self::new(11, Replicated, ByCol, ByCol, "none"),
    ];

    const fn new(id: u8, a: Partition, b: Partition, out: Partition, communication: &'static str) -> Self {
        Self {
            id,
            a,
            b,
            out,
            communication,
        }
    }

    pub fn by_id(id: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.id == id)
    }

    /// Picks the scenario for operand layouts `a`, `b` and an optional
    /// output layout. Without a hint, (ByRow, ByCol) gives a row-split
    /// output and (ByCol, ByRow) a replicated one.
    pub fn select(a: Partition, b: Partition, hint: Option<Partition>) -> Result<Self> {
        let default_out = match (a, b) {
            (ByRow, ByCol) => Some(ByRow),
            (ByCol, ByRow) => Some(Replicated),
            _ => None,
        };
        Self::ALL
            .iter()
            .copied()
            .find(|s| {
                s.a == a
                    && s.b == b
                    && match hint.or(default_out) {
                        Some(out) => s.out == out,
                        None => true,
                    }
            })
            .ok_or(Error::Dispatch { a, b, out: hint })
    }
}

/// Distributed product `a * b`; the layouts of the operands and `hint`
/// pick the scenario.
pub fn matmul<T: Scalar>(
    comm: &Communicator,
    a: &DistMatrix<T>,
    b: &DistMatrix<T>,
    hint: Option<Partition>,
) -> Result<DistMatrix<T>> {
    let (p, r) = a.shape();
    let (r2, q) = b.shape();
    if r != r2 {
        return Err(Error::Shape(format!(
            "cannot multiply {p}x{r} by {r2}x{q}"
        )));
    }
    let s = Scenario::select(a.partition(), b.partition(), hint)?;
    let world = comm.world_size();
    match s.id {
        1 => {
            let full = b.all_gather_full(comm)?;
            let local = local_times(a, &full);
            DistMatrix::from_local(comm, p, q, ByRow, local)
        }
        2 => {
            let full = b.all_gather_full(comm)?;
            let local = local_times(a, &full);
            DistMatrix::from_local(comm, p, q, ByRow, local)
        }
        4 => {
            let local = local_product(a, b);
            DistMatrix::from_local(comm, p, q, ByRow, local)
        }
        5 => {
            let partial = local_product(a, b);
            let sum = comm.all_reduce(partial.as_slice())?;
            DistMatrix::from_local(comm, p, q, Replicated, Mat::from_vec(p, q, sum)?)
        }
        7 => {
            let partial = local_product(a, b);
            if q % world != 0 {
                return Err(Error::Partition(format!(
                    "output column count {q} is not a multiple of the world size {world}"
                )));
            }
            let bq = q / world;
            let mut own = None;
            for t in 0..world {
                let piece = partial.col_block(t * bq, (t + 1) * bq);
                if let Some(sum) = comm.reduce(t, piece.as_slice())? {
                    own = Some(sum);
                }
            }
            let own = own.expect("every rank roots one reduction");
            DistMatrix::from_local(comm, p, q, ByCol, Mat::from_vec(p, bq, own)?)
        }
        9 => {
            let (_, c0) = a.local_offset();
            let (_, lc) = a.local_shape();
            let slice = Mat::from_fn(lc, q, |i, j| b.local_get(c0 + i, j));
            let partial = local_times(a, &slice);
            let sum = comm.all_reduce(partial.as_slice())?;
            DistMatrix::from_local(comm, p, q, Replicated, Mat::from_vec(p, q, sum)?)
        }
        3 | 6 | 8 | 10 | 11 => {
            let inner = match s.id {
                3 => Some(ByRow),
                6 => Some(ByCol),
                _ => None,
            };
            Ok(matmul(comm, &b.t(), &a.t(), inner)?.t())
        }
        _ => unreachable!(),
    }
}

/// `op(a_local) * m` for a dense right-hand side already in logical form.
fn local_times<T: Scalar>(a: &DistMatrix<T>, m: &Mat<T>) -> Mat<T> {
    a.block().product_dense(a.is_transposed(), m)
}

/// Product of the two logical local blocks.
fn local_product<T: Scalar>(a: &DistMatrix<T>, b: &DistMatrix<T>) -> Mat<T> {
    a.block().product(a.is_transposed(), b.block(), b.is_transposed())
}
