use crate::comm::Communicator;
use crate::distmat::{DistMatrix, Init, Mat, Partition};
use crate::error::{Error, Result};
use crate::optim::{mm_drive, IterationTrace, Sense, SolverConfig};
use crate::scalar::Scalar;

/// Euclidean distances between the rows of a row-split `x`, split by rows
/// the same way. Every worker broadcasts its rows once; after round `t`
/// each worker fills the columns owned by worker `t`.
pub fn pairwise_distances<T: Scalar>(comm: &Communicator, x: &DistMatrix<T>) -> Result<DistMatrix<T>> {
    if x.partition() != Partition::ByRow {
        return Err(Error::Partition(format!("points must be split by rows, got {:?}", x.partition())));
    }
    let (m, dim) = x.shape();
    let mine = x.local_dense();
    let lr = mine.rows();
    let mut out = Mat::zeros(lr, m);
    for t in 0..comm.world_size() {
        let theirs = comm.broadcast(t, mine.as_slice())?;
        for i in 0..lr {
            let a = mine.row(i);
            for k in 0..lr {
                let b = &theirs[k * dim..(k + 1) * dim];
                out.set(i, t * lr + k, distance(a, b));
            }
        }
    }
    DistMatrix::from_local(comm, m, m, Partition::ByRow, out)
}

/// `q` standard normal points in `ℝ^dim`, split by rows.
pub fn mds_points(comm: &Communicator, q: usize, dim: usize, seed: u64) -> Result<DistMatrix<f64>> {
    DistMatrix::create(comm, q, dim, Partition::ByRow, Init::Normal, seed)
}

fn check_inputs<T: Scalar>(y: &DistMatrix<T>, theta: &DistMatrix<T>) -> Result<()> {
    let (q, q2) = y.shape();
    if q != q2 || theta.rows() != q {
        return Err(Error::Shape(format!(
            "dissimilarities are {q}x{q2} and the embedding has {} rows",
            theta.rows()
        )));
    }
    if q < 2 {
        return Err(Error::Contract("need at least two points".into()));
    }
    if y.partition() != Partition::ByRow || theta.partition() != Partition::ByRow {
        return Err(Error::Partition("dissimilarities and embedding must be split by rows".into()));
    }
    let (r0, _) = y.local_offset();
    let (lr, _) = y.local_shape();
    for i in 0..lr {
        for j in 0..q {
            let v = y.local_get(i, j);
            if !(v >= T::zero()) || (r0 + i == j && v != T::zero()) {
                return Err(Error::Contract(format!("invalid dissimilarity {v} at ({}, {j})", r0 + i)));
            }
        }
    }
    Ok(())
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&u, &v)| s + (u - v) * (u - v)).sqrt()
}

/// Local contribution to the stress, given the full embedding.
fn local_stress<T: Scalar>(y: &DistMatrix<T>, full: &Mat<T>, r0: usize) -> f64 {
    let (lr, q) = y.local_shape();
    let mut s = 0.0;
    for i in 0..lr {
        let gi = r0 + i;
        for j in (0..q).filter(|&j| j != gi) {
            let r = y.local_get(i, j).as_f64() - distance(full.row(gi), full.row(j)).as_f64();
            s += r * r;
        }
    }
    s
}

/// `Σᵢ Σ_{j≠i} (yᵢⱼ − ‖θᵢ − θⱼ‖)²`.
pub fn stress<T: Scalar>(comm: &Communicator, y: &DistMatrix<T>, theta: &DistMatrix<T>) -> Result<f64> {
    check_inputs(y, theta)?;
    let full = theta.all_gather_full(comm)?;
    comm.all_reduce_scalar(local_stress(y, &full, y.local_offset().0))
}

/// MM for the stress with unit weights:
/// `θᵢ ← Σ_{j≠i} [zᵢⱼ(θᵢ − θⱼ) + θᵢ + θⱼ] / (2(q − 1))` with
/// `zᵢⱼ = yᵢⱼ/‖θᵢ − θⱼ‖`, and `zᵢⱼ = 0` for coincident points.
/// Evaluated as `θᵢ + Σ_{j≠i} (zᵢⱼ − 1)(θᵢ − θⱼ) / (2(q − 1))`, so pairs
/// already at their target distance leave `θᵢ` untouched.
pub fn mds_fit<T: Scalar>(
    comm: &Communicator,
    y: &DistMatrix<T>,
    theta0: DistMatrix<T>,
    cfg: &SolverConfig,
) -> Result<(DistMatrix<T>, IterationTrace)> {
    check_inputs(y, &theta0)?;
    let (q, dim) = theta0.shape();
    let r0 = y.local_offset().0;
    let lr = y.local_shape().0;
    let denom = T::lit(2.0 * (q - 1) as f64);

    let step = |theta: &mut DistMatrix<T>| -> Result<()> {
        let full = theta.all_gather_full(comm)?;
        let mut next = Mat::zeros(lr, dim);
        for i in 0..lr {
            let gi = r0 + i;
            let ti = full.row(gi);
            let mut acc = vec![T::zero(); dim];
            for j in (0..q).filter(|&j| j != gi) {
                let tj = full.row(j);
                let d = distance(ti, tj);
                let z = if d > T::zero() { y.local_get(i, j) / d } else { T::zero() };
                for k in 0..dim {
                    acc[k] = acc[k] + (z - T::one()) * (ti[k] - tj[k]);
                }
            }
            for (k, a) in acc.into_iter().enumerate() {
                next.set(i, k, ti[k] + a / denom);
            }
        }
        *theta = DistMatrix::from_local(comm, q, dim, Partition::ByRow, next)?;
        Ok(())
    };
    let objective = |theta: &DistMatrix<T>| -> Result<f64> {
        let full = theta.all_gather_full(comm)?;
        comm.all_reduce_scalar(local_stress(y, &full, r0))
    };
    mm_drive(theta0, step, objective, Sense::Minimize, cfg)
}
