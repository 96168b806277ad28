use rand::Rng;

use crate::comm::Communicator;
use crate::error::{Error, Result};

/// Estimates π from `n` uniform points per worker. Each worker draws its
/// `n` abscissae and then its `n` ordinates from the generator seeded with
/// `seed + rank`.
pub fn mc_pi(comm: &Communicator, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("need at least one sample per worker".into()));
    }
    let mut rng = comm.rank_rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    mc_pi_from(comm, &xs, &ys)
}

/// Four times the fraction of this worker's points strictly inside the
/// unit quarter circle, averaged over the world.
pub fn mc_pi_from(comm: &Communicator, xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} abscissae and {} ordinates", xs.len(), ys.len())));
    }
    let inside = xs.iter().zip(ys).filter(|(x, y)| *x * *x + *y * *y < 1.0).count();
    let local = 4.0 * inside as f64 / xs.len() as f64;
    Ok(comm.all_reduce_scalar(local)? / comm.world_size() as f64)
}
