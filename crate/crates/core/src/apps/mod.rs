//! Statistical applications: nonnegative matrix factorization, PET
//! reconstruction, multidimensional scaling, ℓ1-penalized Cox regression
//! and a Monte Carlo estimate of π.

mod cox;
mod mcpi;
mod mds;
mod nmf;
mod pet;

pub use cox::{cox_gradient, cox_l1, cox_lipschitz, cox_log_likelihood, cox_objective, cox_synthetic, CoxDataset};
pub use mcpi::{mc_pi, mc_pi_from};
pub use mds::{mds_fit, mds_points, pairwise_distances, stress};
pub use nmf::{apg_steps, nmf_apg, nmf_multiplicative, NmfState};
pub use pet::{
    pet_default_steps, pet_mm_objective, pet_mm_ridge, pet_pdhg_tv, pet_pdhg_tv_dual, pet_phantom, pet_spdhg_tv,
    pet_system, pet_toy, PetProblem,
};

use crate::comm::Communicator;
use crate::distmat::DistMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Added to denominators and logarithms.
pub const EPS: f64 = 1e-20;

/// Fails unless every entry of `m` on every worker is nonnegative.
fn check_nonnegative<T: Scalar>(comm: &Communicator, m: &DistMatrix<T>, what: &str) -> Result<()> {
    let (lr, lc) = m.local_shape();
    let mut bad = 0.0;
    for i in 0..lr {
        for j in 0..lc {
            if !(m.local_get(i, j) >= T::zero()) {
                bad += 1.0;
            }
        }
    }
    if m.partition().is_distributed() {
        bad = comm.all_reduce_scalar(bad)?;
    }
    if bad > 0.0 {
        return Err(Error::Contract(format!("{what} has {bad} negative entries")));
    }
    Ok(())
}
