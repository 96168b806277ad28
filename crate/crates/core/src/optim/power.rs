use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const START_SEED: u64 = 0x5eed;

/// Largest singular value `‖K‖` by power iteration on `KᵀK`.
///
/// Every worker draws the same global start vector and keeps its own
/// slice, so the estimate does not depend on the number of workers.
pub fn power_iteration<T: Scalar, K: LinearOperator<T> + ?Sized>(
    k: &K,
    tol: f64,
    max_iters: usize,
) -> Result<f64> {
    let (_, p) = k.shape();
    let layout = k.primal_layout();
    let n = k.primal_local_len();
    let offset = layout.offset(n);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let global: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut v: Vec<T> = global[offset..offset + n].iter().map(|&x| T::lit(x)).collect();

    let n0 = layout.dot(&v, &v)?.sqrt();
    normalize(&mut v, n0);
    let mut est = 0.0;
    for _ in 0..max_iters {
        let kv = k.forward(&v)?;
        let mut w = k.adjoint(&kv)?;
        let nw = layout.dot(&w, &w)?.sqrt();
        if !nw.is_finite() {
            return Err(Error::Numerical("power iteration diverged".into()));
        }
        if nw == 0.0 {
            if est == 0.0 {
                return Err(Error::Contract("operator is zero".into()));
            }
            break;
        }
        let next = nw.sqrt();
        let change = (next - est).abs() / next;
        est = next;
        normalize(&mut w, nw);
        v = w;
        if change <= (tol * 1e-3).max(4.0 * T::epsilon().as_f64()) {
            return Ok(est);
        }
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {max_iters} iterations"
    )))
}

fn normalize<T: Scalar>(v: &mut [T], norm: f64) {
    let s = T::lit(1.0 / norm);
    for x in v {
        *x = *x * s;
    }
}
