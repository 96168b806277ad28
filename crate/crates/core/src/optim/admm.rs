use super::{IterationTrace, LinearOperator, Monitor, Sense, SolverConfig};
use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::prox::Proximable;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct AdmmResult<T> {
    pub x: Vec<T>,
    /// Splitting variable, close to `Kx` at convergence.
    pub x_tilde: Vec<T>,
    pub y: Vec<T>,
    pub trace: IterationTrace,
}

#[derive(Clone, Debug)]
pub struct ConsensusResult<T> {
    /// Consensus iterate.
    pub x: Vec<T>,
    /// This worker's local iterate.
    pub x_local: Vec<T>,
    pub trace: IterationTrace,
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("penalty t must be positive, got {t}")));
    }
    Ok(())
}

/// ADMM for `min_x f(Kx) + g(x)` on one worker:
///
/// ```text
/// xⁿ⁺¹ = argmin_x g(x) + t/2 ‖Kx − x̃ⁿ + yⁿ/t‖²
/// x̃ⁿ⁺¹ = prox_{f/t}(Kxⁿ⁺¹ + yⁿ/t)
/// yⁿ⁺¹ = yⁿ + t(Kxⁿ⁺¹ − x̃ⁿ⁺¹)
/// ```
///
/// `x_step(v, x)` solves the first line for the target `v = x̃ⁿ − yⁿ/t`,
/// warm-started at `x`. `objective` evaluates `f(Kx) + g(x)`.
#[allow(clippy::too_many_arguments)]
pub fn admm<T, K, F>(
    k: &K,
    f: &F,
    mut x_step: impl FnMut(&[T], &[T]) -> Result<Vec<T>>,
    objective: impl Fn(&[T]) -> Result<f64>,
    x0: Vec<T>,
    t: f64,
    cfg: &SolverConfig,
) -> Result<AdmmResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
{
    check_t(t)?;
    let tt = T::lit(t);
    let inv_t = T::lit(1.0 / t);
    let mut x = x0;
    let mut xt = k.forward(&x)?;
    let mut y = vec![T::zero(); xt.len()];
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, objective(&x)?)?;
    for iter in 1..=cfg.max_iters {
        let v: Vec<T> = xt.iter().zip(&y).map(|(&a, &b)| a - b * inv_t).collect();
        x = x_step(&v, &x)?;
        let kx = k.forward(&x)?;
        for ((s, &a), &b) in xt.iter_mut().zip(&kx).zip(&y) {
            *s = a + b * inv_t;
        }
        f.prox_into(&mut xt, inv_t, 0);
        for ((yi, &a), &s) in y.iter_mut().zip(&kx).zip(&xt) {
            *yi = *yi + tt * (a - s);
        }
        if mon.due(iter) && mon.record(iter, objective(&x)?)? {
            break;
        }
    }
    Ok(AdmmResult {
        x,
        x_tilde: xt,
        y,
        trace: mon.finish(),
    })
}

/// Consensus ADMM for `min_x f(Kx) + Σ_k g_k(x)` with one `g_k` per worker.
///
/// Worker `k` keeps its own copy `x_k` and multipliers `y_k`, `w_k`:
///
/// ```text
/// x_k  = argmin_u g_k(u) + t/2 ‖Ku − x̃ + y_k/t‖² + t/2 ‖u − x + w_k/t‖²
/// x̃   = prox_{f/(dt)}(avg_k(K x_k + y_k/t))
/// x    = avg_k(x_k + w_k/t)
/// y_k += t(K x_k − x̃)
/// w_k += t(x_k − x)
/// ```
///
/// where `d` is the number of workers. `x_step(v1, v2, x_k)` solves the
/// local problem for targets `v1 = x̃ − y_k/t` and `v2 = x − w_k/t`.
/// `objective` is evaluated at the consensus iterate and must return the
/// same value on every worker.
#[allow(clippy::too_many_arguments)]
pub fn consensus_admm<T, K, F>(
    comm: &Communicator,
    k: &K,
    f: &F,
    mut x_step: impl FnMut(&[T], &[T], &[T]) -> Result<Vec<T>>,
    objective: impl Fn(&[T]) -> Result<f64>,
    x0: Vec<T>,
    t: f64,
    cfg: &SolverConfig,
) -> Result<ConsensusResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
{
    check_t(t)?;
    let tt = T::lit(t);
    let inv_t = T::lit(1.0 / t);
    let inv_d = T::lit(1.0 / comm.world_size() as f64);
    let inv_dt = T::lit(1.0 / (comm.world_size() as f64 * t));

    let mut xk = x0.clone();
    let mut x = x0;
    let mut xt = k.forward(&x)?;
    let mut y = vec![T::zero(); xt.len()];
    let mut w = vec![T::zero(); x.len()];
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, objective(&x)?)?;
    for iter in 1..=cfg.max_iters {
        let v1: Vec<T> = xt.iter().zip(&y).map(|(&a, &b)| a - b * inv_t).collect();
        let v2: Vec<T> = x.iter().zip(&w).map(|(&a, &b)| a - b * inv_t).collect();
        xk = x_step(&v1, &v2, &xk)?;
        let kx = k.forward(&xk)?;

        let mut buf: Vec<T> = kx.iter().zip(&y).map(|(&a, &b)| a + b * inv_t).collect();
        buf.extend(xk.iter().zip(&w).map(|(&a, &b)| a + b * inv_t));
        let sums = comm.all_reduce(&buf)?;
        let (s_tilde, s_x) = sums.split_at(xt.len());
        for (d, &s) in xt.iter_mut().zip(s_tilde) {
            *d = s * inv_d;
        }
        f.prox_into(&mut xt, inv_dt, 0);
        for (d, &s) in x.iter_mut().zip(s_x) {
            *d = s * inv_d;
        }

        for ((yi, &a), &s) in y.iter_mut().zip(&kx).zip(&xt) {
            *yi = *yi + tt * (a - s);
        }
        for ((wi, &a), &s) in w.iter_mut().zip(&xk).zip(&x) {
            *wi = *wi + tt * (a - s);
        }
        if mon.due(iter) && mon.record(iter, objective(&x)?)? {
            break;
        }
    }
    Ok(ConsensusResult {
        x,
        x_local: xk,
        trace: mon.finish(),
    })
}
