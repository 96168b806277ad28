use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{IterationTrace, Monitor, Objective, Sense, SolverConfig};
use crate::distmat::Mat;
use crate::error::{Error, Result};
use crate::prox::Proximable;
use crate::scalar::Scalar;

/// Which coordinates move in one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    All,
    /// `size` distinct coordinates drawn uniformly.
    Random { size: usize },
    /// One coordinate per iteration in index order.
    Cyclic,
}

impl Sampling {
    fn draw(self, rng: &mut ChaCha8Rng, iter: usize, p: usize) -> Result<Vec<usize>> {
        Ok(match self {
            Self::All => (0..p).collect(),
            Self::Random { size } => {
                if size == 0 || size > p {
                    return Err(Error::Config(format!("cannot sample {size} of {p} coordinates")));
                }
                let mut idx = sample(rng, p, size).into_vec();
                idx.sort_unstable();
                idx
            }
            Self::Cyclic => vec![(iter - 1) % p],
        })
    }
}

/// Parallel proximal coordinate descent for `f(x) + Σ gᵢ(xᵢ)`. The sampled
/// coordinates move together from the same gradient:
/// `xᵢ ← prox_{γᵢgᵢ}(xᵢ − γᵢ ∂ᵢf(x))`.
///
/// Coordinates are drawn over the global index range from `cfg.seed`, and
/// each worker updates the sampled indices it owns.
pub fn parallel_prox_linear_cd<T, O, P>(
    f: &O,
    g: &P,
    gammas: &[f64],
    x0: Vec<T>,
    sampling: Sampling,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, IterationTrace)>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    P: Proximable + ?Sized,
{
    let layout = f.layout();
    let n = x0.len();
    let offset = layout.offset(n);
    let p = layout.sum(n as f64)? as usize;
    if gammas.len() != p {
        return Err(Error::Shape(format!("{} steps for {p} coordinates", gammas.len())));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::Config(format!("coordinate step {g} must be positive")));
    }
    let objective = |x: &[T]| -> Result<f64> { Ok(f.value(x)? + layout.sum(g.value_at(x, offset))?) };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0;
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, objective(&x)?)?;
    for iter in 1..=cfg.max_iters {
        let picked = sampling.draw(&mut rng, iter, p)?;
        let grad = f.gradient(&x)?;
        for gi in picked.into_iter().filter(|i| (offset..offset + n).contains(i)) {
            let i = gi - offset;
            let step = T::lit(gammas[gi]);
            x[i] = x[i] - step * grad[i];
            g.prox_into(&mut x[i..=i], step, gi);
        }
        if mon.due(iter) && mon.record(iter, objective(&x)?)? {
            break;
        }
    }
    Ok((x, mon.finish()))
}

/// A loss `ℓᵢ(u)` attached to sample `i`, with `u = aᵢᵀx`.
pub trait SampleLoss {
    fn value(&self, i: usize, u: f64) -> f64;
    fn derivative(&self, i: usize, u: f64) -> f64;
}

/// `ℓᵢ(u) = ½(u − bᵢ)²`.
#[derive(Clone, Debug)]
pub struct SquaredLoss {
    pub targets: Vec<f64>,
}

impl SampleLoss for SquaredLoss {
    fn value(&self, i: usize, u: f64) -> f64 {
        0.5 * (u - self.targets[i]).powi(2)
    }

    fn derivative(&self, i: usize, u: f64) -> f64 {
        u - self.targets[i]
    }
}

fn row_dot<T: Scalar>(a: &Mat<T>, i: usize, x: &[T]) -> f64 {
    a.row(i).iter().zip(x).fold(T::zero(), |s, (&u, &v)| s + u * v).as_f64()
}

/// `(1/b) Σ_{i ∈ batch} ℓᵢ'(aᵢᵀx) aᵢ`.
pub fn batch_gradient<T: Scalar, L: SampleLoss + ?Sized>(a: &Mat<T>, loss: &L, x: &[T], batch: &[usize]) -> Vec<T> {
    let mut g = vec![T::zero(); a.cols()];
    for &i in batch {
        let d = T::lit(loss.derivative(i, row_dot(a, i, x)));
        for (gj, &aij) in g.iter_mut().zip(a.row(i)) {
            *gj = *gj + d * aij;
        }
    }
    let inv = T::lit(1.0 / batch.len() as f64);
    g.iter_mut().for_each(|v| *v = *v * inv);
    g
}

/// Mini-batch stochastic gradient descent on `(1/m) Σᵢ ℓᵢ(aᵢᵀx)`.
/// Each iteration draws `batch` distinct rows from `cfg.seed` and steps by
/// `step(n)` at iteration `n`.
pub fn minibatch_sgd<T, L>(
    a: &Mat<T>,
    loss: &L,
    x0: Vec<T>,
    batch: usize,
    step: impl Fn(usize) -> f64,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, IterationTrace)>
where
    T: Scalar,
    L: SampleLoss + ?Sized,
{
    let m = a.rows();
    if batch == 0 || batch > m {
        return Err(Error::Config(format!("batch size {batch} outside 1..={m}")));
    }
    if x0.len() != a.cols() {
        return Err(Error::Shape(format!("{} coefficients for {} columns", x0.len(), a.cols())));
    }
    let objective = |x: &[T]| (0..m).map(|i| loss.value(i, row_dot(a, i, x))).sum::<f64>() / m as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0;
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, objective(&x))?;
    for iter in 1..=cfg.max_iters {
        let mut idx = sample(&mut rng, m, batch).into_vec();
        idx.sort_unstable();
        let g = batch_gradient(a, loss, &x, &idx);
        let s = step(iter);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("step {s} at iteration {iter} must be positive")));
        }
        let s = T::lit(s);
        for (xi, gi) in x.iter_mut().zip(g) {
            *xi = *xi - s * gi;
        }
        if mon.due(iter) && mon.record(iter, objective(&x))? {
            break;
        }
    }
    Ok((x, mon.finish()))
}
