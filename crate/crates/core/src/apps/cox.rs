use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::comm::Communicator;
use crate::distmat::{seeded_matrix, DistMatrix, Init, Mat, Partition};
use crate::error::{Error, Result};
use crate::optim::{power_iteration, proximal_gradient, DistOperator, IterationTrace, Layout, LinearOperator, Objective, SolverConfig};
use crate::prox::{Proximable, Separable};
use crate::scalar::Scalar;

/// Survival data with covariates split by columns. Rows are ordered by
/// strictly decreasing observed time; `y` and `delta` are held in full by
/// every worker.
#[derive(Clone, Debug)]
pub struct CoxDataset<T: Scalar> {
    pub x: DistMatrix<T>,
    pub y: Vec<T>,
    pub delta: Vec<T>,
    pub lambda: f64,
    /// Coefficients left out of the ℓ1 penalty.
    pub unpenalized: Vec<usize>,
}

impl<T: Scalar> CoxDataset<T> {
    pub fn new(x: DistMatrix<T>, y: Vec<T>, delta: Vec<T>, lambda: f64) -> Result<Self> {
        let m = x.rows();
        if y.len() != m || delta.len() != m {
            return Err(Error::Shape(format!(
                "{m} subjects but {} times and {} indicators",
                y.len(),
                delta.len()
            )));
        }
        if x.partition() != Partition::ByCol {
            return Err(Error::Partition(format!("covariates must be split by columns, got {:?}", x.partition())));
        }
        if let Some(i) = (1..m).find(|&i| !(y[i] < y[i - 1])) {
            return Err(Error::Contract(format!(
                "times must be strictly decreasing: y[{}] = {}, y[{i}] = {}",
                i - 1,
                y[i - 1],
                y[i]
            )));
        }
        if let Some(d) = delta.iter().find(|d| **d != T::zero() && **d != T::one()) {
            return Err(Error::Contract(format!("event indicator {d} is not 0 or 1")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("penalty {lambda} must be nonnegative")));
        }
        Ok(Self {
            x,
            y,
            delta,
            lambda,
            unpenalized: vec![],
        })
    }

    /// Sorts subjects by decreasing time and distributes `x`, which only
    /// rank 0 has to supply. Tied times are rejected.
    #[allow(clippy::too_many_arguments)]
    pub fn from_unsorted(
        comm: &Communicator,
        x: Option<&Mat<T>>,
        m: usize,
        p: usize,
        y: &[T],
        delta: &[T],
        lambda: f64,
    ) -> Result<Self> {
        if y.len() != m || delta.len() != m {
            return Err(Error::Shape(format!("{m} subjects but {} times and {} indicators", y.len(), delta.len())));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(w) = order.windows(2).find(|w| y[w[0]] == y[w[1]]) {
            return Err(Error::Contract(format!("tied times at subjects {} and {}", w[0], w[1])));
        }
        let sorted = match (comm.is_root(), x) {
            (true, Some(full)) => {
                if full.shape() != (m, p) {
                    return Err(Error::Shape(format!("expected a {m}x{p} design, got {:?}", full.shape())));
                }
                Some(Mat::from_fn(m, p, |i, j| full.get(order[i], j)))
            }
            (true, None) => return Err(Error::Contract("rank 0 must supply the design".into())),
            _ => None,
        };
        let xd = DistMatrix::from_full(comm, 0, sorted.as_ref(), m, p, Partition::ByCol)?;
        let ys = order.iter().map(|&i| y[i]).collect();
        let ds = order.iter().map(|&i| delta[i]).collect();
        Self::new(xd, ys, ds, lambda)
    }

    pub fn with_unpenalized(mut self, idx: Vec<usize>) -> Self {
        self.unpenalized = idx;
        self
    }

    fn penalty(&self) -> Separable {
        Separable::l1_except(self.x.cols(), self.lambda, &self.unpenalized)
    }
}

/// Linear predictor `η = Xβ`, weights `wᵢ = exp(ηᵢ − M)` and their running
/// sums `Wᵢ`, all scaled by `exp(−M)` with `M = max η`.
struct Risk {
    eta: Vec<f64>,
    w: Vec<f64>,
    cum: Vec<f64>,
    shift: f64,
}

fn risk<T: Scalar>(op: &DistOperator<'_, T>, beta: &[T]) -> Result<Risk> {
    let eta: Vec<f64> = op.forward(beta)?.iter().map(|v| v.as_f64()).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
    let mut cum = w.clone();
    for i in 1..cum.len() {
        cum[i] += cum[i - 1];
    }
    Ok(Risk { eta, w, cum, shift })
}

fn log_lik<T: Scalar>(data: &CoxDataset<T>, r: &Risk) -> f64 {
    data.delta
        .iter()
        .zip(&r.eta)
        .zip(&r.cum)
        .filter(|((d, _), _)| **d != T::zero())
        .map(|((_, e), c)| e - (c.ln() + r.shift))
        .sum()
}

/// `Δ = Xᵀ(δ − Pδ)` with `(Pδ)ᵢ = wᵢ Σ_{j≥i} δⱼ/Wⱼ`.
fn score<T: Scalar>(op: &DistOperator<'_, T>, data: &CoxDataset<T>, r: &Risk) -> Result<Vec<T>> {
    let m = r.w.len();
    let mut tail = 0.0;
    let mut resid = vec![T::zero(); m];
    for i in (0..m).rev() {
        let d = data.delta[i].as_f64();
        tail += d / r.cum[i];
        resid[i] = T::lit(d - r.w[i] * tail);
    }
    op.adjoint(&resid)
}

fn check_beta<T: Scalar>(data: &CoxDataset<T>, beta: &[T]) -> Result<()> {
    let local = data.x.local_shape().1;
    if beta.len() != local {
        return Err(Error::Shape(format!("expected {local} local coefficients, got {}", beta.len())));
    }
    Ok(())
}

/// Log partial likelihood `Σᵢ δᵢ [xᵢᵀβ − log Σ_{j: yⱼ ≥ yᵢ} exp(xⱼᵀβ)]` at
/// this worker's slice `beta`.
pub fn cox_log_likelihood<T: Scalar>(comm: &Communicator, data: &CoxDataset<T>, beta: &[T]) -> Result<f64> {
    check_beta(data, beta)?;
    let op = DistOperator::new(comm, data.x.clone());
    Ok(log_lik(data, &risk(&op, beta)?))
}

/// Gradient of the log partial likelihood; this worker's slice.
pub fn cox_gradient<T: Scalar>(comm: &Communicator, data: &CoxDataset<T>, beta: &[T]) -> Result<Vec<T>> {
    check_beta(data, beta)?;
    let op = DistOperator::new(comm, data.x.clone());
    score(&op, data, &risk(&op, beta)?)
}

/// Penalized objective `−L(β) + λ Σ_{j penalized} |βⱼ|`.
pub fn cox_objective<T: Scalar>(comm: &Communicator, data: &CoxDataset<T>, beta: &[T]) -> Result<f64> {
    let nll = -cox_log_likelihood(comm, data, beta)?;
    let layout = Layout::Split(comm);
    Ok(nll + layout.sum(data.penalty().value_at(beta, layout.offset(beta.len())))?)
}

/// `2‖X‖²`, which bounds the Hessian of the log partial likelihood.
pub fn cox_lipschitz<T: Scalar>(comm: &Communicator, data: &CoxDataset<T>) -> Result<f64> {
    let norm = power_iteration(&DistOperator::new(comm, data.x.clone()), 1e-10, 100_000)?;
    Ok(2.0 * norm * norm)
}

struct NegLogLik<'c, 'a, T: Scalar> {
    comm: &'c Communicator,
    op: DistOperator<'c, T>,
    data: &'a CoxDataset<T>,
    lipschitz: f64,
}

impl<T: Scalar> Objective<T> for NegLogLik<'_, '_, T> {
    fn value(&self, beta: &[T]) -> Result<f64> {
        Ok(-log_lik(self.data, &risk(&self.op, beta)?))
    }

    fn gradient(&self, beta: &[T]) -> Result<Vec<T>> {
        let s = score(&self.op, self.data, &risk(&self.op, beta)?)?;
        Ok(s.into_iter().map(|v| T::zero() - v).collect())
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn layout(&self) -> Layout<'_> {
        Layout::Split(self.comm)
    }
}

/// Proximal gradient ascent `β ← S_{σλ}(β + σΔ)` on the penalized log
/// partial likelihood. `cfg.gamma` is the step `σ`; by default
/// `σ = 1/(2‖X‖²)`. `beta0` is this worker's slice.
pub fn cox_l1<T: Scalar>(
    comm: &Communicator,
    data: &CoxDataset<T>,
    beta0: Vec<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, IterationTrace)> {
    check_beta(data, &beta0)?;
    let f = NegLogLik {
        comm,
        op: DistOperator::new(comm, data.x.clone()),
        data,
        lipschitz: cox_lipschitz(comm, data)?,
    };
    proximal_gradient(&f, &data.penalty(), beta0, cfg)
}

/// Standard normal covariates, five active coefficients of size 0.5,
/// exponential event times with rate `exp(xᵢᵀβ)` and independent
/// exponential censoring. Returns `(X, y, δ)` in generation order.
pub fn cox_synthetic(m: usize, p: usize, seed: u64) -> Result<(Mat<f64>, Vec<f64>, Vec<f64>)> {
    let x: Mat<f64> = seeded_matrix(m, p, Init::Normal, seed)?;
    let beta: Vec<f64> = (0..p).map(|j| if j < 5 { 0.5 } else { 0.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let censor = Exp::new(0.5).map_err(|e| Error::Config(e.to_string()))?;
    let mut y = Vec::with_capacity(m);
    let mut delta = Vec::with_capacity(m);
    for i in 0..m {
        let rate = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp();
        let t: f64 = Exp::new(rate).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
        let c: f64 = censor.sample(&mut rng);
        y.push(t.min(c));
        delta.push(if t <= c { 1.0 } else { 0.0 });
    }
    Ok((x, y, delta))
}
