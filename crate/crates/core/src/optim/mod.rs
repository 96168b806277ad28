//! Iterative solvers that run SPMD over local slices of possibly
//! distributed vectors.
//!
//! Every solver evaluates its objective once per `eval_every` iterations
//! and stops when `|f(θⁿ) − f(θⁿ⁻ᵏ)| / (|f(θⁿ)| + 1) < tol`, where `k` is the
//! evaluation interval. Scalars that depend on distributed data are
//! all-reduced so that every worker follows the same control flow.

mod admm;
mod cd;
mod mm;
mod operator;
mod pdhg;
mod power;
mod proxgrad;
mod trace;

use crate::comm::Communicator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use admm::{admm, consensus_admm, AdmmResult, ConsensusResult};
pub use cd::{batch_gradient, minibatch_sgd, parallel_prox_linear_cd, Sampling, SampleLoss, SquaredLoss};
pub use mm::mm_drive;
pub use operator::{DenseOperator, DistOperator, Identity, LinearOperator, Stacked};
pub use pdhg::{check_steps, pdhg, pdhg_dual, stochastic_pdhg, GradTerm, PdhgResult, PrimalTerm, ProxTerm};
pub use power::power_iteration;
pub use proxgrad::proximal_gradient;
pub use trace::{IterationTrace, Residual, TraceRecord};

pub(crate) use trace::Monitor;

/// Whether an objective is driven down or up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Relative slack allowed before a step counts as breaking monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub eval_every: usize,
    pub tol: f64,
    /// Proximal-gradient step; `None` means `1/L`.
    pub gamma: Option<f64>,
    /// Dual and primal steps of primal-dual methods; `None` means automatic.
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub seed: u64,
    /// Fail on a monotonicity violation instead of recording it.
    pub strict: bool,
    /// Record wall-clock seconds in traces; zeros otherwise.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            eval_every: 100,
            tol: 1e-5,
            gamma: None,
            sigma: None,
            tau: None,
            seed: 0,
            strict: false,
            timing: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be nonnegative".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("sigma", self.sigma), ("tau", self.tau)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Evaluate at every iteration and never stop early.
    pub fn every_iteration(max_iters: usize) -> Self {
        Self {
            max_iters,
            eval_every: 1,
            tol: 0.0,
            ..Self::default()
        }
    }
}

/// How a local slice relates to the global vector.
#[derive(Clone, Copy, Debug)]
pub enum Layout<'c> {
    /// The slice is the whole vector (single worker or replicated).
    Local,
    /// Equal consecutive blocks, one per rank.
    Split(&'c Communicator),
}

impl Layout<'_> {
    pub fn sum(&self, v: f64) -> Result<f64> {
        match self {
            Self::Local => Ok(v),
            Self::Split(c) => c.all_reduce_scalar(v),
        }
    }

    pub fn dot<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<f64> {
        self.sum(local_dot(a, b))
    }

    /// Global index of the first local entry.
    pub fn offset(&self, local_len: usize) -> usize {
        match self {
            Self::Local => 0,
            Self::Split(c) => c.rank() * local_len,
        }
    }
}

pub(crate) fn local_dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}

/// Smooth part of a composite objective.
pub trait Objective<T: Scalar> {
    /// Global value at the local slice `x`.
    fn value(&self, x: &[T]) -> Result<f64>;

    fn gradient(&self, _x: &[T]) -> Result<Vec<T>> {
        Err(Error::Contract("objective has no gradient".into()))
    }

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn layout(&self) -> Layout<'_> {
        Layout::Local
    }
}

type ValueFn<'a, T> = Box<dyn Fn(&[T]) -> Result<f64> + 'a>;
type GradFn<'a, T> = Box<dyn Fn(&[T]) -> Result<Vec<T>> + 'a>;

/// Objective assembled from closures.
pub struct FnObjective<'a, T> {
    value: ValueFn<'a, T>,
    gradient: Option<GradFn<'a, T>>,
    lipschitz: Option<f64>,
    layout: Layout<'a>,
}

impl<'a, T: Scalar> FnObjective<'a, T> {
    pub fn new(value: impl Fn(&[T]) -> Result<f64> + 'a) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
            lipschitz: None,
            layout: Layout::Local,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[T]) -> Result<Vec<T>> + 'a) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_layout(mut self, layout: Layout<'a>) -> Self {
        self.layout = layout;
        self
    }
}

impl<T: Scalar> Objective<T> for FnObjective<'_, T> {
    fn value(&self, x: &[T]) -> Result<f64> {
        (self.value)(x)
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        match &self.gradient {
            Some(g) => g(x),
            None => Err(Error::Contract("objective has no gradient".into())),
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn layout(&self) -> Layout<'_> {
        self.layout
    }
}

/// `½‖x − c‖²`.
#[derive(Clone, Debug)]
pub struct Quadratic<T> {
    pub center: Vec<T>,
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn value(&self, x: &[T]) -> Result<f64> {
        Ok(0.5
            * x.iter()
                .zip(&self.center)
                .map(|(a, c)| (a.as_f64() - c.as_f64()).powi(2))
                .sum::<f64>())
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(x.iter().zip(&self.center).map(|(&a, &c)| a - c).collect())
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `½‖Ax − b‖²` on a single worker.
#[derive(Clone, Debug)]
pub struct LeastSquares<T> {
    pub a: crate::distmat::Mat<T>,
    pub b: Vec<T>,
    lipschitz: f64,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn new(a: crate::distmat::Mat<T>, b: Vec<T>) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::Shape(format!(
                "design has {} rows but {} responses",
                a.rows(),
                b.len()
            )));
        }
        let norm = power_iteration(&DenseOperator::new(a.clone()), 1e-10, 100_000)?;
        Ok(Self {
            a,
            b,
            lipschitz: norm * norm,
        })
    }

    pub fn residual(&self, x: &[T]) -> Vec<T> {
        (0..self.a.rows())
            .map(|i| {
                self.a
                    .row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |s, (&a, &v)| s + a * v)
                    - self.b[i]
            })
            .collect()
    }
}

impl<T: Scalar> Objective<T> for LeastSquares<T> {
    fn value(&self, x: &[T]) -> Result<f64> {
        Ok(0.5 * self.residual(x).iter().map(|r| r.as_f64().powi(2)).sum::<f64>())
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let r = self.residual(x);
        let mut g = vec![T::zero(); self.a.cols()];
        for (i, &ri) in r.iter().enumerate() {
            for (gj, &aij) in g.iter_mut().zip(self.a.row(i)) {
                *gj = *gj + aij * ri;
            }
        }
        Ok(g)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}
