use super::{check_nonnegative, EPS};
use crate::comm::Communicator;
use crate::distmat::{matmul, DistMatrix, Init, Partition};
use crate::error::{Error, Result};
use crate::optim::{mm_drive, IterationTrace, Monitor, Sense, SolverConfig};
use crate::scalar::Scalar;

/// `X ≈ VW` with `X` and `V` split by rows and `W` split by columns.
#[derive(Clone, Debug)]
pub struct NmfState<T: Scalar> {
    pub x: DistMatrix<T>,
    pub v: DistMatrix<T>,
    pub w: DistMatrix<T>,
    /// Ridge parameter of the projected-gradient variant.
    pub epsilon: f64,
}

impl<T: Scalar> NmfState<T> {
    pub fn new(comm: &Communicator, x: DistMatrix<T>, v: DistMatrix<T>, w: DistMatrix<T>, epsilon: f64) -> Result<Self> {
        let (m, p) = x.shape();
        let r = v.cols();
        if v.rows() != m || w.shape() != (r, p) {
            return Err(Error::Shape(format!(
                "X is {m}x{p} but V is {:?} and W is {:?}",
                v.shape(),
                w.shape()
            )));
        }
        let layouts = [
            (x.partition(), Partition::ByRow, "X"),
            (v.partition(), Partition::ByRow, "V"),
            (w.partition(), Partition::ByCol, "W"),
        ];
        for (got, want, name) in layouts {
            if got != want {
                return Err(Error::Partition(format!("{name} must be {want:?}, got {got:?}")));
            }
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Config(format!("ridge parameter {epsilon} must be nonnegative")));
        }
        check_nonnegative(comm, &x, "X")?;
        check_nonnegative(comm, &v, "V")?;
        check_nonnegative(comm, &w, "W")?;
        Ok(Self { x, v, w, epsilon })
    }

    /// Uniform(0, 1) data and starting factors drawn from `seed`,
    /// `seed + 1` and `seed + 2`.
    pub fn random(comm: &Communicator, m: usize, p: usize, r: usize, seed: u64) -> Result<Self> {
        let u = Init::Uniform { lo: 0.0, hi: 1.0 };
        let x = DistMatrix::create(comm, m, p, Partition::ByRow, u, seed)?;
        let v = DistMatrix::create(comm, m, r, Partition::ByRow, u, seed + 1)?;
        let w = DistMatrix::create(comm, r, p, Partition::ByCol, u, seed + 2)?;
        Self::new(comm, x, v, w, 0.0)
    }

    /// `‖X − VW‖²_F`.
    pub fn loss(&self, comm: &Communicator) -> Result<f64> {
        let vw = matmul(comm, &self.v, &self.w, None)?;
        Ok(self.x.sub(&vw)?.norm_sq(comm)?.as_f64())
    }

    /// `‖X − VW‖²_F + ε/2 (‖V‖²_F + ‖W‖²_F)`.
    pub fn penalized_loss(&self, comm: &Communicator) -> Result<f64> {
        let mut f = self.loss(comm)?;
        if self.epsilon > 0.0 {
            let ridge = self.v.norm_sq(comm)?.as_f64() + self.w.norm_sq(comm)?.as_f64();
            f += 0.5 * self.epsilon * ridge;
        }
        Ok(f)
    }
}

/// Multiplicative updates
/// `V ← V ⊙ XWᵀ ⊘ (VWWᵀ + eps)`, then `W ← W ⊙ VᵀX ⊘ (VᵀVW + eps)`.
pub fn nmf_multiplicative<T: Scalar>(
    comm: &Communicator,
    state: NmfState<T>,
    cfg: &SolverConfig,
) -> Result<(NmfState<T>, IterationTrace)> {
    let eps = T::lit(EPS);
    let step = |s: &mut NmfState<T>| -> Result<()> {
        let xwt = matmul(comm, &s.x, &s.w.t(), None)?;
        let wwt = matmul(comm, &s.w, &s.w.t(), None)?;
        let vwwt = matmul(comm, &s.v, &wwt, None)?;
        s.v = s.v.mul(&xwt)?.div(&vwwt.add_scalar(eps))?;

        let vtx = matmul(comm, &s.v.t(), &s.x, Some(Partition::ByCol))?;
        let vtv = matmul(comm, &s.v.t(), &s.v, None)?;
        let vtvw = matmul(comm, &vtv, &s.w, None)?;
        s.w = s.w.mul(&vtx)?.div(&vtvw.add_scalar(eps))?;
        Ok(())
    };
    mm_drive(state, step, |s| s.loss(comm), Sense::Minimize, cfg)
}

/// `‖G + εI‖_F` for a replicated square `G`.
fn ridge_frobenius<T: Scalar>(g: &DistMatrix<T>, epsilon: f64) -> f64 {
    let (n, _) = g.shape();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v = g.local_get(i, j).as_f64();
            if i == j {
                v += epsilon;
            }
            s += v * v;
        }
    }
    s.sqrt()
}

/// Steps `σ = 1/(2‖WWᵀ + εI‖_F)` and `τ = 1/(2‖VᵀV + εI‖_F)` for the
/// current factors.
pub fn apg_steps<T: Scalar>(comm: &Communicator, v: &DistMatrix<T>, w: &DistMatrix<T>, epsilon: f64) -> Result<(f64, f64)> {
    let wwt = matmul(comm, w, &w.t(), None)?;
    let vtv = matmul(comm, &v.t(), v, None)?;
    Ok((apg_step(&wwt, epsilon), apg_step(&vtv, epsilon)))
}

fn apg_step<T: Scalar>(g: &DistMatrix<T>, epsilon: f64) -> f64 {
    let n = ridge_frobenius(g, epsilon);
    if n > 0.0 {
        1.0 / (2.0 * n)
    } else {
        1.0
    }
}

/// Alternating projected gradient steps
/// `V ← P₊((1 − σε)V − σ(VWWᵀ − XWᵀ))`, then the same for `W` with `τ`
/// and the updated `V`. The trace holds the penalized loss.
pub fn nmf_apg<T: Scalar>(comm: &Communicator, state: NmfState<T>, cfg: &SolverConfig) -> Result<(NmfState<T>, IterationTrace)> {
    let mut s = state;
    let eps = s.epsilon;
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, s.penalized_loss(comm)?)?;
    for iter in 1..=cfg.max_iters {
        let xwt = matmul(comm, &s.x, &s.w.t(), None)?;
        let wwt = matmul(comm, &s.w, &s.w.t(), None)?;
        let vwwt = matmul(comm, &s.v, &wwt, None)?;
        let sigma = apg_step(&wwt, eps);
        let (keep, st) = (T::lit(1.0 - sigma * eps), T::lit(sigma));
        let grad = vwwt.sub(&xwt)?;
        s.v = s.v.zip_with(&grad, |v, g| (keep * v - st * g).max(T::zero()))?;

        let vtx = matmul(comm, &s.v.t(), &s.x, Some(Partition::ByCol))?;
        let vtv = matmul(comm, &s.v.t(), &s.v, None)?;
        let vtvw = matmul(comm, &vtv, &s.w, None)?;
        let tau = apg_step(&vtv, eps);
        let (keep, tt) = (T::lit(1.0 - tau * eps), T::lit(tau));
        let grad = vtvw.sub(&vtx)?;
        s.w = s.w.zip_with(&grad, |w, g| (keep * w - tt * g).max(T::zero()))?;

        if mon.due(iter) && mon.record(iter, s.penalized_loss(comm)?)? {
            break;
        }
    }
    Ok((s, mon.finish()))
}
