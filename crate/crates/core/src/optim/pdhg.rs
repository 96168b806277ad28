use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{power_iteration, IterationTrace, Layout, LinearOperator, Monitor, Objective, Sense, SolverConfig};
use crate::error::{Error, Result};
use crate::prox::Proximable;
use crate::scalar::Scalar;

/// The primal part `g` of `min_x f(Kx) + g(x)`.
pub trait PrimalTerm<T: Scalar> {
    /// Primal step given `Kᵀy`: a proximal step `prox_{τg}(x − τKᵀy)` or a
    /// gradient step `x − τ(∇g(x) + Kᵀy)`.
    fn update(&self, x: &mut [T], kty: &[T], tau: T, offset: usize) -> Result<()>;

    /// Global value of `g`.
    fn value(&self, x: &[T], layout: Layout<'_>) -> Result<f64>;
}

/// `g` handled through its proximity operator.
#[derive(Clone, Debug)]
pub struct ProxTerm<P>(pub P);

impl<T: Scalar, P: Proximable> PrimalTerm<T> for ProxTerm<P> {
    fn update(&self, x: &mut [T], kty: &[T], tau: T, offset: usize) -> Result<()> {
        for (xi, &k) in x.iter_mut().zip(kty) {
            *xi = *xi - tau * k;
        }
        self.0.prox_into(x, tau, offset);
        Ok(())
    }

    fn value(&self, x: &[T], layout: Layout<'_>) -> Result<f64> {
        layout.sum(self.0.value_at(x, layout.offset(x.len())))
    }
}

/// Smooth `g` handled by a gradient step.
#[derive(Clone, Debug)]
pub struct GradTerm<O>(pub O);

impl<T: Scalar, O: Objective<T>> PrimalTerm<T> for GradTerm<O> {
    fn update(&self, x: &mut [T], kty: &[T], tau: T, _offset: usize) -> Result<()> {
        let g = self.0.gradient(x)?;
        for ((xi, gi), &k) in x.iter_mut().zip(g).zip(kty) {
            *xi = *xi - tau * (gi + k);
        }
        Ok(())
    }

    fn value(&self, x: &[T], _layout: Layout<'_>) -> Result<f64> {
        self.0.value(x)
    }
}

#[derive(Clone, Debug)]
pub struct PdhgResult<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// Last extrapolated point: `x̄` for [`pdhg`], `ȳ` for the dual forms.
    pub extrapolated: Vec<T>,
    pub trace: IterationTrace,
    pub sigma: f64,
    pub tau: f64,
}

/// Rejects steps with `στ‖K‖² ≥ 1`.
pub fn check_steps(sigma: f64, tau: f64, norm: f64) -> Result<()> {
    if !(sigma > 0.0 && tau > 0.0) {
        return Err(Error::Config(format!("steps must be positive, got σ={sigma}, τ={tau}")));
    }
    let prod = sigma * tau * norm * norm;
    if !(prod < 1.0) {
        return Err(Error::Config(format!("στ‖K‖² = {prod} must be below 1")));
    }
    Ok(())
}

fn resolve_steps<T: Scalar, K: LinearOperator<T> + ?Sized>(k: &K, cfg: &SolverConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let norm = power_iteration(k, 1e-8, 100_000)?;
    let safe = 0.95 / norm;
    let (sigma, tau) = match (cfg.sigma, cfg.tau) {
        (Some(s), Some(t)) => (s, t),
        (Some(s), None) => (s, safe * safe / s),
        (None, Some(t)) => (safe * safe / t, t),
        (None, None) => (safe, safe),
    };
    check_steps(sigma, tau, norm)?;
    Ok((sigma, tau))
}

struct Parts<'k, T, K: ?Sized, F: ?Sized, G: ?Sized> {
    k: &'k K,
    f: &'k F,
    g: &'k G,
    sigma: T,
    tau: T,
    x_off: usize,
    y_off: usize,
}

impl<T, K, F, G> Parts<'_, T, K, F, G>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    fn dual_step(&self, y: &mut [T], kx: &[T]) {
        for (yi, &v) in y.iter_mut().zip(kx) {
            *yi = *yi + self.sigma * v;
        }
        self.f.prox_conjugate_into(y, self.sigma, self.y_off);
    }

    /// `f(Kx) + g(x)`, given `Kx`.
    fn objective(&self, x: &[T], kx: &[T]) -> Result<f64> {
        let fy = self.k.dual_layout().sum(self.f.value_at(kx, self.y_off))?;
        Ok(fy + self.g.value(x, self.k.primal_layout())?)
    }

    /// Records the objective and fixed-point residuals
    /// `‖x − T_x(x, y)‖/τ` and `‖y − T_y(x, y)‖/σ`; returns whether to stop.
    fn evaluate(&self, mon: &mut Monitor<'_>, iter: usize, x: &[T], y: &[T]) -> Result<bool> {
        let kx = self.k.forward(x)?;
        let kty = self.k.adjoint(y)?;
        let mut xs = x.to_vec();
        self.g.update(&mut xs, &kty, self.tau, self.x_off)?;
        let mut ys = y.to_vec();
        self.dual_step(&mut ys, &kx);
        let primal = dist(self.k.primal_layout(), x, &xs)? / self.tau.as_f64();
        let dual = dist(self.k.dual_layout(), y, &ys)? / self.sigma.as_f64();
        mon.residual(iter, primal, dual);
        mon.record(iter, self.objective(x, &kx)?)
    }
}

fn dist<T: Scalar>(layout: Layout<'_>, a: &[T], b: &[T]) -> Result<f64> {
    let d: Vec<T> = a.iter().zip(b).map(|(&u, &v)| u - v).collect();
    Ok(layout.dot(&d, &d)?.sqrt())
}

fn check_lengths<T: Scalar, K: LinearOperator<T> + ?Sized>(k: &K, x: &[T], y: &[T]) -> Result<()> {
    if x.len() != k.primal_local_len() || y.len() != k.dual_local_len() {
        return Err(Error::Shape(format!(
            "starting points of lengths ({}, {}) but operator expects ({}, {})",
            x.len(),
            y.len(),
            k.primal_local_len(),
            k.dual_local_len()
        )));
    }
    Ok(())
}

#[allow(clippy::type_complexity)]
fn parts<'k, T, K, F, G>(k: &'k K, f: &'k F, g: &'k G, cfg: &SolverConfig) -> Result<(Parts<'k, T, K, F, G>, f64, f64)>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: ?Sized,
    G: ?Sized,
{
    let (sigma, tau) = resolve_steps(k, cfg)?;
    let p = Parts {
        k,
        f,
        g,
        sigma: T::lit(sigma),
        tau: T::lit(tau),
        x_off: k.primal_layout().offset(k.primal_local_len()),
        y_off: k.dual_layout().offset(k.dual_local_len()),
    };
    Ok((p, sigma, tau))
}

/// Primal-dual hybrid gradient for `min_x f(Kx) + g(x)`:
///
/// ```text
/// yⁿ⁺¹ = prox_{σf*}(yⁿ + σK x̄ⁿ)
/// xⁿ⁺¹ = prox_{τg}(xⁿ − τKᵀyⁿ⁺¹)
/// x̄ⁿ⁺¹ = 2xⁿ⁺¹ − xⁿ
/// ```
///
/// Steps default to `σ = τ = 0.95/‖K‖`.
pub fn pdhg<T, K, F, G>(k: &K, f: &F, g: &G, x0: Vec<T>, y0: Vec<T>, cfg: &SolverConfig) -> Result<PdhgResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    check_lengths(k, &x0, &y0)?;
    let (p, sigma, tau) = parts(k, f, g, cfg)?;
    let two = T::lit(2.0);
    let mut x = x0;
    let mut y = y0;
    let mut xbar = x.clone();
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, p.objective(&x, &k.forward(&x)?)?)?;
    for iter in 1..=cfg.max_iters {
        let kxb = k.forward(&xbar)?;
        p.dual_step(&mut y, &kxb);
        let kty = k.adjoint(&y)?;
        xbar.copy_from_slice(&x);
        g.update(&mut x, &kty, p.tau, p.x_off)?;
        for (b, &xi) in xbar.iter_mut().zip(&x) {
            *b = two * xi - *b;
        }
        if mon.due(iter) && p.evaluate(&mut mon, iter, &x, &y)? {
            break;
        }
    }
    Ok(PdhgResult {
        x,
        y,
        extrapolated: xbar,
        trace: mon.finish(),
        sigma,
        tau,
    })
}

/// Dual-ordered PDHG:
///
/// ```text
/// xⁿ⁺¹ = prox_{τg}(xⁿ − τKᵀȳⁿ)
/// yⁿ⁺¹ = prox_{σf*}(yⁿ + σK xⁿ⁺¹)
/// ȳⁿ⁺¹ = 2yⁿ⁺¹ − yⁿ
/// ```
pub fn pdhg_dual<T, K, F, G>(k: &K, f: &F, g: &G, x0: Vec<T>, y0: Vec<T>, cfg: &SolverConfig) -> Result<PdhgResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    dual_form(k, f, g, x0, y0, 1.0, 0..0, cfg)
}

/// Stochastic dual-ordered PDHG. Each dual coordinate whose global index
/// lies in `sampled` is updated with probability `pi` and extrapolated by
/// `ȳⁿ⁺¹ = yⁿ⁺¹ + π⁻¹(yⁿ⁺¹ − yⁿ)`; the remaining coordinates are updated
/// every iteration. Coins are drawn for the whole sampled range from
/// `cfg.seed`, so the run does not depend on the number of workers.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_pdhg<T, K, F, G>(
    k: &K,
    f: &F,
    g: &G,
    x0: Vec<T>,
    y0: Vec<T>,
    pi: f64,
    sampled: Range<usize>,
    cfg: &SolverConfig,
) -> Result<PdhgResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::Config(format!("sampling probability must lie in (0, 1], got {pi}")));
    }
    if sampled.end > k.shape().0 || sampled.start > sampled.end {
        return Err(Error::Config(format!(
            "sampled range {sampled:?} outside the {} dual coordinates",
            k.shape().0
        )));
    }
    dual_form(k, f, g, x0, y0, pi, sampled, cfg)
}

#[allow(clippy::too_many_arguments)]
fn dual_form<T, K, F, G>(
    k: &K,
    f: &F,
    g: &G,
    x0: Vec<T>,
    y0: Vec<T>,
    pi: f64,
    sampled: Range<usize>,
    cfg: &SolverConfig,
) -> Result<PdhgResult<T>>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    check_lengths(k, &x0, &y0)?;
    let (p, sigma, tau) = parts(k, f, g, cfg)?;
    let n = y0.len();
    let local = p.y_off..p.y_off + n;
    let lo = sampled.start.max(local.start);
    let hi = sampled.end.min(local.end).max(lo);
    let inv_pi = T::lit(1.0 / pi);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut coins = vec![false; sampled.len()];

    let mut x = x0;
    let mut y = y0;
    let mut ybar = y.clone();
    let mut y_prev = y.clone();
    let mut mon = Monitor::new(cfg, Sense::Minimize, false, p.objective(&x, &k.forward(&x)?)?)?;
    for iter in 1..=cfg.max_iters {
        let kty = k.adjoint(&ybar)?;
        g.update(&mut x, &kty, p.tau, p.x_off)?;
        let kx = k.forward(&x)?;
        y_prev.copy_from_slice(&y);
        for c in coins.iter_mut() {
            *c = rng.random::<f64>() < pi;
        }
        let (a, b) = (lo - p.y_off, hi - p.y_off);
        p.dual_step_range(&mut y, &kx, 0..a, p.y_off);
        for j in a..b {
            if coins[p.y_off + j - sampled.start] {
                p.dual_step_range(&mut y, &kx, j..j + 1, p.y_off);
            }
        }
        p.dual_step_range(&mut y, &kx, b..n, p.y_off);
        for j in 0..n {
            let theta = if (a..b).contains(&j) { inv_pi } else { T::one() };
            ybar[j] = y[j] + theta * (y[j] - y_prev[j]);
        }
        if mon.due(iter) && p.evaluate(&mut mon, iter, &x, &y)? {
            break;
        }
    }
    Ok(PdhgResult {
        x,
        y,
        extrapolated: ybar,
        trace: mon.finish(),
        sigma,
        tau,
    })
}

impl<T, K, F, G> Parts<'_, T, K, F, G>
where
    T: Scalar,
    K: LinearOperator<T> + ?Sized,
    F: Proximable + ?Sized,
    G: PrimalTerm<T> + ?Sized,
{
    fn dual_step_range(&self, y: &mut [T], kx: &[T], r: Range<usize>, y_off: usize) {
        if r.is_empty() {
            return;
        }
        let start = r.start;
        let seg = &mut y[r.clone()];
        for (yi, &v) in seg.iter_mut().zip(&kx[r]) {
            *yi = *yi + self.sigma * v;
        }
        self.f.prox_conjugate_into(seg, self.sigma, y_off + start);
    }
}
