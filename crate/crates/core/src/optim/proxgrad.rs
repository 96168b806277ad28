use super::{IterationTrace, Monitor, Objective, Sense, SolverConfig};
use crate::error::{Error, Result};
use crate::prox::Proximable;
use crate::scalar::Scalar;

/// Minimizes `f(x) + g(x)` by `x ← prox_{γg}(x − γ∇f(x))`.
///
/// `γ` defaults to `1/L`; steps above `2/L` are rejected. With `γ ≤ 1/L`
/// the objective must not increase and the trace records any step that
/// does.
pub fn proximal_gradient<T, O, P>(
    f: &O,
    g: &P,
    x0: Vec<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, IterationTrace)>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    P: Proximable + ?Sized,
{
    cfg.validate()?;
    let lipschitz = f.lipschitz();
    let gamma = match (cfg.gamma, lipschitz) {
        (Some(g), Some(l)) if g > 2.0 / l => {
            return Err(Error::Config(format!("step {g} exceeds 2/L = {}", 2.0 / l)));
        }
        (Some(g), _) => g,
        (None, Some(l)) if l > 0.0 => 1.0 / l,
        (None, _) => {
            return Err(Error::Config("no step given and no Lipschitz constant known".into()));
        }
    };
    let descent = lipschitz.is_some_and(|l| gamma <= 1.0 / l);

    let layout = f.layout();
    let offset = layout.offset(x0.len());
    let objective = |x: &[T]| -> Result<f64> { Ok(f.value(x)? + layout.sum(g.value_at(x, offset))?) };

    let step = T::lit(gamma);
    let mut x = x0;
    let mut mon = Monitor::new(cfg, Sense::Minimize, descent, objective(&x)?)?;
    for iter in 1..=cfg.max_iters {
        let grad = f.gradient(&x)?;
        for (xi, gi) in x.iter_mut().zip(grad) {
            *xi = *xi - step * gi;
        }
        g.prox_into(&mut x, step, offset);
        if mon.due(iter) && mon.record(iter, objective(&x)?)? {
            break;
        }
    }
    Ok((x, mon.finish()))
}
