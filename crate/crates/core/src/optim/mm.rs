use super::{IterationTrace, Monitor, Sense, SolverConfig};
use crate::error::Result;

/// Runs a majorization-minimization (or minorization-maximization) map
/// until the stopping rule fires. Every evaluation is checked against the
/// previous one; a move in the wrong direction beyond the relative slack
/// is recorded, or fails the run when `cfg.strict` is set.
pub fn mm_drive<S>(
    mut state: S,
    mut step: impl FnMut(&mut S) -> Result<()>,
    objective: impl Fn(&S) -> Result<f64>,
    sense: Sense,
    cfg: &SolverConfig,
) -> Result<(S, IterationTrace)> {
    let mut mon = Monitor::new(cfg, sense, true, objective(&state)?)?;
    for iter in 1..=cfg.max_iters {
        step(&mut state)?;
        if mon.due(iter) && mon.record(iter, objective(&state)?)? {
            break;
        }
    }
    Ok((state, mon.finish()))
}
