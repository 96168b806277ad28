use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::{Sense, SolverConfig, MONOTONE_SLACK};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub seconds: f64,
}

/// Primal and dual residual norms at an evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub residuals: Vec<Residual>,
    /// Iterations at which the objective moved the wrong way beyond slack.
    pub violations: Vec<usize>,
    /// Whether the stopping rule fired before `max_iters`.
    pub converged: bool,
}

impl IterationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    pub fn last_iter(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub const CSV_HEADER: &'static str = "iter,objective,seconds";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{},{:e},{}", r.iter, r.objective, r.seconds);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::Format("missing trace header".into()));
        }
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("bad trace row {line:?}"));
            if f.len() != 3 {
                return Err(bad());
            }
            records.push(TraceRecord {
                iter: f[0].trim().parse().map_err(|_| bad())?,
                objective: f[1].trim().parse().map_err(|_| bad())?,
                seconds: f[2].trim().parse().map_err(|_| bad())?,
            });
        }
        Ok(Self {
            records,
            ..Self::default()
        })
    }

    /// Indices `k` where record `k` is worse than record `k − 1` by more
    /// than the relative slack.
    pub fn monotone_violations(&self, sense: Sense, slack: f64) -> Vec<usize> {
        self.records
            .windows(2)
            .enumerate()
            .filter(|(_, w)| worse(sense, w[0].objective, w[1].objective, slack))
            .map(|(k, _)| k + 1)
            .collect()
    }
}

fn worse(sense: Sense, prev: f64, next: f64, slack: f64) -> bool {
    let up = match sense {
        Sense::Minimize => next - prev,
        Sense::Maximize => prev - next,
    };
    up / (prev.abs() + 1.0) > slack
}

/// Applies the evaluation schedule, the stopping rule and the descent check.
pub(crate) struct Monitor<'a> {
    cfg: &'a SolverConfig,
    sense: Sense,
    check_monotone: bool,
    start: Instant,
    prev: f64,
    trace: IterationTrace,
}

impl<'a> Monitor<'a> {
    pub fn new(cfg: &'a SolverConfig, sense: Sense, check_monotone: bool, f0: f64) -> Result<Self> {
        cfg.validate()?;
        if f0.is_nan() {
            return Err(Error::Numerical("objective is NaN at the starting point".into()));
        }
        let mut m = Self {
            cfg,
            sense,
            check_monotone,
            start: Instant::now(),
            prev: f0,
            trace: IterationTrace::default(),
        };
        m.push(0, f0);
        Ok(m)
    }

    fn push(&mut self, iter: usize, objective: f64) {
        let seconds = if self.cfg.timing {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.trace.records.push(TraceRecord {
            iter,
            objective,
            seconds,
        });
    }

    pub fn due(&self, iter: usize) -> bool {
        iter.is_multiple_of(self.cfg.eval_every) || iter == self.cfg.max_iters
    }

    /// Records the objective at `iter`; returns whether to stop.
    pub fn record(&mut self, iter: usize, f: f64) -> Result<bool> {
        if f.is_nan() {
            return Err(Error::Numerical(format!("objective became NaN at iteration {iter}")));
        }
        self.push(iter, f);
        if self.check_monotone && worse(self.sense, self.prev, f, MONOTONE_SLACK) {
            self.trace.violations.push(iter);
            if self.cfg.strict {
                return Err(Error::Numerical(format!(
                    "objective moved from {} to {f} at iteration {iter}",
                    self.prev
                )));
            }
        }
        let stop = (f - self.prev).abs() / (f.abs() + 1.0) < self.cfg.tol;
        self.prev = f;
        if stop {
            self.trace.converged = true;
        }
        Ok(stop)
    }

    pub fn residual(&mut self, iter: usize, primal: f64, dual: f64) {
        self.trace.residuals.push(Residual { iter, primal, dual });
    }

    pub fn finish(self) -> IterationTrace {
        self.trace
    }
}
