//! Timing helpers shared by the benchmarks.

use std::time::{Duration, Instant};

use dstat::{spawn_world, Communicator, Result};

/// Builds state once per rank with `setup`, then times `iters` calls of
/// `work` on rank 0, with barriers so the clock covers the slowest rank.
pub fn time_world<S, F, W>(workers: usize, iters: u64, setup: F, work: W) -> Duration
where
    F: Fn(&Communicator) -> Result<S> + Sync,
    W: Fn(&Communicator, &S) -> Result<()> + Sync,
{
    let times = spawn_world(workers, |c| {
        let state = setup(&c)?;
        c.barrier()?;
        let start = Instant::now();
        for _ in 0..iters {
            work(&c, &state)?;
        }
        c.barrier()?;
        Ok(start.elapsed())
    })
    .expect("benchmark world failed");
    times[0]
}
