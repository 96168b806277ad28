//! The `dstat` command line: argument parsing, world launching and the
//! experiment subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod data;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use dstat::comm::multiproc;
use dstat::{spawn_world, Communicator, Error, Result};

pub use args::{BackendArg, Cli, Command, Common, DataKind, NmfMethod, PetMethod, Precision};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTITION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Exit status for an error that ended a run.
pub fn exit_code(err: &Error) -> i32 {
    match err.root_cause() {
        Error::Config(_) => EXIT_USAGE,
        Error::Partition(_) => EXIT_PARTITION,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::WorkerExit { code: Some(c) } => *c,
        _ => EXIT_FAILURE,
    }
}

/// Runs the command line `argv` (program name first) with the process's
/// standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let launcher = Launcher {
        common: &cli.common,
        argv: argv.get(1..).unwrap_or_default(),
    };
    match commands::dispatch(&cli.command, &launcher) {
        Ok(Some(report)) => {
            let _ = write!(out, "{report}");
            let _ = out.flush();
            if report.lines().any(|l| l.starts_with("FAIL")) {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            }
        }
        Ok(None) => EXIT_OK,
        Err(e) => {
            if !matches!(e.root_cause(), Error::WorkerExit { .. }) {
                let _ = writeln!(err, "error: {e}");
            }
            exit_code(&e)
        }
    }
}

/// Runs a per-rank program on the world chosen by the shared flags.
pub(crate) struct Launcher<'a> {
    pub common: &'a Common,
    argv: &'a [OsString],
}

impl Launcher<'_> {
    pub fn workers(&self) -> usize {
        self.common.workers as usize
    }

    /// Runs `program` on every rank and returns rank 0's report, or `None`
    /// in a process that is not rank 0 of a multi-process world.
    pub fn run<F>(&self, program: F) -> Result<Option<String>>
    where
        F: Fn(&Communicator) -> Result<String> + Sync,
    {
        match self.common.backend {
            BackendArg::Inproc => Ok(Some(spawn_world(self.workers(), |c| program(&c))?.swap_remove(0))),
            BackendArg::Multiproc if multiproc::is_worker() => {
                let c = multiproc::connect_from_env()?;
                if c.world_size() != self.workers() {
                    return Err(Error::Config(format!(
                        "joined a world of {} workers, expected {}",
                        c.world_size(),
                        self.workers()
                    )));
                }
                let report = program(&c)?;
                Ok(c.is_root().then_some(report))
            }
            BackendArg::Multiproc => {
                let exe = std::env::current_exe()?;
                multiproc::launch(self.workers(), &exe, self.argv, &[])?;
                Ok(None)
            }
        }
    }

    /// Fails with a partition error unless every dimension splits evenly.
    pub fn check_split(&self, dims: &[(&str, usize)]) -> Result<()> {
        let w = self.workers();
        for (name, n) in dims {
            if n % w != 0 {
                return Err(Error::Partition(format!("{name} {n} does not split over {w} workers")));
            }
        }
        Ok(())
    }
}
