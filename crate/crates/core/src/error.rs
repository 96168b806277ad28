use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A collective was entered with inconsistent kinds, roots or framing.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Buffer lengths disagree across ranks, or are not divisible as required.
    #[error("size error: {0}")]
    Size(String),

    /// A peer went away while a collective was in flight.
    #[error("rank {rank} lost its connection: {reason}")]
    Disconnected { rank: usize, reason: String },

    /// Rank 0 cancelled a collective because another rank failed it.
    #[error("collective aborted: {0}")]
    Aborted(String),

    /// A worker of the world failed; the world was aborted.
    #[error("rank {rank} failed: {source}")]
    RankFailed {
        rank: usize,
        #[source]
        source: Box<Error>,
    },

    /// A worker process ended unsuccessfully; `code` is its exit code if it had one.
    #[error("worker process exited with code {code:?}")]
    WorkerExit { code: Option<i32> },

    #[error("worker panicked: {0}")]
    Panicked(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// No distributed multiplication scenario matches the operand layouts.
    #[error("dispatch error: no scenario for A={a:?}, B={b:?}, out={out:?}")]
    Dispatch {
        a: crate::distmat::Partition,
        b: crate::distmat::Partition,
        out: Option<crate::distmat::Partition>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An iterative method failed to converge or misbehaved numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// The innermost error beneath any [`Error::RankFailed`] wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::RankFailed { source, .. } => source.root_cause(),
            e => e,
        }
    }

    pub fn into_root_cause(self) -> Error {
        match self {
            Error::RankFailed { source, .. } => source.into_root_cause(),
            e => e,
        }
    }
}
