use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dstat", version, about = "Distributed statistical computing experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Number of workers in the world.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub workers: u64,

    #[arg(long, global = true, value_enum, default_value_t = BackendArg::Inproc)]
    pub backend: BackendArg,

    /// Base seed; worker k draws from seed + k where it samples locally.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,

    /// Iteration cap; each solver has its own default.
    #[arg(long, global = true)]
    pub iters: Option<usize>,

    /// Relative change that stops a solver between two evaluations.
    #[arg(long, global = true, default_value_t = 1e-5)]
    pub tol: f64,

    /// Iterations between objective evaluations.
    #[arg(long, global = true, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub eval_every: u64,

    /// Output directory (a file path for gen-data).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Record wall-clock seconds in traces instead of zeros.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Inproc,
    Multiproc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F64,
    F32,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of pi.
    Mcpi {
        /// Draws per worker.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },

    /// Checks distributed products against the gathered dense product.
    MmBench {
        /// Scenario number 1-11, or "all".
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, default_value_t = 64)]
        rows: usize,
        #[arg(long, default_value_t = 64)]
        cols: usize,
        /// Shared dimension; defaults to --cols.
        #[arg(long)]
        inner: Option<usize>,
    },

    /// Nonnegative matrix factorization X ~ VW.
    Nmf {
        /// Data matrix (DSTM or .csv); synthetic uniform data otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, value_enum, default_value_t = NmfMethod::Mult)]
        method: NmfMethod,
        /// Ridge penalty on both factors.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },

    /// Emission tomography reconstruction.
    Pet {
        /// Directory holding e.dstm, d.dstm and y.dstm; a synthetic toy otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        grid: usize,
        #[arg(long, default_value_t = 12)]
        detectors: usize,
        /// Phantom intensity scale of the synthetic toy.
        #[arg(long, default_value_t = 20.0)]
        scale: f64,
        #[arg(long, value_enum, default_value_t = PetMethod::Mm)]
        method: PetMethod,
        /// Ridge penalty of the MM method.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Total variation penalty of the primal-dual methods.
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        /// Update probability of the stochastic method.
        #[arg(long, default_value_t = 0.2)]
        pi: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },

    /// Multidimensional scaling by stress majorization.
    Mds {
        /// Source points (DSTM or .csv) whose distances are embedded.
        #[arg(long, conflicts_with = "dissimilarities")]
        input: Option<PathBuf>,
        /// Square dissimilarity matrix to embed.
        #[arg(long)]
        dissimilarities: Option<PathBuf>,
        /// Number of synthetic source points.
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// Embedding dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Dimension of synthetic source points; defaults to --dim.
        #[arg(long)]
        source_dim: Option<usize>,
    },

    /// L1-penalized Cox regression.
    Cox {
        /// Design matrix (DSTM or .csv).
        #[arg(long, requires = "survival")]
        input: Option<PathBuf>,
        /// Two columns: follow-up time and event indicator.
        #[arg(long, requires = "input")]
        survival: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        /// Step size; 1/L by default.
        #[arg(long)]
        step: Option<f64>,
        /// Covariates left out of the penalty, comma separated.
        #[arg(long, value_delimiter = ',')]
        unpenalized: Vec<usize>,
    },

    /// Writes deterministic synthetic data.
    GenData {
        #[arg(long, value_enum)]
        kind: DataKind,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        cols: usize,
        #[arg(long, default_value_t = 4)]
        grid: usize,
        #[arg(long, default_value_t = 12)]
        detectors: usize,
        #[arg(long, default_value_t = 20.0)]
        scale: f64,
    },

    /// Compares forward mode, reverse mode and finite differences.
    Adcheck {
        /// Point at which the example function is differentiated.
        #[arg(long, value_delimiter = ',', default_values_t = [3.0, 2.0])]
        at: Vec<f64>,
        /// Random graphs checked against finite differences.
        #[arg(long, default_value_t = 50)]
        graphs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NmfMethod {
    Mult,
    Apg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PetMethod {
    Mm,
    Pdhg,
    PdhgDual,
    Spdhg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Uniform,
    Normal,
    PetToy,
    MdsPoints,
}
