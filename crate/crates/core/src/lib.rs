//! Distributed matrices, collective communication and parallel optimization
//! for statistical computing on SPMD worlds.
//!
//! - [`comm`]: worlds of workers and blocking collectives
//! - [`distmat`]: row/column/replicated distributed matrices and the eleven
//!   distributed multiplication scenarios
//! - [`prox`]: closed-form proximity operators
//! - [`optim`]: proximal gradient, primal-dual, ADMM, coordinate descent,
//!   SGD, MM driver and power iteration
//! - [`autodiff`]: forward and reverse mode over static graphs
//! - [`apps`]: NMF, PET, MDS, Cox regression and Monte Carlo π

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod autodiff;
pub mod comm;
pub mod distmat;
mod error;
pub mod optim;
pub mod prox;
mod scalar;

pub use comm::{spawn_world, Backend, CollectiveKind, Communicator};
pub use distmat::{DistMatrix, Init, Partition, Scenario};
pub use error::{Error, Result};
pub use scalar::Scalar;
