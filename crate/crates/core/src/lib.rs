//! Simulation and verification toolkit for Λ-coalescents.
//!
//! * [`measure`]: finite measures on `[0, 1]`, collision rates and merger sampling.
//! * [`kernel`]: the Laplace exponent `ψ`, Grey's condition and the speed function `v`.
//! * [`engine`]: exact simulation of genealogies and block-count trajectories.
//! * [`mutation`]: infinite-alleles and infinite-sites statistics on simulated trees.
//! * [`asymptotics`]: closed-form large-`n` predictions.
//! * [`harness`]: replicate experiments and convergence reports.

pub mod asymptotics;
pub mod error;
pub mod harness;
pub mod quad;
pub mod rng;
pub mod special;

pub mod engine;
pub mod kernel;
pub mod measure;
pub mod mutation;

pub use engine::{simulate_tree, BlockTrajectory, GenealogyTree, Simulator};
pub use error::{Error, Result};
pub use kernel::{GreyStatus, LevyKernel};
pub use measure::{LambdaMeasure, MeasureSpec};
