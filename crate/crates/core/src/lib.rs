//! Stochastic mirror descent with computable nonasymptotic confidence
//! intervals on the optimal value of stochastic convex programs.
//!
//! The crate implements robust stochastic approximation, stochastic mirror
//! descent with Euclidean, entropy and p-norm proximal setups, the multistep
//! variants for uniformly convex objectives, the online confidence intervals
//! built from a single optimization run, extended polyhedral risk measures and
//! their risk-neutral reformulation, and a Monte-Carlo harness for coverage
//! and trajectory studies.

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN is
// rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod eprm;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod problem;
pub mod problems;
pub mod prox;
pub mod seeds;
pub mod sets;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::Norm;
pub use problem::{ConstantSheet, Draw, OracleSample, StochasticProblem};
pub use prox::{ProximalSetup, SetupKind};
pub use sets::FeasibleSet;
