#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Tabular distributionally robust reinforcement learning.
//!
//! The crate is `no_std` and only needs an allocator. It contains:
//!
//! * [`mdp`]: the tabular model, uncertainty sets, Q-tables and policies.
//! * [`dual`]: worst-case expectations over TV, chi-square and KL balls via
//!   their scalar dual problems, plus a primal brute-force oracle.
//! * [`mlmc`]: the threshold multilevel Monte Carlo estimator of the robust
//!   Bellman operator.
//! * [`robustdp`]: exact robust value iteration and policy evaluation.
//! * [`learner`]: synchronous Q-learning driven by the estimator.
//! * [`envs`]: Garnet, recycling robot, FrozenLake and Gambler benchmarks.
//!
//! IO, file formats and the command-line harness live in the `tmlmc` crate.

extern crate alloc;

pub mod dual;
pub mod envs;
pub mod error;
pub mod generative;
pub mod learner;
mod math;
pub mod mdp;
pub mod mlmc;
pub mod rng;
pub mod robustdp;

pub use error::{Error, Result};
pub use generative::{GenerativeModel, NominalModel};
pub use mdp::{Divergence, Policy, QTable, TabularMDP, UncertaintySpec};
