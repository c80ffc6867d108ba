//! Sample-efficient planning for stochastic shortest path (SSP) problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] holds the exact model, Bellman machinery and ground-truth solvers.
//! * [`sampler`] simulates a generative model and accumulates empirical counts.
//! * [`confidence`] builds empirical-Bernstein confidence radii.
//! * [`evi`] runs optimistic (extended) value iteration over those radii.
//! * [`pac`] contains the sample-complexity algorithms built on top.
//! * [`oracle`] is brute-force ground truth used by tests and the `verify` command.
//! * [`envs`] and [`experiment`] generate environments and drive reproducible runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod envs;
pub mod error;
pub mod evi;
pub mod experiment;
pub mod mdp;
pub mod oracle;
pub mod pac;
pub mod sampler;

pub use confidence::{bernstein_radius, certified_l1_bound, model_l1_distance, ConfidenceRadii};
pub use error::{Result, SspError};
pub use evi::{evi, extended_bellman, optimistic_policy_value, optimistic_row, ConfidenceSet, EviOutput};
pub use mdp::{CostMatrix, ModelScalars, Policy, SspMdp, TransitionTensor, ValueVector};
pub use pac::{PacConfig, PacRunLog};
pub use sampler::{CountTarget, EmpiricalModel, GenerativeModel};
