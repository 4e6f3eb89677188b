//! Exact theory and simulation of continual learning in overparameterized
//! linear regression.
//!
//! A sequence of `T` linear regression tasks is learned one after another by
//! a single model. For each task the learner moves to the interpolating
//! solution closest to the previous model (the minimum-norm update), or,
//! when there are more samples than features, to the ordinary least-squares
//! solution. The crate provides:
//!
//! * [`task`]: task ensembles, their geometric summary (norms and pairwise
//!   distances of the ground truths) and the overparameterization ratio.
//! * [`theory`]: closed-form expected forgetting and generalization error,
//!   per-task expected errors, their recursions and the two-task special case.
//! * [`sim`]: a deterministic Monte Carlo simulator of the sequential learner.
//! * [`ordering`]: scoring and exhaustive search of task orders.
//! * [`harness`]: scenario builders, parameter sweeps, CSV output and the CLI
//!   plumbing used by the `cl-lab` binary.
//!
//! Task indices are 0-based throughout the library. The CLI and CSV output
//! use 1-based task labels.

pub mod harness;
pub mod ordering;
pub mod sim;
pub mod task;
pub mod theory;

pub use task::{OverparamRatio, TaskEnsemble, TaskError, TaskGeometry};
pub use theory::{Regime, SystemParams, TheoryError};
