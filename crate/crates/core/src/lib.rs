//! Stability bounds for K-fold cross-validation.
//!
//! The pipeline runs from a loss matrix (hypotheses scored on a dataset)
//! through fold splits, per-round risks, Rademacher complexities, tail and
//! dependence profiles, to upper bounds on test error and a minimax choice
//! of the fold count. [`verify`] checks the bounds against simulators with
//! known population risks.
//!
//! Heavy loops (Monte Carlo sign draws, coverage trials, the K-scan) run on
//! rayon when the `parallel` feature is on; [`Exec::Sequential`] forces the
//! single-threaded path and gives identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod complexity;
pub mod data;
pub mod dependence;
pub mod error;
pub mod exec;
pub mod folds;
pub mod risk;
pub mod selection;
pub mod stats;
pub mod tails;
pub mod verify;

pub use bounds::{BoundConfig, BoundMode, BoundResult, Branch};
pub use complexity::{
    rademacher_complexity, rademacher_complexity_with, RademacherEstimate, RcMethod, RcOptions,
};
pub use data::{build_loss_matrix, Dataset, LossKind, LossMatrix, LossSpec, ModelClass, Ordering};
pub use dependence::{DependenceProfile, MixingModel};
pub use error::{Error, Result};
pub use exec::{derive_seed, Exec};
pub use folds::{blocked_kfold, random_kfold, FoldAssignment, Scheme};
pub use risk::{compute_risks, RiskSummary};
pub use selection::{select_k, SelectConfig, SelectionResult};
pub use tails::{TailClass, TailConfig, TailProfile};
