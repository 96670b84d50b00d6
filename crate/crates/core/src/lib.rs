//! Equal-weight sum-of-norms (convex) clustering.
//!
//! Given points `a_1..a_n` in `R^d`, sum-of-norms clustering minimizes
//!
//! ```text
//!   1/2 sum_i |x_i - a_i|^2 + lambda sum_{i<j} |x_i - x_j|
//! ```
//!
//! and groups indices whose optimal representatives coincide. The crate
//! provides:
//!
//! - [`solver`]: a splitting method with closed-form updates;
//! - [`certificate`]: subgradient multipliers that decide whether a candidate
//!   index set fuses into one cluster without solving the whole problem;
//! - [`clusterpath`]: warm-started sweeps over `lambda`, agglomeration checks
//!   and the induced merge tree;
//! - [`mixture`]: Gaussian-mixture sampling, the `lambda` window that
//!   guarantees recovery of the high-density core of each component, and a
//!   recovery experiment harness.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod clusterpath;
pub mod error;
pub mod mixture;
pub mod model;
pub mod solver;
mod union_find;

pub use certificate::{
    certify_partition, check_sufficient, least_squares_multipliers, refine_multipliers,
    rescale_certificate, CertificateConfig, CertificateResult, CertificateStatus, Multipliers,
};
pub use clusterpath::{
    check_agglomeration, compute_path, merge_tree, refine_merge_lambdas, ClusterPath, Dendrogram,
    GridSpacing, LambdaGrid, MergeEvent, MergeNode,
};
pub use error::{Error, Result};
pub use mixture::{
    chi2_cdf, core_sets, lambda_lower_bound, lambda_upper_bound, run_recovery_experiment,
    sample_mixture, separation_bound, LambdaBounds, LambdaPolicy, MixtureModel, RecoveryExperiment,
    RecoveryReport, TrialStatus,
};
pub use model::{
    default_delta, extract_clusters, is_refinement, objective, Dataset, Partition, Points,
};
pub use solver::{
    prox_group_norm, solve, solve_with_state, splitting_step, ClusterDelta, Residuals,
    SolverConfig, SonSolution, SplittingState,
};
