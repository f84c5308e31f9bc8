//! Riemannian optimization under strong local retractions.
//!
//! The crate provides Riemannian Backtracking GD, Local Backtracking GD and
//! New Q-Newton's method (plus Newton, Random Newton and fixed-rate GD
//! baselines) on three manifold backends: Euclidean space, open subsets of
//! Euclidean space with a per-point retraction radius `r(x)`, and the unit
//! sphere. The [`bench`] module packages the builtin experiment corpus, the
//! two-branch ball minimization and the smallest-eigenvalue application; the
//! [`cli`] module backs the `manifold-descent` binary.

// `!(a > b)` comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
mod error;
pub mod linalg;
pub mod manifold;
pub mod objective;
pub mod optim;
pub(crate) mod vecops;

pub use error::{Error, Result};
pub use linalg::{EigenDecomposition, SymMatrix};
pub use manifold::{Manifold, SphereRetraction};
pub use objective::{Objective, Problem, QuadraticForm};
pub use optim::{
    BacktrackingParams, IterateTrace, Method, NewQNewtonParams, StepRecord, StopCriteria,
    Termination,
};
