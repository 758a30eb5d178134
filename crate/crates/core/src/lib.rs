//! Stagewise enlargement of batch size (SEBS) for SGD-based learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`], [`rng`], [`batch`], [`oracle`], [`trace`]: dense vectors,
//!   named random streams, mini-batch sampling, finite-sum gradient oracles
//!   and iterate tracing shared by every solver.
//! - [`problems`]: finite-sum problems with known optima (the diagonal
//!   quadratic and a ridge least-squares family).
//! - [`optim`]: one-stage solvers (penalty SGD, Polyak momentum SGD and
//!   anchored AdaGrad) with a fixed batch size and gradient budget.
//! - [`stagewise`]: multi-stage drivers (SEBS, mSEBS, AdaSEBS and classical
//!   stagewise SGD) plus update/gradient accounting.
//! - [`schedules`]: theory-driven stage schedules and bound calculators.
//! - [`experiments`]: reproducible studies built on the above.
//! - [`report`]: CSV tables with round-trip float formatting.
//!
//! Replicate runs fan out over rayon when the `parallel` feature is enabled
//! (the default); see [`par`].

pub mod batch;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod par;
pub mod problems;
pub mod report;
pub mod rng;
pub mod schedules;
pub mod stagewise;
pub mod trace;

pub use batch::{sample_batch, BatchIndices};
pub use error::{Error, Result};
pub use linalg::Vector;
pub use oracle::{estimate_sigma2, minibatch_gradient, FiniteSumProblem};
pub use par::Execution;
pub use problems::{DiagonalQuadraticProblem, ProblemConstants, RidgeProblem};
pub use rng::{Rng, RunStreams, Stream};
pub use trace::{IterateTrace, TraceLevel, TraceRecord};
