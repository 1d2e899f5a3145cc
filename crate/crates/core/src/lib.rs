//! Incremental discovery of linearly separable subclasses.
//!
//! A positive class with multi-modal structure rarely fits one linear
//! large-margin model. This crate repeatedly finds the largest subset of
//! the remaining positives that separates well from *all* negatives,
//! records it as an expert, and continues on what is left, yielding an
//! ordered ensemble whose core sizes typically follow a long-tailed
//! distribution with hard samples isolated as near-singletons.
//!
//! The pieces:
//!
//! - [`dataset`]: positives-first datasets, CSV ingestion, and a synthetic
//!   multi-modal generator with planted ground truth.
//! - [`loss`]: hinge, self-paced, and ramp losses plus both risk
//!   assemblers, related by an exact pointwise shift identity.
//! - [`solver`]: deterministic inner solver for the fixed-indicator convex
//!   problem, with a primal-dual gap certificate.
//! - [`selfpaced`]: alternating convex search with the growing inclusion
//!   schedule.
//! - [`rampcccp`]: the ramp-loss twin solved by outer linearization, and
//!   the numerical equivalence harness between the two formulations.
//! - [`miner`]: the incremental discovery loop with sample sharing.
//! - [`ensemble`]: pooled max scoring and exact average precision.
//! - [`oracle`]: brute-force references used by the verification suite.
//!
//! Scoring and evaluation run data-parallel under the default `parallel`
//! feature and fall back to sequential loops without it; results are
//! bit-identical either way.

pub mod dataset;
pub mod ensemble;
pub mod loss;
pub mod miner;
pub mod oracle;
pub mod rampcccp;
pub mod selfpaced;
pub mod solver;

mod error;
mod parallel;

pub use error::{Error, Result};
