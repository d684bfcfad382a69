//! Exact branch-and-cut solver for the generalized maximal covering location
//! problem: open exactly `p` facilities so that the weighted sum of covered
//! customers is maximal, where customer weights may be negative.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: instances, solutions, completion rule, brute-force oracle.
//! * [`ingest`]: OR-Library p-median parsing, planar generation, weights,
//!   and the native coverage file format.
//! * [`presolve`]: isomorphic aggregation, dominance pairs, constraint
//!   reduction, transitive pruning and the singleton/nesting rules.
//! * [`lp`]: LP relaxation builder, a bounded dual simplex, and closed-form
//!   relaxation evaluators.
//! * [`bnc`]: best-bound branch-and-cut with two-customer cuts.
//! * [`harness`]: solver settings, per-run reports and metrics.

mod bits;
pub mod bnc;
pub mod harness;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod presolve;

pub use model::{Customer, FacilityVector, Instance, Solution, Weight};
