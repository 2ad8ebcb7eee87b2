//! Preemptive scheduling algorithms for weighted flow time and its p-norms.
//!
//! The crate covers a single tool chain: exact feasibility checks for
//! deadline-constrained preemptive scheduling, the classic
//! minimum-weight-late-jobs dynamic program, two deadline-guessing
//! approximation solvers for weighted flow time on one machine, a
//! grid-based approximation scheme for unrelated machines, exact
//! brute-force oracles for small instances, and seeded instance
//! generators. All comparisons that decide algorithmic behaviour are
//! exact; irrational p-norm costs are handled symbolically with
//! certified interval comparisons.

pub mod cost;
pub mod dp_poly;
pub mod dp_pseudo;
pub mod edf;
pub mod gen;
pub mod instance;
pub mod lawler_moore;
pub mod oracle;
pub mod qptas;

/// Crate-wide error type.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// Malformed input document or CLI-level value.
    #[error("parse error: {0}")]
    Parse(String),
    /// Structurally valid input that violates an instance invariant.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    /// A schedule failed validation.
    #[error("invalid schedule: {0}")]
    InvalidSchedule(#[from] instance::Violation),
    /// The configured resource budget (states, cells, slots) was exceeded.
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    /// An internal invariant did not hold; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
