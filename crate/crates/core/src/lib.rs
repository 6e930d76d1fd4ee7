//! E-values for testing group invariance.
//!
//! This crate measures evidence against the hypothesis that a random
//! variable is invariant under a compact group: exchangeability
//! (permutations), symmetry about zero (sign flips), sphericity (orthonormal
//! matrices), and within-batch exchangeability (blockwise products).
//!
//! The layers:
//!
//! * [`group`] — group algebra, actions, Haar sampling, orbits, orbit
//!   representatives, inversion kernels, stabilizer subgroups;
//! * [`evalue`] — generic exact e-values built from an arbitrary
//!   non-negative statistic, Monte Carlo variants, the traditional
//!   randomized invariance test, and enumeration-based exactness audits;
//! * [`optimal`] — density-based optimal e-values (Neyman-Pearson,
//!   log-optimal, generalized-mean, expected-utility) plus closed-form
//!   Gaussian specializations;
//! * [`sequential`] — conditional e-values through stabilizer subgroups,
//!   test martingales, and finite-space e-processes built as infima of
//!   orbit-wise Doob martingales;
//! * [`hothand`] — the orbit-conditional hot-hand alternative for binary
//!   shot sequences.
//!
//! All operations are pure functions of their inputs plus an explicit
//! random state; values are immutable and safe to share across threads.

pub mod error;
pub mod evalue;
pub mod group;
pub mod hothand;
pub mod numeric;
pub mod optimal;
pub mod sequential;
pub mod suites;

pub use error::{Error, Result};

/// Componentwise tolerance for equality of real coordinates (stabilizer
/// membership, orbit identification).
pub const REAL_EQ_TOL: f64 = 1e-12;
