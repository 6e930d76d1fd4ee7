//! Experiment drivers behind the `groupinv` binary: simulations, audits,
//! the toy e-process, and the hot-hand pipeline. The binary is a thin
//! argument parser over these modules so tests can drive them directly.

pub mod audit;
pub mod case_control;
pub mod hothand_run;
pub mod seeds;
pub mod symmetry;
pub mod toy;
pub mod trace;

/// Ville calibration bound for a null simulation: the empirical crossing
/// fraction of `1/alpha` may exceed `alpha` only by Monte Carlo noise.
pub fn ville_bound(alpha: f64, replications: usize) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / replications as f64).sqrt()
}
