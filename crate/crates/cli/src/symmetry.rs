//! Symmetry testing: the log-optimal sign-symmetry martingale versus the
//! unnormalized `exp(Z - Z^2/2)` payoff, streamed over i.i.d. Gaussian
//! observations.

use groupinv_core::optimal::{dlp_evalue, sign_symmetry_evalue};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::seeds::child_seed;
use crate::trace::QuantileTrace;

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryConfig {
    pub seed: u64,
    pub replications: usize,
    pub steps: usize,
    /// True mean of the streamed observations.
    pub effect: f64,
    /// Inverse temperature of the sign-symmetry e-value.
    pub mu: f64,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        SymmetryConfig {
            seed: 2,
            replications: 1000,
            steps: 60,
            effect: 1.0,
            mu: 1.0,
        }
    }
}

#[derive(Debug)]
pub struct SymmetryResult {
    pub trace_sign: QuantileTrace,
    pub trace_dlp: QuantileTrace,
    /// First step at which each path reached the threshold, per method.
    pub crossing_sign: Vec<Option<usize>>,
    pub crossing_dlp: Vec<Option<usize>>,
    pub threshold: f64,
}

impl SymmetryResult {
    pub fn median_crossing_sign(&self) -> Option<usize> {
        median_crossing(&self.crossing_sign)
    }

    pub fn median_crossing_dlp(&self) -> Option<usize> {
        median_crossing(&self.crossing_dlp)
    }

    pub fn crossing_fraction_sign(&self) -> f64 {
        self.crossing_sign.iter().filter(|c| c.is_some()).count() as f64
            / self.crossing_sign.len() as f64
    }

    pub fn crossing_fraction_dlp(&self) -> f64 {
        self.crossing_dlp.iter().filter(|c| c.is_some()).count() as f64
            / self.crossing_dlp.len() as f64
    }
}

/// Median with never-crossed counted as +infinity; `None` when more than
/// half the paths never crossed.
fn median_crossing(crossings: &[Option<usize>]) -> Option<usize> {
    let mut finite: Vec<usize> = crossings.iter().flatten().copied().collect();
    finite.sort_unstable();
    let n = crossings.len();
    let mid = n / 2; // 0-indexed median position for odd n; lower-median for even
    if finite.len() <= mid {
        None
    } else {
        Some(finite[mid])
    }
}

pub fn run_symmetry(cfg: &SymmetryConfig, threshold: f64) -> anyhow::Result<SymmetryResult> {
    let mut indexed: Vec<(usize, Path)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, rep as u64));
            (rep, one_path(cfg, threshold, &mut rng))
        })
        .collect();
    indexed.sort_by_key(|(rep, _)| *rep);
    let paths: Vec<Path> = indexed.into_iter().map(|(_, p)| p).collect();
    let trace_sign = QuantileTrace::from_running_maxima(
        &paths.iter().map(|p| p.max_sign.clone()).collect::<Vec<_>>(),
    )?;
    let trace_dlp = QuantileTrace::from_running_maxima(
        &paths.iter().map(|p| p.max_dlp.clone()).collect::<Vec<_>>(),
    )?;
    Ok(SymmetryResult {
        trace_sign,
        trace_dlp,
        crossing_sign: paths.iter().map(|p| p.cross_sign).collect(),
        crossing_dlp: paths.iter().map(|p| p.cross_dlp).collect(),
        threshold,
    })
}

struct Path {
    max_sign: Vec<f64>,
    max_dlp: Vec<f64>,
    cross_sign: Option<usize>,
    cross_dlp: Option<usize>,
}

fn one_path(cfg: &SymmetryConfig, threshold: f64, rng: &mut ChaCha8Rng) -> Path {
    let normal = Normal::new(cfg.effect, 1.0).unwrap();
    let mut log_sign = 0.0f64;
    let mut log_dlp = 0.0f64;
    let mut max_sign = Vec::with_capacity(cfg.steps);
    let mut max_dlp = Vec::with_capacity(cfg.steps);
    let mut cross_sign = None;
    let mut cross_dlp = None;
    let mut run_sign = 1.0f64;
    let mut run_dlp = 1.0f64;
    for t in 1..=cfg.steps {
        let z: f64 = normal.sample(rng);
        log_sign += sign_symmetry_evalue(&[z], cfg.mu).ln();
        log_dlp += dlp_evalue(z, false).ln();
        run_sign = run_sign.max(log_sign.exp());
        run_dlp = run_dlp.max(log_dlp.exp());
        if cross_sign.is_none() && run_sign >= threshold {
            cross_sign = Some(t);
        }
        if cross_dlp.is_none() && run_dlp >= threshold {
            cross_dlp = Some(t);
        }
        max_sign.push(run_sign);
        max_dlp.push(run_dlp);
    }
    Path {
        max_sign,
        max_dlp,
        cross_sign,
        cross_dlp,
    }
}
