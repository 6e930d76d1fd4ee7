//! The `audit` command: exactness, optimality, and group-law suites plus
//! the invariance-through-a-statistic counterexample.

use groupinv_core::evalue::{exactness_audit, traditional_test, TestStatistic};
use groupinv_core::group::{GroupSpec, Orbit, Point};
use groupinv_core::suites::{self, SuiteOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct AuditConfig {
    pub seed: u64,
    /// Replications for the counterexample simulation.
    pub replications: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            seed: 3,
            replications: 10_000,
        }
    }
}

#[derive(Debug)]
pub struct AuditReport {
    pub outcomes: Vec<SuiteOutcome>,
    /// Rejection rate of the first-coordinate test at alpha = 1/3 when the
    /// data is (U1, U2, U2): approximately 0.5, demonstrating invalidity
    /// when invariance-through-the-statistic fails.
    pub counterexample_rate: f64,
    /// The same harness on genuinely exchangeable data: anchored at alpha.
    pub exchangeable_rate: f64,
    /// Exactness audit of the deliberately broken constant-2 e-value,
    /// which must deviate by 1.
    pub injected_deviation: f64,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass())
            && (self.counterexample_rate - 0.5).abs() <= 0.02
            && self.exchangeable_rate <= 1.0 / 3.0 + 0.01
            && (self.injected_deviation - 1.0).abs() <= 1e-12
    }

    pub fn worst_by_suite(&self) -> Vec<(String, f64)> {
        let mut buckets: Vec<(String, f64)> = Vec::new();
        for o in &self.outcomes {
            let suite = o.name.split_whitespace().next().unwrap_or("?").to_string();
            match buckets.iter_mut().find(|(s, _)| *s == suite) {
                Some((_, worst)) => {
                    if o.worst_deviation.abs() > worst.abs() {
                        *worst = o.worst_deviation;
                    }
                }
                None => buckets.push((suite, o.worst_deviation)),
            }
        }
        buckets
    }
}

pub fn run_audit(cfg: &AuditConfig) -> anyhow::Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcomes = Vec::new();
    outcomes.extend(suites::exactness_grid(1e-10)?);
    outcomes.extend(suites::mc_exhaustive(1e-12)?);
    outcomes.extend(suites::log_optimality(20, 1e-12, &mut rng)?);
    outcomes.extend(suites::np_optimality(20, 0.1, 1e-12, &mut rng)?);
    outcomes.extend(suites::group_laws(&mut rng)?);
    outcomes.extend(suites::representative_invariance(&mut rng)?);
    outcomes.extend(suites::inversion_kernel_reconstruction(&mut rng)?);
    outcomes.extend(suites::stabilizer_closure()?);
    outcomes.extend(suites::haar_pushforward_uniformity(100_000, &mut rng)?);

    let counterexample_rate = counterexample_rejection_rate(cfg.replications, cfg.seed, false);
    let exchangeable_rate = counterexample_rejection_rate(cfg.replications, cfg.seed, true);

    let orbit = Orbit::enumerate(&Point::tokens(vec![1, 2, 3]), &GroupSpec::Symmetric(3))?;
    let injected = exactness_audit(|_| Ok(2.0), &orbit)?;

    Ok(AuditReport {
        outcomes,
        counterexample_rate,
        exchangeable_rate,
        injected_deviation: injected - 1.0,
    })
}

/// The counterexample: with `S` = first coordinate, equality in
/// distribution of `S(Y)` and `S(GY)` alone does not make the traditional
/// test valid. Data `(U1, U2, U2)` satisfies it, yet the test at
/// alpha = 1/3 rejects half the time.
pub fn counterexample_rejection_rate(replications: usize, seed: u64, exchangeable: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stat = TestStatistic::new("first coordinate", |y: &Point| y.coord(0));
    let spec = GroupSpec::Symmetric(3);
    let alpha = 1.0 / 3.0;
    let mut rejections = 0usize;
    for _ in 0..replications {
        let u1: f64 = rng.random_range(0.0..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        let y = if exchangeable {
            let u3: f64 = rng.random_range(0.0..1.0);
            Point::reals(vec![u1, u2, u3])
        } else {
            Point::reals(vec![u1, u2, u2])
        };
        let r = traditional_test(&stat, &y, &spec, alpha).expect("enumerable");
        if (r.value - 1.0 / alpha).abs() < 1e-9 {
            rejections += 1;
        }
    }
    rejections as f64 / replications as f64
}
