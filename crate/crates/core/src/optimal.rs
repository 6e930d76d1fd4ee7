//! Density-based optimal e-values for group invariance.
//!
//! Given an alternative density `q`, the optimal e-value against each
//! power target is a function of the likelihood ratio `q / qbar`, where
//! `qbar` is the group-averaged density. When densities are taken with
//! respect to an invariant reference measure (e.g. Lebesgue for the groups
//! treated here), `qbar` is constant on orbits and drops out, so the ratio
//! may be replaced by `q` itself.
//!
//! Orbit-conditional alternatives need no dedicated type: a density is free
//! to depend on the orbit representative of its argument (choose the
//! alternative from `rep(y)`, never from `y` itself), which keeps the
//! e-value valid and makes it optimal uniformly over mixtures across
//! orbits. Alternatives on the group itself are expressed by composing an
//! e-value on the group with the inversion kernel; see the tests for a
//! rank-based example.
//!
//! Related "soft-rank" statistics of the form `exp(kappa y_1) - c` can be
//! plugged straight into the generic e-value machinery; no dedicated
//! constructor ships for them.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::evalue::{EValueResult, NormalizationMode, TestStatistic};
use crate::group::{haar_sample, GroupSpec, Orbit, Point};
use crate::numeric::{bisect_decreasing, log_mean_exp, upper_quantile};

/// Tolerance for the orbit normalization residual of utility-optimal
/// e-values.
pub const LAMBDA_RESIDUAL_TOL: f64 = 1e-10;

/// What reference measure the density is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// A group-invariant reference (Lebesgue, counting measure): the
    /// group-averaged density is constant on orbits and is absorbed by the
    /// normalization, so only `q` enters.
    Invariant,
    /// A generic reference: the ratio `q / qbar` is used throughout.
    Generic,
}

type DensityFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// An alternative density `q`, with optional explicit `qbar` when the
/// reference measure is not invariant.
#[derive(Clone)]
pub struct AlternativeDensity {
    q: DensityFn,
    reference: ReferenceKind,
    qbar: Option<DensityFn>,
}

impl std::fmt::Debug for AlternativeDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AlternativeDensity({:?})", self.reference)
    }
}

impl AlternativeDensity {
    /// Density with respect to an invariant reference measure.
    pub fn invariant(q: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        AlternativeDensity {
            q: Arc::new(q),
            reference: ReferenceKind::Invariant,
            qbar: None,
        }
    }

    /// Density plus explicit group-averaged density w.r.t. a generic
    /// reference measure.
    pub fn with_reference(
        q: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        qbar: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AlternativeDensity {
            q: Arc::new(q),
            reference: ReferenceKind::Generic,
            qbar: Some(Arc::new(qbar)),
        }
    }

    pub fn reference(&self) -> ReferenceKind {
        self.reference
    }

    pub fn q(&self, y: &Point) -> f64 {
        (self.q)(y)
    }

    pub fn qbar(&self, y: &Point) -> Option<f64> {
        self.qbar.as_ref().map(|f| f(y))
    }

    /// Likelihood ratio `q / qbar`, or plain `q` for invariant references.
    /// Conventions: `x/0 = inf` for `x > 0`.
    pub fn ratio(&self, y: &Point) -> f64 {
        match self.reference {
            ReferenceKind::Invariant => self.q(y),
            ReferenceKind::Generic => {
                let num = self.q(y);
                let den = self.qbar(y).expect("generic reference carries qbar");
                if den == 0.0 {
                    if num == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    num / den
                }
            }
        }
    }

    /// Both `q` and `qbar` vanish: the e-value is 1 there by convention.
    pub fn is_null_point(&self, y: &Point) -> bool {
        match self.reference {
            ReferenceKind::Invariant => false,
            ReferenceKind::Generic => {
                self.q(y) == 0.0 && self.qbar(y).expect("generic reference carries qbar") == 0.0
            }
        }
    }
}

/// The group-averaged density `E_G[q(Gy)]`, by enumeration or Monte Carlo
/// (identity included as draw 0).
pub fn group_average_density<R: Rng + ?Sized>(
    alt: &AlternativeDensity,
    y: &Point,
    spec: &GroupSpec,
    mode: NormalizationMode,
    rng: &mut R,
) -> Result<f64> {
    let stat = density_stat(alt, DensityView::Q);
    match mode {
        NormalizationMode::ExactEnumeration => crate::evalue::orbit_mean(&stat, y, spec),
        NormalizationMode::MonteCarlo(m) => {
            let mut total = stat.eval(y);
            for _ in 0..m {
                total += stat.eval(&haar_sample(spec, rng).act(y)?);
            }
            Ok(total / (m as f64 + 1.0))
        }
    }
}

enum DensityView {
    Q,
    Ratio,
    RatioPow(f64),
}

fn density_stat(alt: &AlternativeDensity, view: DensityView) -> TestStatistic {
    let alt = alt.clone();
    match view {
        DensityView::Q => TestStatistic::new("q", move |y| alt.q(y)),
        DensityView::Ratio => TestStatistic::new("q/qbar", move |y| alt.ratio(y)),
        DensityView::RatioPow(e) => TestStatistic::new("(q/qbar)^e", move |y| alt.ratio(y).powf(e)),
    }
}

/// Log-optimal (growth-rate-optimal) e-value:
/// `(q/qbar)(y) / E_G[(q/qbar)(Gy)]`, with the ratio replaced by `q` for
/// invariant references. Returns 1 where both densities vanish.
pub fn log_optimal<R: Rng + ?Sized>(
    alt: &AlternativeDensity,
    y: &Point,
    spec: &GroupSpec,
    mode: NormalizationMode,
    rng: &mut R,
) -> Result<EValueResult> {
    gen_mean_optimal(alt, 0.0, y, spec, mode, rng)
}

/// [`log_optimal`] with the exact enumerated normalization.
pub fn log_optimal_exact(
    alt: &AlternativeDensity,
    y: &Point,
    spec: &GroupSpec,
) -> Result<EValueResult> {
    log_optimal(
        alt,
        y,
        spec,
        NormalizationMode::ExactEnumeration,
        &mut UnusedRng,
    )
}

/// [`gen_mean_optimal`] with the exact enumerated normalization.
pub fn gen_mean_optimal_exact(
    alt: &AlternativeDensity,
    h: f64,
    y: &Point,
    spec: &GroupSpec,
) -> Result<EValueResult> {
    gen_mean_optimal(
        alt,
        h,
        y,
        spec,
        NormalizationMode::ExactEnumeration,
        &mut UnusedRng,
    )
}

/// [`np_optimal`] with the exact enumerated critical value.
pub fn np_optimal_exact(
    alt: &AlternativeDensity,
    alpha: f64,
    y: &Point,
    spec: &GroupSpec,
) -> Result<EValueResult> {
    np_optimal(
        alt,
        alpha,
        y,
        spec,
        NormalizationMode::ExactEnumeration,
        &mut UnusedRng,
    )
}

/// Exact-enumeration paths never draw randomness; this stands in for the
/// generic RNG parameter and panics if touched.
struct UnusedRng;

impl rand::RngCore for UnusedRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("exact enumeration must not consume randomness")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("exact enumeration must not consume randomness")
    }

    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        unreachable!("exact enumeration must not consume randomness")
    }
}

/// Generalized-mean optimal e-value for exponent parameter `h <= 1`
/// (`h = 0` is the log-optimal case; `h` near 1 is riskier, `h -> -inf`
/// flattens to the constant e-value).
pub fn gen_mean_optimal<R: Rng + ?Sized>(
    alt: &AlternativeDensity,
    h: f64,
    y: &Point,
    spec: &GroupSpec,
    mode: NormalizationMode,
    rng: &mut R,
) -> Result<EValueResult> {
    if h >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "generalized-mean exponent requires h < 1, got {h}"
        )));
    }
    if alt.is_null_point(y) {
        return Ok(EValueResult::from_ratio(0.0, 0.0, mode));
    }
    let exponent = 1.0 / (1.0 - h);
    let stat = if exponent == 1.0 {
        density_stat(alt, DensityView::Ratio)
    } else {
        density_stat(alt, DensityView::RatioPow(exponent))
    };
    let numerator = stat.eval(y);
    let denominator = match mode {
        NormalizationMode::ExactEnumeration => crate::evalue::orbit_mean(&stat, y, spec)?,
        NormalizationMode::MonteCarlo(m) => {
            let mut total = numerator;
            for _ in 0..m {
                total += stat.eval(&haar_sample(spec, rng).act(y)?);
            }
            total / (m as f64 + 1.0)
        }
    };
    if !denominator.is_finite() && numerator.is_finite() && numerator > 0.0 {
        return Err(Error::NonfiniteOrbitAverage(format!(
            "orbit average of the ratio^{exponent} is {denominator}"
        )));
    }
    Ok(EValueResult::from_ratio(numerator, denominator, mode))
}

/// Neyman-Pearson-optimal e-value at level `alpha`: `1/alpha`, a tie value
/// `k`, or `0` according to how the likelihood ratio compares to the
/// orbit-dependent critical value; exactly 1 in expectation on every orbit.
///
/// With `NormalizationMode::MonteCarlo`, the critical value is the quantile
/// of the ratio over Haar draws (plus the identity); ties are treated as
/// non-rejections there, matching the continuous setting where they have
/// measure zero.
pub fn np_optimal<R: Rng + ?Sized>(
    alt: &AlternativeDensity,
    alpha: f64,
    y: &Point,
    spec: &GroupSpec,
    mode: NormalizationMode,
    rng: &mut R,
) -> Result<EValueResult> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if alt.is_null_point(y) {
        return Ok(EValueResult::from_ratio(0.0, 0.0, mode));
    }
    match mode {
        NormalizationMode::ExactEnumeration => {
            let orbit = Orbit::enumerate(y, spec)?;
            let points = orbit.points()?;
            let n = points.len() as f64;
            let mut ratios = Vec::with_capacity(points.len());
            let mut null_count = 0usize;
            for p in points {
                if alt.is_null_point(p) {
                    null_count += 1;
                } else {
                    ratios.push(alt.ratio(p));
                }
            }
            let w = null_count as f64 / n;
            let tail_target = alpha * (1.0 - w);
            let c = np_quantile(&ratios, tail_target, n);
            let p_gt = ratios.iter().filter(|&&r| r > c).count() as f64 / n;
            let p_eq = ratios.iter().filter(|&&r| r == c).count() as f64 / n;
            let r_y = alt.ratio(y);
            let value = if r_y > c {
                1.0 / alpha
            } else if r_y == c {
                ((1.0 - w - p_gt / alpha) / p_eq).clamp(0.0, 1.0 / alpha)
            } else {
                0.0
            };
            Ok(EValueResult {
                value,
                numerator: r_y,
                denominator: c,
                mode,
                zero_denominator: false,
            })
        }
        NormalizationMode::MonteCarlo(m) => {
            if m == 0 {
                return Err(Error::InvalidParameter("Monte Carlo needs M >= 1".into()));
            }
            let mut ratios = Vec::with_capacity(m + 1);
            let r_y = alt.ratio(y);
            ratios.push(r_y);
            for _ in 0..m {
                ratios.push(alt.ratio(&haar_sample(spec, rng).act(y)?));
            }
            let c = upper_quantile(&ratios, alpha);
            let value = if r_y > c { 1.0 / alpha } else { 0.0 };
            Ok(EValueResult {
                value,
                numerator: r_y,
                denominator: c,
                mode,
                zero_denominator: false,
            })
        }
    }
}

/// `inf { t : P(r > t) <= tail_target }` where probabilities are measured
/// against all `n` orbit points (the ratio list excludes null points).
fn np_quantile(ratios: &[f64], tail_target: f64, n: f64) -> f64 {
    let mut sorted = ratios.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("comparable ratios"));
    let m = ((tail_target * n) + 1e-9).floor() as usize;
    let idx = m.min(sorted.len() - 1);
    sorted[idx]
}

/// The utility function whose expected value the e-value maximizes.
#[derive(Clone)]
pub enum UtilitySpec {
    /// `U(x) = log x`; the normalization has the closed form
    /// `lambda* = 1 / E[q/qbar]`.
    Log,
    /// `U(x) = x^h / h`, `h < 1`, `h != 0` (`h = 0` aliases `Log`).
    Power(f64),
    /// Traditional power at level alpha; not differentiable, use
    /// [`np_optimal`] instead.
    NeymanPearson(f64),
    /// User-supplied continuous strictly decreasing marginal utility with
    /// its inverse.
    Custom {
        u_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        u_prime_inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for UtilitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UtilitySpec::Log => write!(f, "Log"),
            UtilitySpec::Power(h) => write!(f, "Power({h})"),
            UtilitySpec::NeymanPearson(a) => write!(f, "NeymanPearson({a})"),
            UtilitySpec::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl UtilitySpec {
    fn u_prime_inverse(&self, z: f64) -> Result<f64> {
        match self {
            UtilitySpec::Log => Ok(if z == 0.0 { f64::INFINITY } else { 1.0 / z }),
            UtilitySpec::Power(h) => {
                if *h == 0.0 {
                    return UtilitySpec::Log.u_prime_inverse(z);
                }
                if *h >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power utility requires h < 1, got {h}"
                    )));
                }
                // U'(x) = x^(h-1), so (U')^{-1}(z) = z^{1/(h-1)}.
                Ok(if z == 0.0 {
                    f64::INFINITY
                } else {
                    z.powf(1.0 / (h - 1.0))
                })
            }
            UtilitySpec::NeymanPearson(_) => Err(Error::InvalidParameter(
                "the Neyman-Pearson objective is not differentiable; use np_optimal".into(),
            )),
            UtilitySpec::Custom {
                u_prime_inverse, ..
            } => Ok(u_prime_inverse(z)),
        }
    }

    /// Spot-check that a custom marginal utility is strictly decreasing on
    /// a probe grid.
    pub fn validate(&self) -> Result<()> {
        if let UtilitySpec::Custom { u_prime, .. } = self {
            let grid = [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6];
            for w in grid.windows(2) {
                if u_prime(w[0]) <= u_prime(w[1]) {
                    return Err(Error::InvalidParameter(format!(
                        "custom U' is not strictly decreasing between {} and {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Orbit-dependent normalization constant of a utility-optimal e-value.
#[derive(Debug, Clone, Copy)]
pub struct OrbitNormalization {
    pub lambda_star: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// A utility-optimal e-value together with its solved normalization.
#[derive(Debug, Clone, Copy)]
pub struct UtilityOptimal {
    pub evalue: EValueResult,
    pub normalization: OrbitNormalization,
}

/// Expected-utility-optimal e-value `(U')^{-1}(lambda* qbar/q)` where
/// `lambda*` solves `E_G[(U')^{-1}(lambda qbar/q)] = 1` on the orbit of `y`.
///
/// The normalization map is monotone in `lambda` because `(U')^{-1}` is
/// strictly decreasing, so the root is found by bracketed bisection.
pub fn utility_optimal(
    alt: &AlternativeDensity,
    util: &UtilitySpec,
    y: &Point,
    spec: &GroupSpec,
) -> Result<UtilityOptimal> {
    util.validate()?;
    if matches!(util, UtilitySpec::NeymanPearson(_)) {
        return Err(Error::InvalidParameter(
            "the Neyman-Pearson objective is not differentiable; use np_optimal".into(),
        ));
    }
    if alt.is_null_point(y) {
        // Value 1 by convention; there is no normalization to solve.
        return Ok(UtilityOptimal {
            evalue: EValueResult::from_ratio(0.0, 0.0, NormalizationMode::ExactEnumeration),
            normalization: OrbitNormalization {
                lambda_star: f64::NAN,
                residual: 0.0,
                iterations: 0,
            },
        });
    }
    let orbit = Orbit::enumerate(y, spec)?;
    let points = orbit.points()?;
    let n = points.len() as f64;
    let mut inverse_ratios = Vec::with_capacity(points.len());
    let mut null_count = 0usize;
    for p in points {
        if alt.is_null_point(p) {
            null_count += 1;
        } else {
            let r = alt.ratio(p);
            inverse_ratios.push(if r == 0.0 {
                f64::INFINITY
            } else if r.is_infinite() {
                0.0
            } else {
                1.0 / r
            });
        }
    }
    let w = null_count as f64 / n;
    // Each non-null point carries weight 1/n; null points contribute their
    // fixed e-value of 1 through w.
    let solution = bisect_decreasing(
        |lambda| {
            let mut total = w;
            for &ir in &inverse_ratios {
                total += util
                    .u_prime_inverse(lambda * ir)
                    .expect("utility validated")
                    / n;
            }
            total - 1.0
        },
        LAMBDA_RESIDUAL_TOL,
    )?;
    let r_y = alt.ratio(y);
    let ir_y = if r_y == 0.0 {
        f64::INFINITY
    } else if r_y.is_infinite() {
        0.0
    } else {
        1.0 / r_y
    };
    let value = util.u_prime_inverse(solution.root * ir_y)?;
    Ok(UtilityOptimal {
        evalue: EValueResult {
            value,
            numerator: value,
            denominator: 1.0,
            mode: NormalizationMode::ExactEnumeration,
            zero_denominator: false,
        },
        normalization: OrbitNormalization {
            lambda_star: solution.root,
            residual: solution.residual,
            iterations: solution.iterations,
        },
    })
}

/// The log-optimal e-value for exchangeability against a Gaussian mean
/// shift in the first coordinate: exactly the softmax function with inverse
/// temperature `mu`, stabilized by max-subtraction.
pub fn softmax_evalue(y: &[f64], mu: f64) -> f64 {
    assert!(!y.is_empty());
    let scores: Vec<f64> = y.iter().map(|&v| mu * v).collect();
    (scores[0] - log_mean_exp(&scores)).exp()
}

/// The log-optimal e-value for sign-symmetry against a Gaussian location
/// shift along the diagonal: a product of per-coordinate factors
/// `2 exp(a_i) / (exp(a_i) + exp(-a_i))` with `a_i = mu y_i / sqrt(d)`.
pub fn sign_symmetry_evalue(y: &[f64], mu: f64) -> f64 {
    assert!(!y.is_empty());
    let scale = 1.0 / (y.len() as f64).sqrt();
    let mut log_value = 0.0;
    for &v in y {
        let a = scale * mu * v;
        // ln(2 exp(a) / (exp(a) + exp(-a))) = ln 2 - softplus(-2a)
        log_value += std::f64::consts::LN_2 - softplus(-2.0 * a);
    }
    log_value.exp()
}

/// The sign-symmetry e-value built from the running-Gaussian payoff
/// `exp(z - z^2/2)`: raw when `normalized` is false, and its exact
/// orbit-normalized version `2 exp(z) / (exp(z) + exp(-z))` otherwise.
pub fn dlp_evalue(z: f64, normalized: bool) -> f64 {
    if normalized {
        (std::f64::consts::LN_2 - softplus(-2.0 * z)).exp()
    } else {
        (z - z * z / 2.0).exp()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}
