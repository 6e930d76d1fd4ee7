//! Exact e-values for group invariance.
//!
//! The generic construction divides a non-negative statistic by its average
//! over the orbit of the data: `e_T(y) = T(y) / E_G[T(Gy)]`, where the
//! average is over a Haar-distributed group element. Its mean under the
//! uniform distribution on every orbit is exactly 1, which characterizes
//! exact e-values for invariance. The denominator can be computed by full
//! enumeration or estimated by Monte Carlo sampling; the Monte Carlo variant
//! stays exact in expectation over the drawn sample when the identity is
//! included as the zeroth draw.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::group::{
    enumerate_group, haar_sample, orbit_representative, GroupElement, GroupSpec, Orbit, Point,
    PointKey, DEFAULT_MAX_CARDINALITY,
};
use crate::numeric::upper_quantile;

/// A non-negative test statistic with a display label.
#[derive(Clone)]
pub struct TestStatistic {
    label: String,
    eval: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl TestStatistic {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestStatistic {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, y: &Point) -> f64 {
        let v = (self.eval)(y);
        debug_assert!(
            v >= 0.0 && !v.is_nan(),
            "statistic {} returned {v} at {y}; e-values need T >= 0",
            self.label
        );
        v
    }
}

impl std::fmt::Debug for TestStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestStatistic({})", self.label)
    }
}

/// How the orbit average in the denominator is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMode {
    /// Average `T` over every element of an enumerable group.
    ExactEnumeration,
    /// Average over `M` i.i.d. Haar draws plus the identity as draw 0.
    MonteCarlo(usize),
}

/// An e-value together with the pieces it was assembled from.
///
/// For ratio-built e-values, `value = numerator / denominator` with `0/0`
/// resolved to 1 and `x/0` (x > 0) to `+inf`, flagged by
/// `zero_denominator`. Threshold tests (the traditional test and the
/// Neyman-Pearson e-value) instead carry the observed statistic in
/// `numerator` and the critical value in `denominator`.
#[derive(Debug, Clone, Copy)]
pub struct EValueResult {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub mode: NormalizationMode,
    pub zero_denominator: bool,
}

impl EValueResult {
    pub(crate) fn from_ratio(numerator: f64, denominator: f64, mode: NormalizationMode) -> Self {
        let (value, zero_denominator) = if denominator == 0.0 {
            if numerator == 0.0 {
                (1.0, false)
            } else {
                (f64::INFINITY, true)
            }
        } else if denominator.is_infinite() {
            (0.0, false)
        } else {
            (numerator / denominator, false)
        };
        EValueResult {
            value,
            numerator,
            denominator,
            mode,
            zero_denominator,
        }
    }
}

/// The generic exact e-value `T(y) / E_G[T(Gy)]`.
pub fn generic_evalue<R: Rng + ?Sized>(
    stat: &TestStatistic,
    y: &Point,
    spec: &GroupSpec,
    mode: NormalizationMode,
    rng: &mut R,
) -> Result<EValueResult> {
    let numerator = stat.eval(y);
    let denominator = match mode {
        NormalizationMode::ExactEnumeration => orbit_mean(stat, y, spec)?,
        NormalizationMode::MonteCarlo(m) => {
            if m == 0 {
                return Err(Error::InvalidParameter("Monte Carlo needs M >= 1".into()));
            }
            let draws: Vec<GroupElement> = (0..m).map(|_| haar_sample(spec, rng)).collect();
            mc_denominator(stat, y, &draws)?
        }
    };
    Ok(EValueResult::from_ratio(numerator, denominator, mode))
}

/// [`generic_evalue`] with the exact enumerated denominator.
pub fn exact_evalue(stat: &TestStatistic, y: &Point, spec: &GroupSpec) -> Result<EValueResult> {
    let numerator = stat.eval(y);
    let denominator = orbit_mean(stat, y, spec)?;
    Ok(EValueResult::from_ratio(
        numerator,
        denominator,
        NormalizationMode::ExactEnumeration,
    ))
}

/// Monte Carlo e-value with `m` Haar draws (exact in expectation over the
/// draws for any `m >= 1`).
pub fn mc_evalue<R: Rng + ?Sized>(
    stat: &TestStatistic,
    y: &Point,
    spec: &GroupSpec,
    m: usize,
    rng: &mut R,
) -> Result<EValueResult> {
    generic_evalue(stat, y, spec, NormalizationMode::MonteCarlo(m), rng)
}

/// Monte Carlo e-value evaluated on a caller-supplied draw list. The
/// identity is still included as draw 0, so the denominator averages
/// `M + 1` terms.
pub fn mc_evalue_with_draws(
    stat: &TestStatistic,
    y: &Point,
    draws: &[GroupElement],
) -> Result<EValueResult> {
    let numerator = stat.eval(y);
    let denominator = mc_denominator(stat, y, draws)?;
    Ok(EValueResult::from_ratio(
        numerator,
        denominator,
        NormalizationMode::MonteCarlo(draws.len()),
    ))
}

fn mc_denominator(stat: &TestStatistic, y: &Point, draws: &[GroupElement]) -> Result<f64> {
    let mut total = stat.eval(y);
    for g in draws {
        total += stat.eval(&g.act(y)?);
    }
    Ok(total / (draws.len() as f64 + 1.0))
}

/// Exact orbit average `E_G[T(Gy)]` over an enumerable group.
pub fn orbit_mean(stat: &TestStatistic, y: &Point, spec: &GroupSpec) -> Result<f64> {
    let elements = enumerate_group(spec, DEFAULT_MAX_CARDINALITY)?;
    let mut total = 0.0;
    for g in &elements {
        total += stat.eval(&g.act(y)?);
    }
    Ok(total / elements.len() as f64)
}

/// The traditional randomized group-invariance test, expressed as an
/// e-value with range `{0, c/alpha, 1/alpha}`.
///
/// `q` is the alpha upper-quantile of `T(Gy)` over the group (with
/// multiplicity) and the orbit-dependent tie constant
/// `c = (alpha - P(T > q)) / P(T = q)` makes the orbit expectation exactly
/// one.
pub fn traditional_test(
    stat: &TestStatistic,
    y: &Point,
    spec: &GroupSpec,
    alpha: f64,
) -> Result<EValueResult> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let elements = enumerate_group(spec, DEFAULT_MAX_CARDINALITY)?;
    let values: Vec<f64> = elements
        .iter()
        .map(|g| Ok(stat.eval(&g.act(y)?)))
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let q = upper_quantile(&values, alpha);
    let p_gt = values.iter().filter(|&&v| v > q).count() as f64 / n;
    let p_eq = values.iter().filter(|&&v| v == q).count() as f64 / n;
    let t_y = stat.eval(y);
    let value = if t_y > q {
        1.0 / alpha
    } else if t_y == q {
        let c = ((alpha - p_gt) / p_eq).clamp(0.0, 1.0);
        c / alpha
    } else {
        0.0
    };
    Ok(EValueResult {
        value,
        numerator: t_y,
        denominator: q,
        mode: NormalizationMode::ExactEnumeration,
        zero_denominator: false,
    })
}

/// The binary version of [`traditional_test`]: ties are resolved by an
/// external coin flip with success probability `c`, so the outcome is
/// always `0` or `1/alpha`.
pub fn traditional_test_decision<R: Rng + ?Sized>(
    stat: &TestStatistic,
    y: &Point,
    spec: &GroupSpec,
    alpha: f64,
    rng: &mut R,
) -> Result<EValueResult> {
    let randomized = traditional_test(stat, y, spec, alpha)?;
    let mut out = randomized;
    let a_eps = randomized.value * alpha;
    out.value = if a_eps >= 1.0 {
        1.0 / alpha
    } else if a_eps <= 0.0 {
        0.0
    } else if rng.random_bool(a_eps) {
        1.0 / alpha
    } else {
        0.0
    };
    Ok(out)
}

/// Mean of `evalue_fn` over an enumerated orbit: the audit value, exactly 1
/// for exact e-values.
pub fn exactness_audit<F: FnMut(&Point) -> Result<f64>>(
    mut evalue_fn: F,
    orbit: &Orbit,
) -> Result<f64> {
    let points = orbit.points()?;
    if points.is_empty() {
        return Err(Error::MissingEnumeration);
    }
    let mut total = 0.0;
    for p in points {
        total += evalue_fn(p)?;
    }
    Ok(total / points.len() as f64)
}

/// Orbit-keyed cache of denominators (or other per-orbit constants).
///
/// Writers may race: they compute identical values, so last-write-wins is
/// harmless.
pub struct OrbitCache<V: Clone> {
    map: RwLock<HashMap<PointKey, V>>,
}

impl<V: Clone> Default for OrbitCache<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Clone> OrbitCache<V> {
    pub fn new() -> Self {
        OrbitCache {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn get_or_compute(&self, key: PointKey, compute: impl FnOnce() -> Result<V>) -> Result<V> {
        if let Some(v) = self.map.read().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = compute()?;
        self.map.write().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// [`generic_evalue`] with the exact denominator looked up from (or stored
/// into) an orbit-keyed cache. Denominators are orbit constants, so the key
/// is the orbit representative.
pub fn generic_evalue_cached(
    stat: &TestStatistic,
    y: &Point,
    spec: &GroupSpec,
    cache: &OrbitCache<f64>,
) -> Result<EValueResult> {
    let rep = orbit_representative(y, spec)?;
    let denominator = cache.get_or_compute(rep.key(), || orbit_mean(stat, y, spec))?;
    Ok(EValueResult::from_ratio(
        stat.eval(y),
        denominator,
        NormalizationMode::ExactEnumeration,
    ))
}
