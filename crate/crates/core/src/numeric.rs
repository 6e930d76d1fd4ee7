//! Small numerical helpers: stable log-domain reductions, upper quantiles on
//! finite multisets, and bracketed bisection.

use crate::error::{Error, Result};

/// log(sum(exp(x))) with max-subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log of the arithmetic mean of exp(x).
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// The alpha upper-quantile of a finite multiset:
/// `inf { t : #{v > t} / N <= alpha }`, which is the `(floor(alpha N) + 1)`-th
/// largest value.
pub fn upper_quantile(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty multiset");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-NaN values"));
    // Nudge guards against alpha*N = k - ulp when alpha is a rounded 1/k;
    // either index yields the same test values through the tie constant.
    let m = ((alpha * n as f64) + 1e-9).floor() as usize;
    let idx = m.min(n - 1);
    sorted[idx]
}

/// Outcome of the monotone normalization-constant search.
#[derive(Debug, Clone, Copy)]
pub struct BisectionSolution {
    pub root: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Solve `f(lambda) = 0` for a (weakly) decreasing `f` on `lambda > 0`.
///
/// Starts from the bracket `[1e-12, 1e12]`, expands it geometrically when
/// the sign change lies outside, then bisects until `|f| <= tol`.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<BisectionSolution> {
    let mut lo = 1e-12;
    let mut hi = 1e12;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut expansions = 0;
    while f_lo < 0.0 && lo > 1e-300 {
        hi = lo;
        f_hi = f_lo;
        lo /= 1e6;
        f_lo = f(lo);
        expansions += 1;
    }
    while f_hi > 0.0 && hi < 1e300 {
        lo = hi;
        f_lo = f_hi;
        hi *= 1e6;
        f_hi = f(hi);
        expansions += 1;
    }
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(Error::Convergence {
            message: "no sign change for the normalization residual".into(),
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    for step in 0..2000u32 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        let iterations = expansions + step + 1;
        if f_mid.abs() <= tol {
            return Ok(BisectionSolution {
                root: mid,
                residual: f_mid,
                iterations,
            });
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs() {
            let residual = f(mid);
            if residual.abs() <= tol.max(1e-9) {
                return Ok(BisectionSolution {
                    root: mid,
                    residual,
                    iterations,
                });
            }
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    Err(Error::Convergence {
        message: format!("bisection stalled at residual {:e}", f(mid)),
        lo,
        hi,
        f_lo: f(lo),
        f_hi: f(hi),
    })
}

/// ln C(n, k) via ln-Gamma-free accumulation (exact enough for n <= a few
/// thousand).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0f64;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}
