//! Audit suites: exhaustive exactness, optimality, and group-law checks
//! over a standard fixture grid.
//!
//! These back the `audit` CLI command and the acceptance tests. Each suite
//! returns one [`SuiteOutcome`] per fixture with its worst observed
//! deviation, so failures point at the exact fixture that broke.

use rand::Rng;

use crate::error::Result;
use crate::evalue::{exact_evalue, exactness_audit, mc_evalue_with_draws, TestStatistic};
use crate::group::{
    enumerate_group, haar_sample, inversion_kernel, orbit_representative, stabilizer, GroupElement,
    GroupSpec, Orbit, Point,
};
use crate::optimal::{
    gen_mean_optimal_exact, log_optimal_exact, np_optimal_exact, utility_optimal,
    AlternativeDensity, UtilitySpec,
};

/// A boxed per-point e-value evaluator used by the audit grid.
type AuditFn = Box<dyn FnMut(&Point) -> Result<f64>>;

/// Result of one audited fixture.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: String,
    pub worst_deviation: f64,
    pub tolerance: f64,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.worst_deviation.abs() <= self.tolerance
    }
}

/// The enumerable group fixtures: S2..S5, sign flips in dimensions 1..6,
/// and the product S2 x S3.
pub fn group_fixtures() -> Vec<(String, GroupSpec)> {
    let mut out = Vec::new();
    for n in 2..=5 {
        out.push((format!("symmetric({n})"), GroupSpec::Symmetric(n)));
    }
    for d in 1..=6 {
        out.push((format!("sign_flips({d})"), GroupSpec::SignFlips(d)));
    }
    out.push((
        "product(symmetric(2), symmetric(3))".into(),
        GroupSpec::Product(vec![GroupSpec::Symmetric(2), GroupSpec::Symmetric(3)]),
    ));
    out
}

/// Base points per group: one with distinct coordinates, one with ties (or
/// a zero coordinate for sign flips).
pub fn fixture_points(spec: &GroupSpec) -> Vec<Point> {
    let d = spec.dimension();
    match spec {
        GroupSpec::SignFlips(_) => {
            let distinct: Vec<f64> = (0..d)
                .map(|i| 0.37 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let mut tied = distinct.clone();
            tied[0] = 0.0;
            vec![Point::Reals(distinct), Point::Reals(tied)]
        }
        _ => {
            let distinct: Vec<i64> = (1..=d as i64).collect();
            let mut tied = distinct.clone();
            if d >= 2 {
                tied[1] = tied[0];
            }
            vec![Point::Tokens(distinct), Point::Tokens(tied)]
        }
    }
}

/// Weight vector for score statistics, fixed per dimension.
fn score_weights(d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| 0.8 - 0.3 * i as f64 + 0.05 * (i * i) as f64)
        .collect()
}

fn dot_score(y: &Point, w: &[f64]) -> f64 {
    (0..y.len()).map(|i| w[i] * y.coord(i)).sum()
}

/// The four statistic families for generic e-values: constant, shifted
/// linear score, indicator of a fixed orbit point, exponential score.
pub fn statistic_fixtures(spec: &GroupSpec, base: &Point) -> Vec<TestStatistic> {
    let d = spec.dimension();
    let w = score_weights(d);
    let w2 = w.clone();
    // Offset by an orbit-invariant bound so the linear score stays
    // non-negative under permutations and sign flips.
    let max_w = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let base_clone = base.clone();
    vec![
        TestStatistic::new("constant", |_| 2.5),
        TestStatistic::new("linear score", move |y: &Point| {
            let bound = 1.0 + max_w * (0..y.len()).map(|i| y.coord(i).abs()).sum::<f64>();
            dot_score(y, &w) + bound
        }),
        TestStatistic::new("indicator", move |y: &Point| {
            if y.approx_eq(&base_clone, 0.0) {
                1.0
            } else {
                0.0
            }
        }),
        TestStatistic::new("exp score", move |y: &Point| {
            (0.5 * dot_score(y, &w2)).exp()
        }),
    ]
}

/// Gaussian-style alternative with invariant reference for a group fixture.
pub fn density_fixture(spec: &GroupSpec) -> AlternativeDensity {
    let w = score_weights(spec.dimension());
    AlternativeDensity::invariant(move |y: &Point| (0.6 * dot_score(y, &w)).exp())
}

/// Exactness grid: every optimal-e-value family and every generic
/// statistic audits to 1 on the orbit of every fixture point, within
/// `tolerance`.
pub fn exactness_grid(tolerance: f64) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    for (gname, spec) in group_fixtures() {
        for (pidx, base) in fixture_points(&spec).iter().enumerate() {
            let orbit = Orbit::enumerate(base, &spec)?;
            let mut families: Vec<(String, AuditFn)> = Vec::new();
            for stat in statistic_fixtures(&spec, base) {
                let spec2 = spec.clone();
                let name = format!("generic[{}]", stat.label());
                families.push((
                    name,
                    Box::new(move |p: &Point| exact_evalue(&stat, p, &spec2).map(|r| r.value)),
                ));
            }
            let alt = density_fixture(&spec);
            {
                let spec2 = spec.clone();
                let alt2 = alt.clone();
                families.push((
                    "log_optimal".into(),
                    Box::new(move |p: &Point| log_optimal_exact(&alt2, p, &spec2).map(|r| r.value)),
                ));
            }
            for h in [-1.0, 0.0, 0.5] {
                let spec2 = spec.clone();
                let alt2 = alt.clone();
                families.push((
                    format!("gen_mean[h={h}]"),
                    Box::new(move |p: &Point| {
                        gen_mean_optimal_exact(&alt2, h, p, &spec2).map(|r| r.value)
                    }),
                ));
            }
            for alpha in [0.1, 0.25] {
                let spec2 = spec.clone();
                let alt2 = alt.clone();
                families.push((
                    format!("np_optimal[alpha={alpha}]"),
                    Box::new(move |p: &Point| {
                        np_optimal_exact(&alt2, alpha, p, &spec2).map(|r| r.value)
                    }),
                ));
            }
            {
                let spec2 = spec.clone();
                let alt2 = alt.clone();
                families.push((
                    "utility_optimal[log]".into(),
                    Box::new(move |p: &Point| {
                        utility_optimal(&alt2, &UtilitySpec::Log, p, &spec2).map(|r| r.evalue.value)
                    }),
                ));
            }
            for (fname, mut f) in families {
                let audit = exactness_audit(|p| f(p), &orbit)?;
                out.push(SuiteOutcome {
                    name: format!("{gname} point#{pidx} {fname}"),
                    worst_deviation: audit - 1.0,
                    tolerance,
                });
            }
        }
    }
    Ok(out)
}

/// Exhaustive Monte Carlo exactness: the mean of the Monte Carlo e-value
/// over every (evaluation shift, draw tuple) combination is exactly 1.
pub fn mc_exhaustive(tolerance: f64) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    for n in [2usize, 3] {
        let spec = GroupSpec::Symmetric(n);
        let elements = enumerate_group(&spec, 100)?;
        let y = Point::Tokens((1..=n as i64).collect());
        let w = score_weights(n);
        let stat = TestStatistic::new("exp score", move |p: &Point| (0.5 * dot_score(p, &w)).exp());
        for m in [1usize, 2] {
            let mut total = 0.0;
            let mut count = 0usize;
            let mut draw_tuple = vec![0usize; m];
            loop {
                for g in &elements {
                    let z = g.act(&y)?;
                    let draws: Vec<GroupElement> =
                        draw_tuple.iter().map(|&i| elements[i].clone()).collect();
                    total += mc_evalue_with_draws(&stat, &z, &draws)?.value;
                    count += 1;
                }
                // Advance the draw tuple odometer.
                let mut pos = 0;
                loop {
                    if pos == m {
                        break;
                    }
                    draw_tuple[pos] += 1;
                    if draw_tuple[pos] < elements.len() {
                        break;
                    }
                    draw_tuple[pos] = 0;
                    pos += 1;
                }
                if pos == m {
                    break;
                }
            }
            out.push(SuiteOutcome {
                name: format!("mc_exhaustive symmetric({n}) M={m} ({count} terms)"),
                worst_deviation: total / count as f64 - 1.0,
                tolerance,
            });
        }
    }
    Ok(out)
}

/// Q-weighted mean log of the log-optimal e-value beats random exact
/// competitors on every fixture orbit (worst gap reported; negative gaps
/// beyond tolerance fail).
pub fn log_optimality<R: Rng + ?Sized>(
    competitors: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    for (gname, spec) in group_fixtures() {
        for (pidx, base) in fixture_points(&spec).iter().enumerate() {
            let orbit = Orbit::enumerate(base, &spec)?;
            let points = orbit.points()?;
            let alt = density_fixture(&spec);
            let q_weights = normalized_q(&alt, points);
            let star: Vec<f64> = points
                .iter()
                .map(|p| log_optimal_exact(&alt, p, &spec).map(|r| r.value))
                .collect::<Result<_>>()?;
            let star_obj: f64 = q_weights.iter().zip(&star).map(|(q, e)| q * e.ln()).sum();
            let mut worst_gap = f64::INFINITY;
            for _ in 0..competitors {
                let raw: Vec<f64> = points.iter().map(|_| rng.random_range(0.1..2.0)).collect();
                let mean = raw.iter().sum::<f64>() / raw.len() as f64;
                let comp_obj: f64 = q_weights
                    .iter()
                    .zip(&raw)
                    .map(|(q, t)| q * (t / mean).ln())
                    .sum();
                worst_gap = worst_gap.min(star_obj - comp_obj);
            }
            out.push(SuiteOutcome {
                name: format!("log-optimality {gname} point#{pidx}"),
                worst_deviation: worst_gap.min(0.0),
                tolerance,
            });
        }
    }
    Ok(out)
}

/// Capped Q-power of the Neyman-Pearson e-value beats random valid
/// level-alpha competitors on every fixture orbit.
pub fn np_optimality<R: Rng + ?Sized>(
    competitors: usize,
    alpha: f64,
    tolerance: f64,
    rng: &mut R,
) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    for (gname, spec) in group_fixtures() {
        for (pidx, base) in fixture_points(&spec).iter().enumerate() {
            let orbit = Orbit::enumerate(base, &spec)?;
            let points = orbit.points()?;
            let alt = density_fixture(&spec);
            let q_weights = normalized_q(&alt, points);
            let star: Vec<f64> = points
                .iter()
                .map(|p| np_optimal_exact(&alt, alpha, p, &spec).map(|r| r.value))
                .collect::<Result<_>>()?;
            let cap = 1.0 / alpha;
            let star_obj: f64 = q_weights
                .iter()
                .zip(&star)
                .map(|(q, e)| q * e.min(cap))
                .sum();
            let mut worst_gap = f64::INFINITY;
            for _ in 0..competitors {
                let raw: Vec<f64> = points.iter().map(|_| rng.random_range(0.0..cap)).collect();
                let mean = raw.iter().sum::<f64>() / raw.len() as f64;
                let scale = if mean > 1.0 { 1.0 / mean } else { 1.0 };
                let comp_obj: f64 = q_weights
                    .iter()
                    .zip(&raw)
                    .map(|(q, t)| q * (t * scale).min(cap))
                    .sum();
                worst_gap = worst_gap.min(star_obj - comp_obj);
            }
            out.push(SuiteOutcome {
                name: format!("np-optimality {gname} point#{pidx} alpha={alpha}"),
                worst_deviation: worst_gap.min(0.0),
                tolerance,
            });
        }
    }
    Ok(out)
}

fn normalized_q(alt: &AlternativeDensity, points: &[Point]) -> Vec<f64> {
    let raw: Vec<f64> = points.iter().map(|p| alt.q(p)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Group laws on every enumerable fixture up to cardinality 5040:
/// identity and inverse laws on every element, associativity on random
/// triples.
pub fn group_laws<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<SuiteOutcome>> {
    let mut fixtures = group_fixtures();
    fixtures.push(("symmetric(7)".into(), GroupSpec::Symmetric(7)));
    let mut out = Vec::new();
    for (gname, spec) in fixtures {
        let elements = enumerate_group(&spec, 5040)?;
        let identity = spec.identity();
        let mut violations = 0usize;
        for g in &elements {
            if g.compose(&g.inverse())? != identity {
                violations += 1;
            }
            if g.compose(&identity)? != *g || identity.compose(g)? != *g {
                violations += 1;
            }
        }
        for _ in 0..200 {
            let a = haar_sample(&spec, rng);
            let b = haar_sample(&spec, rng);
            let c = haar_sample(&spec, rng);
            if a.compose(&b.compose(&c)?)? != a.compose(&b)?.compose(&c)? {
                violations += 1;
            }
        }
        out.push(SuiteOutcome {
            name: format!("group laws {gname} ({} elements)", elements.len()),
            worst_deviation: violations as f64,
            tolerance: 0.0,
        });
    }
    Ok(out)
}

/// Orbit representatives are constant on orbits: `rep(g y) = rep(y)` for
/// random group elements and points.
pub fn representative_invariance<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    let mut fixtures = group_fixtures();
    fixtures.push(("orthogonal(3)".into(), GroupSpec::Orthogonal(3)));
    for (gname, spec) in fixtures {
        let d = spec.dimension();
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let y = match &spec {
                GroupSpec::Symmetric(_) | GroupSpec::Product(_) => {
                    Point::Tokens((0..d).map(|_| rng.random_range(-3..7)).collect())
                }
                _ => Point::Reals((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()),
            };
            let g = haar_sample(&spec, rng);
            let rep_y = orbit_representative(&y, &spec)?;
            let rep_gy = orbit_representative(&g.act(&y)?, &spec)?;
            let dev = match (&rep_y, &rep_gy) {
                (Point::Tokens(a), Point::Tokens(b)) => {
                    if a == b {
                        0.0
                    } else {
                        1.0
                    }
                }
                (Point::Reals(a), Point::Reals(b)) => a
                    .iter()
                    .zip(b)
                    .map(|(x, z)| (x - z).abs())
                    .fold(0.0f64, f64::max),
                _ => 1.0,
            };
            worst = worst.max(dev);
            // Idempotence of the selector.
            let rep_rep = orbit_representative(&rep_y, &spec)?;
            if !rep_rep.approx_eq(&rep_y, 1e-12) {
                worst = worst.max(1.0);
            }
        }
        out.push(SuiteOutcome {
            name: format!("representative invariance {gname}"),
            worst_deviation: worst,
            tolerance: 1e-12,
        });
    }
    Ok(out)
}

/// Inversion kernels reconstruct their point from the representative, for
/// every point of exhaustively enumerated small spaces, including ties.
pub fn inversion_kernel_reconstruction<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    let cases: Vec<(String, GroupSpec, Point)> = vec![
        (
            "symmetric(3) distinct".into(),
            GroupSpec::Symmetric(3),
            Point::tokens(vec![1, 2, 3]),
        ),
        (
            "symmetric(3) tied".into(),
            GroupSpec::Symmetric(3),
            Point::tokens(vec![1, 1, 2]),
        ),
        (
            "symmetric(4) tied".into(),
            GroupSpec::Symmetric(4),
            Point::tokens(vec![2, 2, 2, 5]),
        ),
        (
            "sign_flips(3)".into(),
            GroupSpec::SignFlips(3),
            Point::reals(vec![1.0, -2.0, 0.0]),
        ),
        (
            "product(S2,S2) tied".into(),
            GroupSpec::Product(vec![GroupSpec::Symmetric(2), GroupSpec::Symmetric(2)]),
            Point::tokens(vec![1, 1, 3, 4]),
        ),
    ];
    for (name, spec, base) in cases {
        let orbit = Orbit::enumerate(&base, &spec)?;
        let mut violations = 0usize;
        for p in orbit.points()? {
            let rep = orbit_representative(p, &spec)?;
            for _ in 0..40 {
                let k = inversion_kernel(p, &spec, rng)?;
                if !k.act(&rep)?.approx_eq(p, 1e-12) {
                    violations += 1;
                }
            }
        }
        out.push(SuiteOutcome {
            name: format!("inversion kernel {name}"),
            worst_deviation: violations as f64,
            tolerance: 0.0,
        });
    }
    Ok(out)
}

/// Stabilizers are subgroups: closed under composition and inverse, and
/// contain the identity (exhaustive check on fixtures).
pub fn stabilizer_closure() -> Result<Vec<SuiteOutcome>> {
    let cases: Vec<(String, GroupSpec, Point)> = vec![
        (
            "symmetric(3) tied".into(),
            GroupSpec::Symmetric(3),
            Point::tokens(vec![1, 1, 2]),
        ),
        (
            "symmetric(4) tied".into(),
            GroupSpec::Symmetric(4),
            Point::tokens(vec![7, 7, 7, 1]),
        ),
        (
            "sign_flips(3) zero".into(),
            GroupSpec::SignFlips(3),
            Point::reals(vec![0.0, 2.0, 0.0]),
        ),
        (
            "product tied".into(),
            GroupSpec::Product(vec![GroupSpec::Symmetric(2), GroupSpec::Symmetric(3)]),
            Point::tokens(vec![4, 4, 1, 2, 2]),
        ),
    ];
    let mut out = Vec::new();
    for (name, spec, y) in cases {
        let stab = stabilizer(&spec, &y)?;
        let elements = enumerate_group(&stab, 100_000)?;
        let mut violations = 0usize;
        if !elements.iter().any(|g| g.is_identity()) {
            violations += 1;
        }
        for a in &elements {
            if !elements.contains(&a.inverse()) {
                violations += 1;
            }
            for b in &elements {
                if !elements.contains(&a.compose(b)?) {
                    violations += 1;
                }
            }
            if !a.act(&y)?.approx_eq(&y, 1e-12) {
                violations += 1;
            }
        }
        out.push(SuiteOutcome {
            name: format!("stabilizer closure {name} ({} elements)", elements.len()),
            worst_deviation: violations as f64,
            tolerance: 0.0,
        });
    }
    Ok(out)
}

/// Haar pushforward: for a point with trivial stabilizer, `haar_sample`
/// applied to the point lands uniformly on the enumerated orbit
/// (chi-square test at significance 1e-3).
pub fn haar_pushforward_uniformity<R: Rng + ?Sized>(
    draws: usize,
    rng: &mut R,
) -> Result<Vec<SuiteOutcome>> {
    // 0.999 chi-square quantiles by degrees of freedom.
    fn chi2_crit(df: usize) -> f64 {
        match df {
            1 => 10.828,
            5 => 20.515,
            7 => 24.322,
            11 => 31.264,
            23 => 49.728,
            other => panic!("no tabulated chi-square quantile for df {other}"),
        }
    }
    let cases: Vec<(String, GroupSpec, Point)> = vec![
        (
            "symmetric(3)".into(),
            GroupSpec::Symmetric(3),
            Point::tokens(vec![1, 2, 3]),
        ),
        (
            "symmetric(4)".into(),
            GroupSpec::Symmetric(4),
            Point::tokens(vec![1, 2, 3, 4]),
        ),
        (
            "sign_flips(3)".into(),
            GroupSpec::SignFlips(3),
            Point::reals(vec![1.0, 2.0, 3.0]),
        ),
        (
            "product(S2,S3)".into(),
            GroupSpec::Product(vec![GroupSpec::Symmetric(2), GroupSpec::Symmetric(3)]),
            Point::tokens(vec![1, 2, 3, 4, 5]),
        ),
    ];
    let mut out = Vec::new();
    for (name, spec, y) in cases {
        let orbit = Orbit::enumerate(&y, &spec)?;
        let points = orbit.points()?;
        let mut counts = vec![0usize; points.len()];
        for _ in 0..draws {
            let z = haar_sample(&spec, rng).act(&y)?;
            let idx = points
                .iter()
                .position(|p| p.approx_eq(&z, 1e-12))
                .expect("pushforward lands on the orbit");
            counts[idx] += 1;
        }
        let expected = draws as f64 / points.len() as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let crit = chi2_crit(points.len() - 1);
        out.push(SuiteOutcome {
            name: format!("haar pushforward {name} (chi2 {chi2:.2} < {crit})"),
            worst_deviation: (chi2 - crit).max(0.0),
            tolerance: 0.0,
        });
    }
    Ok(out)
}
