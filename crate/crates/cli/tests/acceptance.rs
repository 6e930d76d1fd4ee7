//! Acceptance suite: one test per shipped criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them all).
//!
//! Criterion 03 depends on the controlled-shooting dataset, which is not
//! redistributed; it reports SKIPPED when the file is absent (set
//! `GVT_SHOTS_PATH` or place the file at `data/gvt_shots.csv`).

use std::time::Instant;

use groupinv_cli::audit::counterexample_rejection_rate;
use groupinv_cli::case_control::{run_case_control, CaseControlConfig};
use groupinv_cli::symmetry::{run_symmetry, SymmetryConfig};
use groupinv_cli::toy::run_toy_eprocess;
use groupinv_core::evalue::NormalizationMode;
use groupinv_core::group::{
    enumerate_group, inversion_kernel, orbit_representative, GroupElement, GroupSpec, Point,
};
use groupinv_core::hothand::{
    hothand_conditional_prob, hothand_evalue, HotHandParams, ShotSequence,
};
use groupinv_core::optimal::{
    log_optimal_exact, np_optimal, utility_optimal, AlternativeDensity, UtilitySpec,
};
use groupinv_core::suites;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, name: &str, pass: bool) {
    println!(
        "[criterion {criterion:02}] {name}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion:02} ({name}) failed");
}

fn report_skipped(criterion: u32, name: &str, why: &str) {
    println!("[criterion {criterion:02}] {name}: SKIPPED ({why})");
}

#[test]
fn criterion_01_toy_eprocess_exactness() {
    let start = Instant::now();
    let r = run_toy_eprocess().expect("toy e-process builds");
    let t = &r.table;
    let idx = |l: &str| t.point_index(l).unwrap();
    let tol = 1e-14;
    let mut ok = true;
    for (label, expected) in [
        ("AB", 4.0 / 3.0),
        ("BA", 2.0 / 3.0),
        ("AC", 2.0 / 3.0),
        ("CA", 4.0 / 3.0),
    ] {
        ok &= (t.infimum_at(2, idx(label)) - expected).abs() <= tol;
    }
    for (i, expected) in [
        (idx("AB"), 2.0 / 3.0),
        (idx("BA"), 2.0 / 3.0),
        (idx("CA"), 4.0 / 3.0),
    ] {
        ok &= (t.infimum_at(1, i) - expected).abs() <= tol;
    }
    let o1 = t.orbit_of[idx("AB")];
    let o2 = t.orbit_of[idx("AC")];
    ok &= (t.per_orbit_at(o1, 1, idx("AB")) - 4.0 / 3.0).abs() <= tol;
    ok &= (t.per_orbit_at(o2, 1, idx("AB")) - 2.0 / 3.0).abs() <= tol;
    // All stopping-time expectations stay below one; 8 nontrivial times.
    ok &= r.nontrivial_stopping_times == 8;
    ok &= r.stopped_audits.iter().all(|(_, _, e)| *e <= 1.0 + 1e-14);
    // The supermartingale violation is strict.
    ok &= r.violation.0 > r.violation.1;
    ok &= (r.violation.0 - 4.0 / 3.0).abs() <= tol && (r.violation.1 - 2.0 / 3.0).abs() <= tol;
    ok &= start.elapsed().as_secs_f64() < 1.0;
    report(1, "toy e-process exactness", ok);
}

#[test]
fn criterion_02_hot_hand_worked_example() {
    // Reference fixture: trigger 2, beta 0.9, orbit (4 hits, 2 misses),
    // factors 4/6 * 3/5 * (2/4)^0.9 * (1-(1/3)^0.9) * 1/2 * 1. The
    // sequence realizing those factors is 111010.
    let params = HotHandParams::new(2, 0.9).unwrap();
    let seq = ShotSequence::from_bitstring("worked", "111010").unwrap();
    let warm = hothand_evalue(&seq, &params);
    assert!(warm > 0.0);
    let start = Instant::now();
    let prob = hothand_conditional_prob(&seq, &params);
    let ev = hothand_evalue(&seq, &params);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (prob - 0.0673).abs() <= 5e-4 && (ev - 1.0095).abs() <= 5e-4 && elapsed < 1e-3;
    report(2, "hot-hand worked example", ok);
}

#[test]
fn criterion_03_hot_hand_full_tables() {
    let path = std::env::var("GVT_SHOTS_PATH")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|_| {
            std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/gvt_shots.csv")
        });
    if !path.exists() {
        report_skipped(
            3,
            "hot-hand full tables",
            "controlled-shooting data file not present; see README for the expected format",
        );
        return;
    }
    let grid = groupinv_cli::hothand_run::run_hothand(&path).expect("data parses");
    let expected_products = [0.007, 0.180, 3.108, 4.460, 7.489, 5.525];
    let mut ok = true;
    for ((_, report_cell), expected) in grid.cells.iter().zip(expected_products) {
        ok &= (report_cell.product - expected).abs() <= 5e-3;
    }
    // Per-shooter entries: at least 95% must match to 5e-4.
    let expected_rows = appendix_per_shooter_table();
    let mut matched = 0usize;
    let mut total = 0usize;
    for (shooter, values) in &expected_rows {
        for (cell_idx, expected) in values.iter().enumerate() {
            total += 1;
            let report_cell = &grid.cells[cell_idx].1;
            if let Some(row) = report_cell.rows.iter().find(|r| r.shooter_id == *shooter) {
                if (row.evalue - expected).abs() <= 5e-4 {
                    matched += 1;
                }
            }
        }
    }
    ok &= (matched as f64) >= 0.95 * total as f64;
    report(3, "hot-hand full tables", ok);
}

/// Per-shooter log-optimal e-values by (trigger, beta) cell, in the order
/// (1,0.85), (1,0.90), (2,0.85), (2,0.90), (3,0.85), (3,0.90).
fn appendix_per_shooter_table() -> Vec<(&'static str, [f64; 6])> {
    vec![
        ("101", [0.163, 0.323, 0.409, 0.572, 0.674, 0.782]),
        ("102", [1.040, 1.089, 0.732, 0.832, 0.758, 0.838]),
        ("103", [2.737, 2.068, 1.582, 1.414, 1.316, 1.232]),
        ("104", [0.949, 1.025, 0.627, 0.753, 0.998, 1.004]),
        ("105", [0.647, 0.804, 0.990, 1.018, 0.898, 0.941]),
        ("106", [4.695, 2.962, 2.543, 1.934, 2.356, 1.807]),
        ("107", [5.765, 3.346, 3.105, 2.184, 2.230, 1.732]),
        ("108", [1.040, 1.065, 1.675, 1.426, 1.284, 1.191]),
        ("109", [2.338, 1.840, 3.100, 2.176, 3.181, 2.195]),
        ("110", [0.382, 0.565, 0.675, 0.799, 0.735, 0.834]),
        ("111", [1.318, 1.284, 1.529, 1.378, 1.409, 1.286]),
        ("112", [0.490, 0.667, 0.621, 0.751, 0.849, 0.907]),
        ("113", [0.242, 0.418, 0.391, 0.559, 0.509, 0.655]),
        ("114", [1.427, 1.358, 1.187, 1.167, 1.169, 1.136]),
        ("201", [0.613, 0.779, 0.924, 0.979, 0.764, 0.850]),
        ("202", [1.938, 1.636, 1.090, 1.085, 1.099, 1.073]),
        ("203", [3.076, 2.227, 1.156, 1.135, 1.201, 1.142]),
        ("204", [0.548, 0.711, 0.909, 0.954, 0.971, 0.986]),
        ("205", [0.441, 0.616, 1.001, 1.018, 0.725, 0.816]),
        ("206", [0.323, 0.510, 0.758, 0.855, 0.734, 0.825]),
        ("207", [2.503, 1.950, 4.173, 2.636, 2.405, 1.815]),
        ("208", [0.233, 0.409, 0.679, 0.798, 1.279, 1.192]),
        ("209", [0.428, 0.612, 1.053, 1.062, 1.109, 1.084]),
        ("210", [0.306, 0.487, 1.330, 1.234, 1.375, 1.251]),
        ("211", [0.422, 0.602, 0.423, 0.587, 0.453, 0.603]),
        ("212", [0.452, 0.620, 0.643, 0.755, 1.000, 1.000]),
    ]
}

#[test]
fn criterion_04_exactness_suites() {
    let start = Instant::now();
    let outcomes = suites::exactness_grid(1e-10).expect("grid builds");
    let ok = !outcomes.is_empty()
        && outcomes.iter().all(|o| o.pass())
        && start.elapsed().as_secs_f64() < 30.0;
    for o in outcomes.iter().filter(|o| !o.pass()) {
        println!(
            "  exactness failure: {} deviation {}",
            o.name, o.worst_deviation
        );
    }
    report(
        4,
        "exactness suites (all fixtures audit to 1 within 1e-10)",
        ok,
    );
}

#[test]
fn criterion_05_monte_carlo_exactness() {
    let start = Instant::now();
    let outcomes = suites::mc_exhaustive(1e-12).expect("mc suite builds");
    let ok = outcomes.len() == 4
        && outcomes.iter().all(|o| o.pass())
        && start.elapsed().as_secs_f64() < 5.0;
    report(5, "Monte Carlo exactness over all draw tuples", ok);
}

#[test]
fn criterion_06_orbitwise_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let log = suites::log_optimality(20, 1e-12, &mut rng).expect("log suite");
    let mut ok = log.iter().all(|o| o.pass());
    for alpha in [0.1, 0.25] {
        let np = suites::np_optimality(20, alpha, 1e-12, &mut rng).expect("np suite");
        ok &= np.iter().all(|o| o.pass());
    }
    report(
        6,
        "log-optimal and NP-optimal dominate random competitors",
        ok,
    );
}

#[test]
fn criterion_07_case_control_power() {
    let start = Instant::now();
    let alternative = CaseControlConfig {
        seed: 11,
        replications: 1000,
        batches: 24,
        effect_a: 0.2,
        ..CaseControlConfig::default()
    };
    let alt = run_case_control(&alternative).expect("simulation runs");
    let power_23 = alt.crossing_fraction(20.0, 23);

    let null = CaseControlConfig {
        seed: 11,
        replications: 1000,
        batches: 40,
        effect_a: 0.0,
        ..CaseControlConfig::default()
    };
    let null_run = run_case_control(&null).expect("simulation runs");
    let null_crossing = null_run.crossing_fraction(20.0, 40);

    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "  case-control: power at batch 23 = {power_23:.3}, null crossing = {null_crossing:.3}"
    );
    let ok = power_23 >= 0.85 && null_crossing <= 0.07 && elapsed < 300.0;
    report(7, "case-control power and null calibration", ok);
}

#[test]
fn criterion_08_symmetry_comparison() {
    let cfg = SymmetryConfig {
        seed: 2,
        replications: 1000,
        steps: 60,
        effect: 1.0,
        mu: 1.0,
    };
    let result = run_symmetry(&cfg, 20.0).expect("simulation runs");
    let m_sign = result.median_crossing_sign();
    let m_dlp = result.median_crossing_dlp();
    // None means more than half never crossed: slower than any finite
    // median.
    let strictly_faster = match (m_sign, m_dlp) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    println!("  symmetry medians: sign-symmetry {m_sign:?} vs unnormalized payoff {m_dlp:?}");
    let mut identity_ok = true;
    for i in 0..100 {
        let z = -5.0 + 0.1 * i as f64;
        let a = groupinv_core::optimal::sign_symmetry_evalue(&[z], 1.0);
        let b = groupinv_core::optimal::dlp_evalue(z, true);
        identity_ok &= (a - b).abs() <= 1e-12;
    }
    report(
        8,
        "sign-symmetry martingale beats unnormalized payoff",
        strictly_faster && identity_ok,
    );
}

#[test]
fn criterion_09_counterexample_negative_control() {
    let dependent = counterexample_rejection_rate(10_000, 909, false);
    let exchangeable = counterexample_rejection_rate(10_000, 910, true);
    println!("  counterexample rates: dependent {dependent:.4}, exchangeable {exchangeable:.4}");
    let ok = (dependent - 0.5).abs() <= 0.02 && exchangeable <= 1.0 / 3.0 + 0.01;
    report(9, "invariance-through-statistic counterexample", ok);
}

#[test]
fn criterion_10_np_decision_mu_invariant() {
    let d = 5usize;
    let alpha = 0.05;
    let spec = GroupSpec::Orthogonal(d);
    let mut input_rng = ChaCha8Rng::seed_from_u64(1010);
    let mut ok = true;
    for _ in 0..100 {
        let y = Point::Reals((0..d).map(|_| input_rng.random_range(-2.0..2.0)).collect());
        let shared_seed: u64 = input_rng.random();
        let mut decisions = Vec::new();
        for mu in [0.1, 1.0, 10.0] {
            let alt = AlternativeDensity::invariant(move |p: &Point| {
                let proj = p.coord(0);
                let norm2: f64 = p.as_reals().iter().map(|x| x * x).sum();
                (-0.5 * (norm2 - 2.0 * mu * proj + mu * mu)).exp()
            });
            let mut rng = ChaCha8Rng::seed_from_u64(shared_seed);
            let r = np_optimal(
                &alt,
                alpha,
                &y,
                &spec,
                NormalizationMode::MonteCarlo(300),
                &mut rng,
            )
            .expect("MC quantile");
            decisions.push(r.value > 0.0);
        }
        ok &= decisions.windows(2).all(|w| w[0] == w[1]);
    }
    report(10, "NP decision under orthogonal(5) is invariant in mu", ok);
}

#[test]
fn criterion_11_lambda_solver_matches_closed_form() {
    let mut ok = true;
    let mut worst_gap = 0.0f64;
    let mut worst_res = 0.0f64;
    for (_, spec) in suites::group_fixtures() {
        let alt = suites::density_fixture(&spec);
        for base in suites::fixture_points(&spec) {
            let closed = log_optimal_exact(&alt, &base, &spec)
                .expect("closed form")
                .value;
            let solved = utility_optimal(&alt, &UtilitySpec::Log, &base, &spec).expect("solver");
            worst_gap = worst_gap.max((closed - solved.evalue.value).abs());
            worst_res = worst_res.max(solved.normalization.residual.abs());
            ok &= (closed - solved.evalue.value).abs() <= 1e-8;
            ok &= solved.normalization.residual.abs() <= 1e-10;
        }
    }
    println!("  lambda solver: worst value gap {worst_gap:.2e}, worst residual {worst_res:.2e}");
    report(11, "utility-optimal(log) matches closed form", ok);
}

#[test]
fn criterion_12_group_layer_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut ok = true;
    for outcomes in [
        suites::group_laws(&mut rng).expect("laws"),
        suites::representative_invariance(&mut rng).expect("reps"),
        suites::inversion_kernel_reconstruction(&mut rng).expect("kernels"),
        suites::stabilizer_closure().expect("stabilizers"),
        suites::haar_pushforward_uniformity(100_000, &mut rng).expect("haar"),
    ] {
        for o in &outcomes {
            if !o.pass() {
                println!(
                    "  group-layer failure: {} deviation {}",
                    o.name, o.worst_deviation
                );
                ok = false;
            }
        }
    }
    // The tie fixture: the kernel of (1,1,2) is supported on exactly the
    // two-element coset {identity, swap of the tied slots}.
    let spec = GroupSpec::Symmetric(3);
    let y = Point::tokens(vec![1, 1, 2]);
    let rep = orbit_representative(&y, &spec).unwrap();
    let id = GroupElement::Permutation(vec![0, 1, 2]);
    let bac = GroupElement::Permutation(vec![1, 0, 2]);
    let mut seen_id = false;
    let mut seen_bac = false;
    for _ in 0..500 {
        let k = inversion_kernel(&y, &spec, &mut rng).unwrap();
        ok &= k.act(&rep).unwrap() == y;
        if k == id {
            seen_id = true;
        } else if k == bac {
            seen_bac = true;
        } else {
            ok = false;
        }
    }
    ok &= seen_id && seen_bac;
    // Sanity: the coset is exactly the stabilizer of the representative.
    let stab = groupinv_core::group::stabilizer(&spec, &rep).unwrap();
    ok &= enumerate_group(&stab, 10).unwrap().len() == 2;
    report(
        12,
        "group layer: laws, representatives, kernels, stabilizers, Haar",
        ok,
    );
}
