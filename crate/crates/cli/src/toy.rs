//! The two-letter toy e-process: a four-point space under a letter swap,
//! the log-optimal target against orbit-wise alternatives, and its Doob
//! table with every stopping time audited.

use std::fmt::Write as _;

use groupinv_core::group::{GroupSpec, Point};
use groupinv_core::optimal::{log_optimal_exact, AlternativeDensity};
use groupinv_core::sequential::{
    all_stopping_times, doob_eprocess, EProcessTable, FiniteFiltration, PartitionStep,
};

/// Everything the toy run produces: the table, one audit row per stopping
/// time and orbit, and the supermartingale violation pair.
pub struct ToyReport {
    pub table: EProcessTable,
    /// `(stopping time index, orbit label, expectation)`.
    pub stopped_audits: Vec<(usize, String, f64)>,
    /// Number of stopping times that can act after the first letter (the
    /// interesting ones; the always-stop-at-0 time is audited too).
    pub nontrivial_stopping_times: usize,
    /// `(continuation value, infimum value)` at cell A: the first exceeds
    /// the second, so the infimum is not a supermartingale.
    pub violation: (f64, f64),
}

/// Letters A, B, C are encoded as tokens 0, 1, 2.
pub fn toy_space() -> (Vec<Point>, Vec<String>) {
    let space = vec![
        Point::tokens(vec![0, 1]),
        Point::tokens(vec![1, 0]),
        Point::tokens(vec![0, 2]),
        Point::tokens(vec![2, 0]),
    ];
    let labels = vec!["AB".into(), "BA".into(), "AC".into(), "CA".into()];
    (space, labels)
}

pub fn toy_filtration() -> anyhow::Result<FiniteFiltration> {
    let (space, labels) = toy_space();
    let first_letter = PartitionStep {
        cell_of: vec![0, 1, 0, 2],
        cell_labels: vec!["A".into(), "B".into(), "C".into()],
    };
    let steps = vec![
        PartitionStep::trivial(4),
        first_letter,
        PartitionStep::discrete(&labels),
    ];
    Ok(FiniteFiltration::new(space, labels, steps)?)
}

/// Orbit-wise alternatives Q1(AB) = 2/3, Q1(BA) = 1/3 and Q2(AC) = 1/3,
/// Q2(CA) = 2/3, expressed as one density on the space.
pub fn toy_alternative() -> AlternativeDensity {
    AlternativeDensity::invariant(|p: &Point| match p {
        Point::Tokens(v) => match (v[0], v[1]) {
            (0, 1) => 2.0 / 3.0,
            (1, 0) => 1.0 / 3.0,
            (0, 2) => 1.0 / 3.0,
            (2, 0) => 2.0 / 3.0,
            _ => 0.0,
        },
        _ => 0.0,
    })
}

pub fn run_toy_eprocess() -> anyhow::Result<ToyReport> {
    let filtration = toy_filtration()?;
    let spec = GroupSpec::Symmetric(2);
    let alt = toy_alternative();
    let spec_for_target = spec.clone();
    let table = doob_eprocess(&filtration, &spec, &move |p: &Point| {
        log_optimal_exact(&alt, p, &spec_for_target).map(|r| r.value)
    })?;

    let times = all_stopping_times(&table.filtration, 1000)?;
    let mut stopped_audits = Vec::new();
    let mut nontrivial = 0usize;
    for (idx, t) in times.iter().enumerate() {
        let stops_immediately = t.stop_at.first().map(|s| !s.is_empty()).unwrap_or(false);
        if !stops_immediately {
            nontrivial += 1;
        }
        for o in 0..table.n_orbits() {
            stopped_audits.push((
                idx,
                table.orbit_labels[o].clone(),
                table.stopped_expectation(o, t),
            ));
        }
    }

    let ab = table.point_index("AB").expect("AB present");
    let o1 = table.orbit_of[ab];
    let violation = (table.per_orbit_at(o1, 1, ab), table.infimum_at(1, ab));

    Ok(ToyReport {
        table,
        stopped_audits,
        nontrivial_stopping_times: nontrivial,
        violation,
    })
}

impl ToyReport {
    /// Human-readable rendition with fractions for the exact values.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let t = &self.table;
        let idx = |label: &str| t.point_index(label).unwrap();
        let _ = writeln!(
            out,
            "toy e-process on {{AB, BA, AC, CA}} under the letter swap"
        );
        // Orbit labels carry token representatives; show them as letters.
        let letters = |s: &str| -> String {
            s.chars()
                .map(|c| match c {
                    '0' => 'A',
                    '1' => 'B',
                    '2' => 'C',
                    other => other,
                })
                .collect()
        };
        let _ = writeln!(
            out,
            "orbits: O1 = {}, O2 = {}",
            letters(&t.orbit_labels[0]),
            letters(&t.orbit_labels[1])
        );
        for (label, i) in [
            ("AB", idx("AB")),
            ("BA", idx("BA")),
            ("AC", idx("AC")),
            ("CA", idx("CA")),
        ] {
            let _ = writeln!(out, "eps_2({label}) = {}", frac(t.infimum_at(2, i)));
        }
        for (cell, i) in [("A", idx("AB")), ("B", idx("BA")), ("C", idx("CA"))] {
            let _ = writeln!(out, "eps_1({cell}) = {}", frac(t.infimum_at(1, i)));
        }
        for o in 0..t.n_orbits() {
            for (cell, i) in [("A", idx("AB")), ("B", idx("BA")), ("C", idx("CA"))] {
                let v = t.per_orbit_at(o, 1, i);
                let _ = writeln!(out, "eps_1^O{}({cell}) = {}", o + 1, frac(v));
            }
        }
        let worst = self
            .stopped_audits
            .iter()
            .map(|(_, _, e)| *e)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "stopped expectations: {} audits over {} stopping times ({} nontrivial), max = {worst}",
            self.stopped_audits.len(),
            self.stopped_audits.len() / t.n_orbits(),
            self.nontrivial_stopping_times,
        );
        let _ = writeln!(
            out,
            "not a supermartingale: continuation {} > {} = eps_1(A)",
            frac(self.violation.0),
            frac(self.violation.1)
        );
        out
    }
}

/// Render thirds and other small fractions exactly.
fn frac(x: f64) -> String {
    if x.is_infinite() {
        return "inf".into();
    }
    for den in 1..=24u32 {
        let num = x * den as f64;
        if (num - num.round()).abs() < 1e-12 && num.round().abs() < 1e6 {
            let num = num.round() as i64;
            return if den == 1 {
                format!("{num}")
            } else {
                format!("{num}/{den} ({x})")
            };
        }
    }
    format!("{x}")
}
