//! Sequential evidence: conditional e-values, test martingales, and
//! finite-space e-processes.
//!
//! A test martingale multiplies per-step e-values that are valid
//! conditionally on the past; the conditioning is handled by the subgroup
//! that stabilizes the already-observed data, so each step reduces to an
//! unconditional e-value for invariance under that stabilizer.
//!
//! An e-process for invariance need not be a martingale. On a finite,
//! fully enumerable sample space we build one by tracking, for every
//! candidate orbit, the Doob martingale of an orbit-restricted target
//! e-value, and taking the pointwise infimum across orbits. Orbits that
//! become incompatible with the observed cell drop out by going to
//! `+inf`. If the filtration eventually separates points, the infimum at
//! the final step recovers the target e-value.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::evalue::{EValueResult, NormalizationMode, TestStatistic};
use crate::group::{orbit_representative, prefix_stabilizer, GroupSpec, Point, PointKey};
use crate::optimal::AlternativeDensity;

/// Tolerance for "the target audits to exactly one on each orbit".
pub const TARGET_AUDIT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Martingale accumulation
// ---------------------------------------------------------------------------

/// Running product of per-step e-values, accumulated in the log domain.
///
/// A step of zero drives the martingale permanently to zero.
#[derive(Debug, Clone, Default)]
pub struct MartingaleState {
    n: usize,
    log_value: f64,
    history: Vec<f64>,
}

impl MartingaleState {
    pub fn new() -> Self {
        MartingaleState {
            n: 0,
            log_value: 0.0,
            history: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> f64 {
        if self.log_value == f64::NEG_INFINITY {
            0.0
        } else {
            self.log_value.exp()
        }
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// Functional update with one more step e-value.
    pub fn update(&self, step_evalue: f64) -> Result<MartingaleState> {
        if step_evalue < 0.0 || step_evalue.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "step e-value must be non-negative, got {step_evalue}"
            )));
        }
        let mut next = self.clone();
        next.n += 1;
        next.log_value += if step_evalue == 0.0 {
            f64::NEG_INFINITY
        } else {
            step_evalue.ln()
        };
        next.history.push(step_evalue);
        Ok(next)
    }
}

/// Free-function form of [`MartingaleState::update`].
pub fn update_martingale(state: &MartingaleState, step_evalue: f64) -> Result<MartingaleState> {
    state.update(step_evalue)
}

// ---------------------------------------------------------------------------
// Conditional e-values via stabilizers
// ---------------------------------------------------------------------------

/// Generic conditional e-value: evaluates the statistic-based e-value for
/// invariance under the subgroup of `spec_n` that stabilizes the observed
/// `prefix` of `x_full`.
///
/// With all-distinct observations under full exchangeability the stabilizer
/// is trivial and the e-value is identically 1: no evidence is possible,
/// which is why batching (or rank filtrations) is needed there.
pub fn conditional_generic_evalue(
    stat: &TestStatistic,
    x_full: &Point,
    spec_n: &GroupSpec,
    prefix: &Point,
) -> Result<EValueResult> {
    check_prefix(x_full, prefix)?;
    let k = prefix_stabilizer(spec_n, prefix)?;
    let numerator = stat.eval(x_full);
    let denominator = crate::evalue::orbit_mean(stat, x_full, &k)?;
    Ok(EValueResult::from_ratio(
        numerator,
        denominator,
        NormalizationMode::ExactEnumeration,
    ))
}

/// Log-optimal conditional e-value under the prefix stabilizer, for a
/// density w.r.t. an invariant reference (the ratio reduces to `q`).
pub fn conditional_log_optimal(
    alt: &AlternativeDensity,
    x_full: &Point,
    spec_n: &GroupSpec,
    prefix: &Point,
) -> Result<EValueResult> {
    check_prefix(x_full, prefix)?;
    let k = prefix_stabilizer(spec_n, prefix)?;
    let stat = TestStatistic::new("ratio", {
        let alt = alt.clone();
        move |y: &Point| alt.ratio(y)
    });
    let numerator = stat.eval(x_full);
    let denominator = crate::evalue::orbit_mean(&stat, x_full, &k)?;
    Ok(EValueResult::from_ratio(
        numerator,
        denominator,
        NormalizationMode::ExactEnumeration,
    ))
}

fn check_prefix(x_full: &Point, prefix: &Point) -> Result<()> {
    if prefix.len() > x_full.len()
        || !x_full
            .prefix(prefix.len())
            .approx_eq(prefix, crate::REAL_EQ_TOL)
    {
        return Err(Error::InvalidParameter(
            "prefix must be the leading projection of the full point".into(),
        ));
    }
    Ok(())
}

/// Rank of `new_value` among `prefix_values` plus itself (ascending,
/// 1-indexed), ties broken uniformly. Under exchangeability of the joined
/// sequence this "last rank" is uniform on `1..=n`.
pub fn last_rank<R: Rng + ?Sized>(prefix_values: &[f64], new_value: f64, rng: &mut R) -> usize {
    let below = prefix_values.iter().filter(|&&v| v < new_value).count();
    let ties = prefix_values.iter().filter(|&&v| v == new_value).count();
    below
        + 1
        + if ties > 0 {
            rng.random_range(0..=ties)
        } else {
            0
        }
}

// ---------------------------------------------------------------------------
// Finite filtrations
// ---------------------------------------------------------------------------

/// One step of a filtration: a partition of the space into labeled cells.
#[derive(Debug, Clone)]
pub struct PartitionStep {
    /// Cell id of each space point.
    pub cell_of: Vec<usize>,
    /// Display label per cell id.
    pub cell_labels: Vec<String>,
}

impl PartitionStep {
    pub fn n_cells(&self) -> usize {
        self.cell_labels.len()
    }

    /// The one-cell partition.
    pub fn trivial(space_len: usize) -> PartitionStep {
        PartitionStep {
            cell_of: vec![0; space_len],
            cell_labels: vec!["*".into()],
        }
    }

    /// The discrete partition separating every point.
    pub fn discrete(labels: &[String]) -> PartitionStep {
        PartitionStep {
            cell_of: (0..labels.len()).collect(),
            cell_labels: labels.to_vec(),
        }
    }
}

/// An increasing sequence of partitions of an enumerated space. Step 0 is
/// the coarsest declared partition; each later step refines the previous
/// one; the final step need not separate all points.
#[derive(Debug, Clone)]
pub struct FiniteFiltration {
    pub space: Vec<Point>,
    pub point_labels: Vec<String>,
    pub steps: Vec<PartitionStep>,
}

impl FiniteFiltration {
    pub fn new(
        space: Vec<Point>,
        point_labels: Vec<String>,
        steps: Vec<PartitionStep>,
    ) -> Result<FiniteFiltration> {
        if space.is_empty() || steps.is_empty() {
            return Err(Error::InvalidParameter(
                "filtration needs a space and steps".into(),
            ));
        }
        if point_labels.len() != space.len() {
            return Err(Error::InvalidParameter(
                "one label per point required".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &space {
            if !seen.insert(p.key()) {
                return Err(Error::InvalidParameter(format!(
                    "space contains the point {p} twice"
                )));
            }
        }
        for (s, step) in steps.iter().enumerate() {
            if step.cell_of.len() != space.len() {
                return Err(Error::InvalidParameter(format!(
                    "step {s} assigns cells to {} points, space has {}",
                    step.cell_of.len(),
                    space.len()
                )));
            }
            if step.cell_of.iter().any(|&c| c >= step.n_cells()) {
                return Err(Error::InvalidParameter(format!(
                    "step {s} has out-of-range cell id"
                )));
            }
        }
        for s in 1..steps.len() {
            // Refinement: same cell now implies same cell before.
            for i in 0..space.len() {
                for j in (i + 1)..space.len() {
                    if steps[s].cell_of[i] == steps[s].cell_of[j]
                        && steps[s - 1].cell_of[i] != steps[s - 1].cell_of[j]
                    {
                        return Err(Error::InvalidParameter(format!(
                            "step {s} does not refine step {}",
                            s - 1
                        )));
                    }
                }
            }
        }
        Ok(FiniteFiltration {
            space,
            point_labels,
            steps,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

// ---------------------------------------------------------------------------
// Doob e-process tables
// ---------------------------------------------------------------------------

/// Per-orbit Doob martingales of an orbit-restricted target e-value, and
/// their pointwise infimum: a valid e-process for invariance on the space.
#[derive(Debug, Clone)]
pub struct EProcessTable {
    pub filtration: FiniteFiltration,
    /// Orbit index of every space point.
    pub orbit_of: Vec<usize>,
    /// Display label (representative) per orbit.
    pub orbit_labels: Vec<String>,
    /// `per_orbit[o][s][i]`: the orbit-`o` martingale at step `s`, as a
    /// function of the step-`s` cell of point `i`; `+inf` when the cell no
    /// longer intersects the orbit.
    pub per_orbit: Vec<Vec<Vec<f64>>>,
    /// `infimum[s][i]`: the e-process value at step `s` for point `i`.
    pub infimum: Vec<Vec<f64>>,
    /// Target e-value per point.
    pub target: Vec<f64>,
}

/// Build the e-process table for `target` on a fully enumerated space.
///
/// `target` must be an exact e-value for invariance under `spec`: its
/// mean over every orbit of the space must be 1 (audited; deviation beyond
/// `TARGET_AUDIT_TOL` is an error). The target is fixed up front;
/// adaptively chosen orbit-wise targets are future work.
pub fn doob_eprocess(
    filtration: &FiniteFiltration,
    spec: &GroupSpec,
    target: &dyn Fn(&Point) -> Result<f64>,
) -> Result<EProcessTable> {
    let space = &filtration.space;
    let n = space.len();

    // Orbit decomposition via representatives.
    let mut orbit_keys: Vec<PointKey> = Vec::new();
    let mut orbit_labels: Vec<String> = Vec::new();
    let mut orbit_of = vec![0usize; n];
    for (i, p) in space.iter().enumerate() {
        let rep = orbit_representative(p, spec)?;
        let key = rep.key();
        let idx = match orbit_keys.iter().position(|k| *k == key) {
            Some(idx) => idx,
            None => {
                orbit_keys.push(key);
                orbit_labels.push(format!("{rep}"));
                orbit_keys.len() - 1
            }
        };
        orbit_of[i] = idx;
    }
    let n_orbits = orbit_keys.len();

    let target_values: Vec<f64> = space.iter().map(target).collect::<Result<Vec<f64>>>()?;

    // Exactness audit per orbit.
    for (o, label) in orbit_labels.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| orbit_of[i] == o).collect();
        let audit = members.iter().map(|&i| target_values[i]).sum::<f64>() / members.len() as f64;
        if (audit - 1.0).abs() > TARGET_AUDIT_TOL {
            return Err(Error::InvalidTarget {
                orbit_label: label.clone(),
                audit,
            });
        }
    }

    let n_steps = filtration.n_steps();
    let mut per_orbit = vec![vec![vec![f64::INFINITY; n]; n_steps]; n_orbits];
    for (s, step) in filtration.steps.iter().enumerate() {
        for cell in 0..step.n_cells() {
            let members: Vec<usize> = (0..n).filter(|&i| step.cell_of[i] == cell).collect();
            for (o, orbit_steps) in per_orbit.iter_mut().enumerate() {
                let on_orbit: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|&i| orbit_of[i] == o)
                    .collect();
                let value = if on_orbit.is_empty() {
                    // The cell rules this orbit out.
                    f64::INFINITY
                } else {
                    on_orbit.iter().map(|&i| target_values[i]).sum::<f64>() / on_orbit.len() as f64
                };
                for &i in &members {
                    orbit_steps[s][i] = value;
                }
            }
        }
    }

    let infimum: Vec<Vec<f64>> = (0..n_steps)
        .map(|s| {
            (0..n)
                .map(|i| {
                    (0..n_orbits)
                        .map(|o| per_orbit[o][s][i])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();

    Ok(EProcessTable {
        filtration: filtration.clone(),
        orbit_of,
        orbit_labels,
        per_orbit,
        infimum,
        target: target_values,
    })
}

impl EProcessTable {
    pub fn n_orbits(&self) -> usize {
        self.orbit_labels.len()
    }

    /// E-process value at `step` for the point with the given index.
    pub fn infimum_at(&self, step: usize, point_idx: usize) -> f64 {
        self.infimum[step][point_idx]
    }

    /// Orbit-`o` martingale value at `step` for the point with the given
    /// index (a function of the point's cell).
    pub fn per_orbit_at(&self, orbit: usize, step: usize, point_idx: usize) -> f64 {
        self.per_orbit[orbit][step][point_idx]
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.filtration.point_labels.iter().position(|l| l == label)
    }

    pub fn orbit_index(&self, label: &str) -> Option<usize> {
        self.orbit_labels.iter().position(|l| l == label)
    }

    /// Point indices of one orbit.
    pub fn orbit_members(&self, orbit: usize) -> Vec<usize> {
        (0..self.filtration.space.len())
            .filter(|&i| self.orbit_of[i] == orbit)
            .collect()
    }

    /// Exact expectation of the stopped infimum process under the uniform
    /// distribution on the given orbit.
    pub fn stopped_expectation(&self, orbit: usize, stopping: &StoppingTime) -> f64 {
        let members = self.orbit_members(orbit);
        let total: f64 = members
            .iter()
            .map(|&i| {
                let tau = stopping.stop_step(&self.filtration, i);
                self.infimum[tau][i]
            })
            .sum();
        total / members.len() as f64
    }

    /// Rows `(step, cell_label, orbit_label, value)` for every per-orbit
    /// martingale plus the infimum process, delimiter-separated.
    pub fn write_trace<W: Write>(&self, out: &mut W, delim: char) -> std::io::Result<()> {
        writeln!(out, "step{delim}cell_label{delim}orbit_label{delim}value")?;
        for (s, step) in self.filtration.steps.iter().enumerate() {
            for cell in 0..step.n_cells() {
                let any_member =
                    (0..self.filtration.space.len()).find(|&i| step.cell_of[i] == cell);
                let Some(i) = any_member else { continue };
                for o in 0..self.n_orbits() {
                    writeln!(
                        out,
                        "{s}{delim}{}{delim}{}{delim}{}",
                        step.cell_labels[cell], self.orbit_labels[o], self.per_orbit[o][s][i]
                    )?;
                }
                writeln!(
                    out,
                    "{s}{delim}{}{delim}infimum{delim}{}",
                    step.cell_labels[cell], self.infimum[s][i]
                )?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Stopping times
// ---------------------------------------------------------------------------

/// An adapted stopping time: a set of cells per step at which to stop. The
/// final step always stops.
#[derive(Debug, Clone)]
pub struct StoppingTime {
    /// `stop_at[s]` holds the cell ids at which the time stops at step `s`
    /// (if not already stopped).
    pub stop_at: Vec<Vec<usize>>,
}

impl StoppingTime {
    /// The step at which this time stops for the given point.
    pub fn stop_step(&self, filtration: &FiniteFiltration, point_idx: usize) -> usize {
        let last = filtration.n_steps() - 1;
        for (s, stops) in self.stop_at.iter().enumerate() {
            if s > last {
                break;
            }
            if stops.contains(&filtration.steps[s].cell_of[point_idx]) {
                return s;
            }
        }
        last
    }
}

/// Enumerate every adapted stopping time of a (small) filtration.
///
/// The count grows combinatorially; this is meant for audit-sized spaces.
pub fn all_stopping_times(
    filtration: &FiniteFiltration,
    max_count: usize,
) -> Result<Vec<StoppingTime>> {
    let n_steps = filtration.n_steps();
    let mut result: Vec<Vec<Vec<usize>>> = vec![vec![]];
    // Active cells at step 0: all of them.
    let mut frontiers: Vec<Vec<usize>> = vec![(0..filtration.steps[0].n_cells()).collect()];

    for s in 0..n_steps {
        let mut next_result = Vec::new();
        let mut next_frontiers = Vec::new();
        let is_last = s + 1 == n_steps;
        for (partial, active) in result.iter().zip(&frontiers) {
            if is_last {
                // Forced stop everywhere still active.
                let mut full = partial.clone();
                full.push(active.clone());
                next_result.push(full);
                next_frontiers.push(Vec::new());
                continue;
            }
            // Choose any subset of active cells to stop at.
            let k = active.len();
            for mask in 0u64..(1u64 << k) {
                let stops: Vec<usize> = (0..k)
                    .filter(|&b| mask >> b & 1 == 1)
                    .map(|b| active[b])
                    .collect();
                let mut full = partial.clone();
                full.push(stops.clone());
                // Next step's active cells: children of surviving cells.
                let surviving: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|c| !stops.contains(c))
                    .collect();
                let mut children: Vec<usize> = Vec::new();
                for i in 0..filtration.space.len() {
                    if surviving.contains(&filtration.steps[s].cell_of[i]) {
                        let child = filtration.steps[s + 1].cell_of[i];
                        if !children.contains(&child) {
                            children.push(child);
                        }
                    }
                }
                next_result.push(full);
                next_frontiers.push(children);
                if next_result.len() > max_count {
                    return Err(Error::CapacityExceeded {
                        cardinality: next_result.len() as u128,
                        limit: max_count as u128,
                    });
                }
            }
        }
        result = next_result;
        frontiers = next_frontiers;
    }
    Ok(result
        .into_iter()
        .map(|stop_at| StoppingTime { stop_at })
        .collect())
}
