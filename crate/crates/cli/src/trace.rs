//! Quantile traces of running maxima across replications, plus CSV output
//! and the run manifest written next to every output file.

use std::io::Write;
use std::path::Path;

use anyhow::{ensure, Context};
use serde::Serialize;

/// One row of a quantile trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantileRow {
    pub time: usize,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

/// Per-time 5/50/95% quantiles of the running maxima of a bundle of paths.
#[derive(Debug, Clone)]
pub struct QuantileTrace {
    pub rows: Vec<QuantileRow>,
}

impl QuantileTrace {
    /// Build from `paths[rep][time]` of per-replication running maxima.
    /// Replications are sorted before quantile extraction, so the result
    /// does not depend on completion order.
    pub fn from_running_maxima(paths: &[Vec<f64>]) -> anyhow::Result<QuantileTrace> {
        ensure!(!paths.is_empty(), "no replications");
        let times = paths[0].len();
        ensure!(
            paths.iter().all(|p| p.len() == times),
            "ragged replication lengths"
        );
        let mut rows = Vec::with_capacity(times);
        for t in 0..times {
            let mut column: Vec<f64> = paths.iter().map(|p| p[t]).collect();
            column.sort_by(|a, b| a.partial_cmp(b).expect("finite path values"));
            rows.push(QuantileRow {
                time: t + 1,
                q05: order_stat(&column, 0.05),
                q50: order_stat(&column, 0.50),
                q95: order_stat(&column, 0.95),
            });
        }
        let trace = QuantileTrace { rows };
        trace.check_monotone()?;
        Ok(trace)
    }

    /// Running-max quantiles are non-decreasing in time.
    pub fn check_monotone(&self) -> anyhow::Result<()> {
        for w in self.rows.windows(2) {
            ensure!(
                w[1].q05 >= w[0].q05 - 1e-12
                    && w[1].q50 >= w[0].q50 - 1e-12
                    && w[1].q95 >= w[0].q95 - 1e-12,
                "quantile trace decreased between t={} and t={}",
                w[0].time,
                w[1].time
            );
            ensure!(
                w[0].q05 <= w[0].q50 && w[0].q50 <= w[0].q95,
                "quantile ordering violated at t={}",
                w[0].time
            );
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "time,q05,q50,q95")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.time, r.q05, r.q50, r.q95)?;
        }
        Ok(())
    }
}

/// Type-1 (inverse-CDF) empirical quantile of sorted data: the
/// `ceil(p n)`-th order statistic, no interpolation.
fn order_stat(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Provenance record written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub version: &'a str,
}

/// Write `<path>` plus `<path>.manifest.json`.
pub fn write_output_with_manifest<C: Serialize>(
    path: &Path,
    contents: &str,
    manifest: &RunManifest<'_, C>,
) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    let manifest_path = path.with_extension(format!(
        "{}manifest.json",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    let body = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&manifest_path, body)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(())
}
