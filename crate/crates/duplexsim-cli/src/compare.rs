//! Policy comparison over sweep results.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::sweep::{read_rows, ResultRow, SweepError};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("no baseline rows for policy '{0}' in the results file")]
    NoBaselineRows(String),
    #[error("missing baseline row for cell (ratio={ratio}, threads={threads}, block={block}) needed by policy '{policy}'")]
    MissingBaselineCell {
        ratio: String,
        threads: u32,
        block: u64,
        policy: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellImprovement {
    pub read_ratio: f64,
    pub threads: u32,
    pub block_size: u64,
    pub baseline_gbps: f64,
    pub policy_gbps: f64,
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub cells: Vec<CellImprovement>,
    /// Arithmetic mean over cells.
    pub mean_improvement_pct: f64,
    pub max_improvement_pct: f64,
    pub max_cell: (f64, u32, u64),
}

/// Per-cell and aggregate percentage improvements of every policy against
/// the named baseline, computed over replica-mean rows:
/// `(policy - baseline) / baseline * 100`.
pub fn compare_policies(rows: &[ResultRow], baseline: &str) -> Result<Vec<PolicySummary>, CompareError> {
    let means: Vec<&ResultRow> = rows.iter().filter(|r| r.replica == "mean").collect();
    let baseline_cells: BTreeMap<(String, u32, u64), &ResultRow> = means
        .iter()
        .filter(|r| r.policy == baseline)
        .map(|r| (r.cell_key(), *r))
        .collect();
    if baseline_cells.is_empty() {
        return Err(CompareError::NoBaselineRows(baseline.to_string()));
    }
    let mut policies: Vec<String> = means
        .iter()
        .map(|r| r.policy.clone())
        .filter(|p| p != baseline)
        .collect();
    policies.sort();
    policies.dedup();

    let mut summaries = Vec::new();
    for policy in policies {
        let mut cells = Vec::new();
        for row in means.iter().filter(|r| r.policy == policy) {
            let base = baseline_cells.get(&row.cell_key()).ok_or_else(|| {
                CompareError::MissingBaselineCell {
                    ratio: format!("{}", row.read_ratio),
                    threads: row.threads,
                    block: row.block_size,
                    policy: policy.clone(),
                }
            })?;
            cells.push(CellImprovement {
                read_ratio: row.read_ratio,
                threads: row.threads,
                block_size: row.block_size,
                baseline_gbps: base.gbps_total,
                policy_gbps: row.gbps_total,
                improvement_pct: (row.gbps_total - base.gbps_total) / base.gbps_total * 100.0,
            });
        }
        let mean = cells.iter().map(|c| c.improvement_pct).sum::<f64>() / cells.len() as f64;
        let best = cells
            .iter()
            .max_by(|a, b| a.improvement_pct.total_cmp(&b.improvement_pct))
            .expect("policy has cells");
        summaries.push(PolicySummary {
            policy,
            mean_improvement_pct: mean,
            max_improvement_pct: best.improvement_pct,
            max_cell: (best.read_ratio, best.threads, best.block_size),
            cells,
        });
    }
    Ok(summaries)
}

pub fn compare_file(path: &Path, baseline: &str) -> Result<Vec<PolicySummary>, CompareError> {
    let rows = read_rows(path)?;
    compare_policies(&rows, baseline)
}

pub fn render(summaries: &[PolicySummary], baseline: &str) -> String {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&format!(
            "policy {} vs {}: mean {:+.1}%  max {:+.1}% at (ratio {}, threads {}, block {})\n",
            s.policy,
            baseline,
            s.mean_improvement_pct,
            s.max_improvement_pct,
            s.max_cell.0,
            s.max_cell.1,
            s.max_cell.2,
        ));
        for c in &s.cells {
            out.push_str(&format!(
                "  ratio {:<5} threads {:<4} block {:<8} {:>8.2} -> {:>8.2} GB/s  {:+.1}%\n",
                c.read_ratio, c.threads, c.block_size, c.baseline_gbps, c.policy_gbps, c.improvement_pct,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, ratio: f64, replica: &str, gbps: f64) -> ResultRow {
        ResultRow {
            experiment: "x".into(),
            policy: policy.into(),
            read_ratio: ratio,
            threads: 4,
            block_size: 65536,
            pattern: "random".into(),
            node: 0,
            replica: replica.into(),
            gbps_total: gbps,
            gbps_read: gbps / 2.0,
            gbps_write: gbps / 2.0,
            iops: 0.0,
            p50_ns: 0.0,
            p99_ns: 0.0,
            turnarounds: 0,
            improvement_vs_baseline_pct: None,
        }
    }

    #[test]
    fn fifty_percent_improvement() {
        let rows = vec![
            row("baseline", 0.5, "mean", 10.0),
            row("timeseries", 0.5, "mean", 15.0),
        ];
        let summary = compare_policies(&rows, "baseline").unwrap();
        assert_eq!(summary.len(), 1);
        assert!((summary[0].mean_improvement_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn identical_values_are_zero_percent() {
        let rows = vec![
            row("baseline", 0.5, "mean", 10.0),
            row("colocate", 0.5, "mean", 10.0),
        ];
        let summary = compare_policies(&rows, "baseline").unwrap();
        assert_eq!(summary[0].mean_improvement_pct, 0.0);
        assert_eq!(summary[0].max_improvement_pct, 0.0);
    }

    #[test]
    fn mean_and_max_over_cells() {
        // Cells {+100%, 0%}: mean +50%, max +100%.
        let rows = vec![
            row("baseline", 0.0, "mean", 10.0),
            row("baseline", 1.0, "mean", 10.0),
            row("timeseries", 0.0, "mean", 20.0),
            row("timeseries", 1.0, "mean", 10.0),
        ];
        let summary = compare_policies(&rows, "baseline").unwrap();
        assert!((summary[0].mean_improvement_pct - 50.0).abs() < 1e-12);
        assert!((summary[0].max_improvement_pct - 100.0).abs() < 1e-12);
        assert_eq!(summary[0].max_cell.0, 0.0);
    }

    #[test]
    fn missing_baseline_cell_is_named() {
        let rows = vec![
            row("baseline", 0.0, "mean", 10.0),
            row("timeseries", 0.5, "mean", 12.0),
        ];
        let err = compare_policies(&rows, "baseline").unwrap_err();
        match err {
            CompareError::MissingBaselineCell { ratio, .. } => assert_eq!(ratio, "0.5"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn absent_baseline_policy_errors() {
        let rows = vec![row("timeseries", 0.5, "mean", 12.0)];
        assert!(matches!(
            compare_policies(&rows, "baseline"),
            Err(CompareError::NoBaselineRows(_))
        ));
    }
}
