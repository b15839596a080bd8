//! Sweep execution and CSV result emission.
//!
//! One `ResultRow` is written per (sweep cell x policy x replica), followed
//! by replica-mean rows (`replica = "mean"`). When a policy literally named
//! `baseline` runs in the same sweep, every other policy's rows carry a
//! percentage improvement against the matching baseline cell.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use duplexsim::channel::AccessPattern;
use duplexsim::policy::{PolicyHandle, PolicyParams};
use duplexsim::seed;
use duplexsim::sim::{run, SimError, SimResult};

use crate::config::{CellSpec, ConfigError, ExperimentConfig};

/// Golden CSV header; tests pin this exact string.
pub const CSV_HEADER: &str = "experiment,policy,read_ratio,threads,block_size,pattern,node,replica,gbps_total,gbps_read,gbps_write,iops,p50_ns,p99_ns,turnarounds,improvement_vs_baseline_pct";

pub const BASELINE_POLICY: &str = "baseline";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One output row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub policy: String,
    pub read_ratio: f64,
    pub threads: u32,
    pub block_size: u64,
    pub pattern: String,
    pub node: usize,
    /// Replica index, or "mean" for the replica-average row.
    pub replica: String,
    pub gbps_total: f64,
    pub gbps_read: f64,
    pub gbps_write: f64,
    pub iops: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub turnarounds: u64,
    /// Empty unless a baseline policy ran in the same cell and replica.
    pub improvement_vs_baseline_pct: Option<f64>,
}

impl ResultRow {
    /// Cell identity: everything that distinguishes one sweep point.
    pub fn cell_key(&self) -> (String, u32, u64) {
        (format!("{:.6}", self.read_ratio), self.threads, self.block_size)
    }
}

/// Files produced by a sweep.
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub csv_path: PathBuf,
    pub decisions_path: Option<PathBuf>,
}

fn pattern_name(p: AccessPattern) -> &'static str {
    match p {
        AccessPattern::Sequential => "sequential",
        AccessPattern::Random => "random",
    }
}

fn row_from_result(
    config: &ExperimentConfig,
    cell: &CellSpec,
    policy: &str,
    replica: &str,
    result: &SimResult,
) -> ResultRow {
    let turnarounds: u64 = result.nodes.iter().map(|n| n.turnarounds).sum();
    ResultRow {
        experiment: config.experiment.name.clone(),
        policy: policy.to_string(),
        read_ratio: cell.read_ratio,
        threads: cell.threads,
        block_size: cell.block_size,
        pattern: pattern_name(cell.pattern).to_string(),
        node: cell.target_node,
        replica: replica.to_string(),
        gbps_total: result.total_gbps(),
        gbps_read: result.read_gbps(),
        gbps_write: result.write_gbps(),
        iops: result.iops(),
        p50_ns: result.latency.p50_ns,
        p99_ns: result.latency.p99_ns,
        turnarounds,
        improvement_vs_baseline_pct: None,
    }
}

/// Runs every (cell x policy x replica) simulation, replicas seeded as
/// `hash(master_seed, replica_index)`. Cells execute in parallel but results
/// merge in deterministic cell order.
pub fn run_sweep(
    config: &ExperimentConfig,
    master_seed: u64,
    out_dir: &Path,
) -> Result<SweepOutput, SweepError> {
    config.validate()?;
    let cells = config.cells(master_seed)?;
    let policies = &config.experiment.policies;
    let replicas = config.experiment.replicas;

    // Flatten the work in output order.
    struct Job<'a> {
        cell_idx: usize,
        cell: &'a CellSpec,
        policy: &'a str,
        replica: u32,
    }
    let mut jobs = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for policy in policies {
            for replica in 0..replicas {
                jobs.push(Job { cell_idx, cell, policy, replica });
            }
        }
    }

    let results: Vec<Result<(usize, String, u32, SimResult), SweepError>> = jobs
        .par_iter()
        .map(|job| {
            let mut sim = job.cell.sim.clone();
            sim.master_seed = seed::derive(master_seed, job.replica as u64);
            let params = PolicyParams { cpus: sim.cpus, ..sim.policy_params };
            let mut policy = PolicyHandle::by_name(job.policy, params)
                .expect("policy names validated by config");
            let result = run(&sim, &job.cell.workloads, &mut policy)?;
            Ok((job.cell_idx, job.policy.to_string(), job.replica, result))
        })
        .collect();

    let mut rows: Vec<ResultRow> = Vec::new();
    let mut decisions = String::new();
    let mut failure: Option<SweepError> = None;
    for outcome in results {
        match outcome {
            Ok((cell_idx, policy, replica, result)) => {
                let cell = &cells[cell_idx];
                rows.push(row_from_result(config, cell, &policy, &replica.to_string(), &result));
                if config.experiment.log_decisions {
                    for d in &result.decisions {
                        let _ = writeln!(
                            decisions,
                            "cell={cell_idx},replica={replica},{}",
                            d.to_line()
                        );
                    }
                }
            }
            Err(err) if failure.is_none() => failure = Some(err),
            Err(_) => {}
        }
    }
    if let Some(err) = failure {
        // Flush whatever completed before failing.
        fs::create_dir_all(out_dir)?;
        write_rows(&out_dir.join("results.csv"), &rows)?;
        return Err(err);
    }

    // Replica-mean rows per (cell, policy), in the same deterministic order.
    let mut mean_rows = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for policy in policies {
            let members: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| {
                    r.policy == *policy
                        && r.replica != "mean"
                        && same_cell(r, cell)
                })
                .collect();
            debug_assert_eq!(members.len(), replicas as usize, "cell {cell_idx}");
            let n = members.len() as f64;
            let mean = |f: fn(&ResultRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            mean_rows.push(ResultRow {
                experiment: config.experiment.name.clone(),
                policy: policy.clone(),
                read_ratio: cell.read_ratio,
                threads: cell.threads,
                block_size: cell.block_size,
                pattern: pattern_name(cell.pattern).to_string(),
                node: cell.target_node,
                replica: "mean".to_string(),
                gbps_total: mean(|r| r.gbps_total),
                gbps_read: mean(|r| r.gbps_read),
                gbps_write: mean(|r| r.gbps_write),
                iops: mean(|r| r.iops),
                p50_ns: mean(|r| r.p50_ns),
                p99_ns: mean(|r| r.p99_ns),
                turnarounds: (members.iter().map(|r| r.turnarounds).sum::<u64>() as f64 / n)
                    .round() as u64,
                improvement_vs_baseline_pct: None,
            });
        }
    }
    rows.extend(mean_rows);

    // Improvement columns against the baseline policy, matched on cell and
    // replica label.
    if policies.iter().any(|p| p == BASELINE_POLICY) {
        let baselines: Vec<ResultRow> = rows
            .iter()
            .filter(|r| r.policy == BASELINE_POLICY)
            .cloned()
            .collect();
        for row in rows.iter_mut().filter(|r| r.policy != BASELINE_POLICY) {
            let base = baselines
                .iter()
                .find(|b| b.cell_key() == row.cell_key() && b.replica == row.replica);
            if let Some(base) = base {
                if base.gbps_total > 0.0 {
                    row.improvement_vs_baseline_pct =
                        Some((row.gbps_total - base.gbps_total) / base.gbps_total * 100.0);
                }
            }
        }
    }

    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("results.csv");
    write_rows(&csv_path, &rows)?;
    let decisions_path = if config.experiment.log_decisions {
        let path = out_dir.join("decisions.log");
        fs::write(&path, decisions)?;
        Some(path)
    } else {
        None
    };
    Ok(SweepOutput { rows, csv_path, decisions_path })
}

fn same_cell(row: &ResultRow, cell: &CellSpec) -> bool {
    row.read_ratio == cell.read_ratio
        && row.threads == cell.threads
        && row.block_size == cell.block_size
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), SweepError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    writer.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        writer.write_record([
            row.experiment.clone(),
            row.policy.clone(),
            row.read_ratio.to_string(),
            row.threads.to_string(),
            row.block_size.to_string(),
            row.pattern.clone(),
            row.node.to_string(),
            row.replica.clone(),
            row.gbps_total.to_string(),
            row.gbps_read.to_string(),
            row.gbps_write.to_string(),
            row.iops.to_string(),
            row.p50_ns.to_string(),
            row.p99_ns.to_string(),
            row.turnarounds.to_string(),
            row.improvement_vs_baseline_pct
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, SweepError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(ResultRow {
            experiment: r[0].to_string(),
            policy: r[1].to_string(),
            read_ratio: r[2].parse().unwrap_or(0.0),
            threads: r[3].parse().unwrap_or(0),
            block_size: r[4].parse().unwrap_or(0),
            pattern: r[5].to_string(),
            node: r[6].parse().unwrap_or(0),
            replica: r[7].to_string(),
            gbps_total: r[8].parse().unwrap_or(0.0),
            gbps_read: r[9].parse().unwrap_or(0.0),
            gbps_write: r[10].parse().unwrap_or(0.0),
            iops: r[11].parse().unwrap_or(0.0),
            p50_ns: r[12].parse().unwrap_or(0.0),
            p99_ns: r[13].parse().unwrap_or(0.0),
            turnarounds: r[14].parse().unwrap_or(0),
            improvement_vs_baseline_pct: if r[15].is_empty() {
                None
            } else {
                r[15].parse().ok()
            },
        });
    }
    Ok(rows)
}
