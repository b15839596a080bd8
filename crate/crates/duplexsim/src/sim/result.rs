//! Simulation outputs.

use serde::{Deserialize, Serialize};

use crate::cax::CaxTree;
use crate::policy::MetricSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub node_id: usize,
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub read_gbps: f64,
    pub write_gbps: f64,
    pub turnarounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task_id: u64,
    pub workload: String,
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub completed_requests: u64,
    /// read / (read + write); 1.0 by convention with no traffic.
    pub observed_read_ratio: f64,
    pub vruntime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
}

/// One scheduling decision, for the line-delimited decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t_ns: f64,
    pub task_id: u64,
    pub cpu: usize,
    pub slice_ns: f64,
    pub deadline: f64,
    pub policy: String,
    pub reason: String,
}

impl DecisionRecord {
    /// `t_ns,task_id,cpu,slice_ns,deadline,policy,reason`
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t_ns, self.task_id, self.cpu, self.slice_ns, self.deadline, self.policy, self.reason
        )
    }
}

/// Everything a run produces. Serializable for byte-exact determinism
/// comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub horizon_ns: u64,
    /// Time of the last processed event (>= horizon unless the workload
    /// finished early).
    pub elapsed_ns: f64,
    pub nodes: Vec<NodeStats>,
    pub tasks: Vec<TaskStats>,
    pub latency: LatencyStats,
    pub samples: Vec<MetricSample>,
    pub decisions: Vec<DecisionRecord>,
    pub cax: CaxTree,
    pub total_read_bytes: u64,
    pub total_write_bytes: u64,
}

impl SimResult {
    pub fn total_bytes(&self) -> u64 {
        self.total_read_bytes + self.total_write_bytes
    }

    pub fn total_gbps(&self) -> f64 {
        self.total_bytes() as f64 / self.elapsed_ns
    }

    pub fn read_gbps(&self) -> f64 {
        self.total_read_bytes as f64 / self.elapsed_ns
    }

    pub fn write_gbps(&self) -> f64 {
        self.total_write_bytes as f64 / self.elapsed_ns
    }

    /// Completed requests per second.
    pub fn iops(&self) -> f64 {
        self.latency.count as f64 / (self.elapsed_ns * 1e-9)
    }
}

/// Nearest-rank percentile of a sorted sample set.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let data: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&data, 50.0), 50.0);
        assert_eq!(percentile(&data, 99.0), 99.0);
        assert_eq!(percentile(&data, 100.0), 100.0);
        assert_eq!(percentile(&[42.0], 50.0), 42.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn decision_line_format() {
        let d = DecisionRecord {
            t_ns: 1000.5,
            task_id: 3,
            cpu: 2,
            slice_ns: 1000000.0,
            deadline: 2000000.0,
            policy: "timeseries".into(),
            reason: "place".into(),
        };
        assert_eq!(d.to_line(), "1000.5,3,2,1000000,2000000,timeseries,place");
    }
}
