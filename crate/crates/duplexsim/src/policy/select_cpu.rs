//! Duplex-aware CPU selection.
//!
//! Placement steers each cluster's aggregate read ratio toward the target
//! balance point of the serving channel: for every cluster the prospective
//! ratio including the incoming task's traffic estimate is scored by its
//! distance to the target, and the best-scoring cluster wins. Joining a
//! reader-saturated cluster is therefore exactly what a write-intensive task
//! does. Hysteresis keeps a task on its incumbent CPU unless the best
//! alternative improves the score by more than a threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hints::{DuplexScheduling, EffectiveHint};
use super::{SchedulerState, TaskView};

/// Estimated traffic a cluster's placed tasks contribute, split by
/// direction. Units are arbitrary task-traffic units; only ratios matter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterLoad {
    pub read_weight: f64,
    pub write_weight: f64,
}

impl ClusterLoad {
    pub fn add(&mut self, read_weight: f64, write_weight: f64) {
        self.read_weight += read_weight;
        self.write_weight += write_weight;
    }

    pub fn remove(&mut self, read_weight: f64, write_weight: f64) {
        self.read_weight = (self.read_weight - read_weight).max(0.0);
        self.write_weight = (self.write_weight - write_weight).max(0.0);
    }
}

/// The read-ratio estimate used for a task's placement. Declared hints win
/// when duplex scheduling is forced on; otherwise observed behavior takes
/// over once the task has produced traffic.
pub fn task_ratio_estimate(hint: &EffectiveHint, observed_read_ratio: Option<f64>) -> f64 {
    match hint.duplex_scheduling {
        DuplexScheduling::On | DuplexScheduling::Off => hint.expected_read_ratio,
        DuplexScheduling::Auto => observed_read_ratio.unwrap_or(hint.expected_read_ratio),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuPick {
    pub cpu: usize,
    pub cluster: usize,
    pub score: f64,
    pub reason: &'static str,
}

/// Balance score of placing `task_units` of traffic at `ratio` into a
/// cluster currently carrying `load`: |rho' - rho*| for the prospective
/// aggregate ratio rho'. Scale-free in the combined traffic estimates.
pub fn cluster_score(
    load: &ClusterLoad,
    task_ratio: f64,
    task_units: f64,
    target_ratio: f64,
    task_already_included: bool,
) -> f64 {
    let (read, write) = if task_already_included {
        (load.read_weight, load.write_weight)
    } else {
        (
            load.read_weight + task_units * task_ratio,
            load.write_weight + task_units * (1.0 - task_ratio),
        )
    };
    let total = read + write;
    let prospective = if total <= 0.0 { task_ratio } else { read / total };
    (prospective - target_ratio).abs()
}

/// Picks a CPU for a task.
///
/// With duplex scheduling off the task just takes the least-loaded CPU.
/// Otherwise clusters with an idle CPU are preferred (falling back to all
/// clusters under full load), the minimal-score cluster wins with ties
/// broken by load then cluster id, and the least-loaded CPU inside the
/// winning cluster is chosen. A task with an incumbent CPU stays put unless
/// the best alternative's score beats the incumbent cluster's score by more
/// than `delta`.
pub fn select_cpu(
    task: &TaskView,
    state: &SchedulerState,
    loads: &BTreeMap<usize, ClusterLoad>,
    task_units: f64,
    delta: f64,
) -> CpuPick {
    if task.hint.duplex_scheduling == DuplexScheduling::Off {
        let (cpu, cluster) = least_loaded_cpu_overall(state);
        return CpuPick { cpu, cluster, score: 0.0, reason: "duplex-off" };
    }
    let ratio = task_ratio_estimate(&task.hint, task.observed_read_ratio);
    let target = state
        .node_optimal_ratio
        .get(task.target_node)
        .copied()
        .unwrap_or(0.5);
    let incumbent_cluster = task
        .current_cpu
        .map(|cpu| state.cpus[cpu].cluster);

    let empty = ClusterLoad::default();
    let score_of = |cluster: usize| -> f64 {
        let load = loads.get(&cluster).unwrap_or(&empty);
        cluster_score(
            load,
            ratio,
            task_units,
            target,
            incumbent_cluster == Some(cluster),
        )
    };

    let any_idle = state.clusters.iter().any(|c| cluster_has_idle(state, c.cluster));
    let mut best: Option<(f64, usize, usize)> = None; // (score, load, cluster)
    for cluster in state.clusters.iter() {
        if any_idle && !cluster_has_idle(state, cluster.cluster) {
            continue;
        }
        let score = score_of(cluster.cluster);
        let load = cluster_task_count(state, cluster.cluster);
        let key = (score, load, cluster.cluster);
        if best.is_none_or(|b| (key.0, key.1, key.2) < b) {
            best = Some(key);
        }
    }
    let (best_score, _, best_cluster) = best.expect("at least one cluster");

    if let (Some(inc_cluster), Some(inc_cpu)) = (incumbent_cluster, task.current_cpu) {
        if inc_cluster == best_cluster {
            return CpuPick { cpu: inc_cpu, cluster: inc_cluster, score: best_score, reason: "stay" };
        }
        let inc_score = score_of(inc_cluster);
        if inc_score - best_score <= delta {
            return CpuPick { cpu: inc_cpu, cluster: inc_cluster, score: inc_score, reason: "stay" };
        }
        let cpu = least_loaded_cpu_in(state, best_cluster);
        return CpuPick { cpu, cluster: best_cluster, score: best_score, reason: "migrate" };
    }

    let cpu = least_loaded_cpu_in(state, best_cluster);
    CpuPick { cpu, cluster: best_cluster, score: best_score, reason: "place" }
}

pub fn cpu_load(state: &SchedulerState, cpu: usize) -> usize {
    let view = &state.cpus[cpu];
    view.runnable.len() + usize::from(view.running.is_some())
}

fn cluster_has_idle(state: &SchedulerState, cluster: usize) -> bool {
    state
        .cpus
        .iter()
        .any(|c| c.cluster == cluster && c.running.is_none() && c.runnable.is_empty())
}

pub fn cluster_task_count(state: &SchedulerState, cluster: usize) -> usize {
    state
        .cpus
        .iter()
        .filter(|c| c.cluster == cluster)
        .map(|c| c.runnable.len() + usize::from(c.running.is_some()))
        .sum()
}

fn least_loaded_cpu_in(state: &SchedulerState, cluster: usize) -> usize {
    state
        .cpus
        .iter()
        .filter(|c| c.cluster == cluster)
        .map(|c| (c.runnable.len() + usize::from(c.running.is_some()), c.cpu))
        .min()
        .map(|(_, cpu)| cpu)
        .expect("cluster has cpus")
}

fn least_loaded_cpu_overall(state: &SchedulerState) -> (usize, usize) {
    let (_, cpu) = state
        .cpus
        .iter()
        .map(|c| (c.runnable.len() + usize::from(c.running.is_some()), c.cpu))
        .min()
        .expect("at least one cpu");
    (cpu, state.cpus[cpu].cluster)
}
