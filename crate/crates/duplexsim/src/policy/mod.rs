//! The pluggable scheduling policy engine.
//!
//! Policies implement a three-method interface: `init()` for parameter
//! configuration, `schedule(state)` for decisions against a consistent view
//! of the system, and `update(feedback)` for learning from samples and past
//! decisions. State export/import supports runtime policy switching via
//! state migration.
//!
//! Four policies ship built in:
//!
//! - `baseline`: duplex-blind vruntime ordering with round-robin placement.
//! - `colocate`: baseline ordering plus duplex-aware CPU selection that
//!   balances each cluster's aggregate read ratio.
//! - `timeseries`: the predictive scheduler — sliding-window metrics, EWMA
//!   trends, oversubscription detection, adaptive slices and EDF dispatch,
//!   on top of duplex-aware placement.
//! - `segregate`: an intentionally duplex-hostile reference that separates
//!   readers and writers onto disjoint clusters.

pub mod hints;
pub mod metrics;
pub mod sched_math;
pub mod select_cpu;

mod impls;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hints::{DuplexScheduling, EffectiveHint, HintFields, HintGroup, HintTree, resolve_hint};
pub use impls::{BaselinePolicy, ColocatePolicy, PolicyState, SegregatePolicy, TimeseriesPolicy};
pub use metrics::{
    detect_oversubscription, Metric, MetricSample, SlidingWindow, Trend, TrendReport,
};
pub use sched_math::{
    calculate_deadline, calculate_time_slice, generate_scheduling_hint, update_vruntime, SchedHint,
};
pub use select_cpu::{cluster_score, select_cpu, task_ratio_estimate, ClusterLoad, CpuPick};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("metric sample at t={got} is not after the last sample at t={last}")]
    OutOfOrderSample { last: f64, got: f64 },
    #[error("task weight must be positive")]
    NonPositiveWeight,
    #[error("unknown hint group '{0}'")]
    UnknownHintGroup(String),
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
}

/// Tunables shared by the built-in policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub base_slice_ns: f64,
    pub ewma_alpha: f64,
    pub window_capacity: usize,
    /// Relative dead band for trend classification.
    pub trend_epsilon: f64,
    /// Hysteresis threshold on placement score improvements.
    pub hysteresis_delta: f64,
    /// Oversubscription gates: runnable threads per CPU and the utilization
    /// floor, both window averages.
    pub oversub_threads_per_cpu: f64,
    pub oversub_util_floor: f64,
    /// CPU count of the system the policy schedules; filled in by the
    /// simulator at init.
    pub cpus: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            base_slice_ns: 1_000_000.0, // 1 ms
            ewma_alpha: metrics::DEFAULT_EWMA_ALPHA,
            window_capacity: metrics::DEFAULT_WINDOW_CAPACITY,
            trend_epsilon: 0.05,
            hysteresis_delta: 0.05,
            oversub_threads_per_cpu: 1.5,
            oversub_util_floor: 0.85,
            cpus: 0,
        }
    }
}

/// Immutable per-task view handed to policies.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskView {
    pub task_id: u64,
    pub weight: f64,
    pub hint: EffectiveHint,
    /// read_bytes / (read_bytes + write_bytes) once the task has traffic.
    pub observed_read_ratio: Option<f64>,
    pub target_node: usize,
    pub current_cpu: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuView {
    pub cpu: usize,
    pub cluster: usize,
    pub running: Option<u64>,
    /// Task ids queued runnable on this CPU.
    pub runnable: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterView {
    pub cluster: usize,
    pub cpus: Vec<usize>,
    /// Measured rates over the last sample period.
    pub read_gbps: f64,
    pub write_gbps: f64,
    /// Pending requests on this cluster's channel links, by direction.
    pub read_queue_depth: usize,
    pub write_queue_depth: usize,
}

/// What the scheduler is being asked to decide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedRequest {
    /// Choose a CPU for a task entering the runnable pool. `requeue` marks a
    /// preempted task being reconsidered rather than a fresh arrival.
    Place { task_id: u64, requeue: bool },
    /// Choose the next task to run on a CPU that just went idle.
    PickNext { cpu: usize },
}

/// Consistent snapshot of scheduler-visible state for one decision.
#[derive(Debug, Clone)]
pub struct SchedulerState<'a> {
    pub now_ns: f64,
    /// Minimum vruntime across runnable tasks (0 when none).
    pub mvruntime: f64,
    pub cpus: &'a [CpuView],
    pub clusters: &'a [ClusterView],
    pub tasks: &'a BTreeMap<u64, TaskView>,
    /// Per-node target read ratio (the channel's analytic optimum).
    pub node_optimal_ratio: &'a [f64],
    pub latency_p50_ns: f64,
    pub latency_p99_ns: f64,
    pub request: SchedRequest,
}

/// A policy's answer to a scheduling request.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Place {
        task_id: u64,
        cpu: usize,
        reason: &'static str,
    },
    Dispatch {
        task_id: u64,
        slice_ns: f64,
        deadline: f64,
    },
    Idle,
}

/// Events fed back into policies between scheduling decisions.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    /// Periodic system metrics.
    Sample(MetricSample),
    /// A task arrived and will request placement.
    TaskArrived { task_id: u64, weight: f64 },
    /// A task ran for `exec_ns` and left the CPU (preempted, blocked or
    /// finished). `mvruntime` is the runnable minimum at that instant.
    TaskRan {
        task_id: u64,
        exec_ns: f64,
        mvruntime: f64,
        weight: f64,
    },
    TaskDone { task_id: u64 },
    /// Dispatch-round completion notification with the remaining length of
    /// the runnable queue.
    Completion { queue_len: usize },
}

/// The pluggable policy interface.
pub trait Policy {
    fn name(&self) -> &'static str;
    fn init(&mut self, params: PolicyParams);
    fn schedule(&mut self, state: &SchedulerState) -> Decision;
    fn update(&mut self, feedback: &Feedback);
    fn export_state(&self) -> PolicyState;
    fn import_state(&mut self, state: PolicyState);
}

/// Owning handle around a boxed policy, constructible by name.
pub struct PolicyHandle {
    inner: Box<dyn Policy>,
}

pub const POLICY_NAMES: &[&str] = &["baseline", "colocate", "timeseries", "segregate"];

impl PolicyHandle {
    pub fn by_name(name: &str, params: PolicyParams) -> Result<PolicyHandle, PolicyError> {
        let mut inner: Box<dyn Policy> = match name {
            "baseline" => Box::new(BaselinePolicy::default()),
            "colocate" => Box::new(ColocatePolicy::default()),
            "timeseries" => Box::new(TimeseriesPolicy::default()),
            "segregate" => Box::new(SegregatePolicy::default()),
            other => return Err(PolicyError::UnknownPolicy(other.to_string())),
        };
        inner.init(params);
        Ok(PolicyHandle { inner })
    }

    pub fn name(&self) -> &'static str {
        self.inner.name()
    }

    pub fn schedule(&mut self, state: &SchedulerState) -> Decision {
        self.inner.schedule(state)
    }

    pub fn update(&mut self, feedback: &Feedback) {
        self.inner.update(feedback)
    }

    pub fn export_state(&self) -> PolicyState {
        self.inner.export_state()
    }

    pub fn import_state(&mut self, state: PolicyState) {
        self.inner.import_state(state)
    }
}

impl std::fmt::Debug for PolicyHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolicyHandle").field("name", &self.name()).finish()
    }
}
