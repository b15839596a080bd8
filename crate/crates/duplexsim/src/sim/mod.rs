//! The discrete-event simulation core.
//!
//! A run binds synthetic workloads to simulated CPUs grouped into clusters,
//! routes their memory requests onto per-(cluster, node) channel links, and
//! delegates every scheduling decision to a pluggable policy. Time is
//! virtual nanoseconds; identical configuration and seed produce
//! bit-identical results.
//!
//! Scheduling model: a task occupies its CPU while it has requests in
//! flight (a memory-stalled thread still burns its core). Time slices
//! preempt tasks back into their run queue, which is when bandwidth deltas
//! are attributed to analysis contexts and virtual runtime is charged, and
//! also the point where a policy may migrate the task. Each task keeps up
//! to `inflight_window` requests outstanding to model memory-level
//! parallelism.

pub mod event;
pub mod result;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cax::{CaxId, CaxTree};
use crate::channel::{ChannelConfig, ChannelError, ChannelState, Direction, DuplexMode};
use crate::policy::{
    self, ClusterView, CpuView, Decision, Feedback, HintTree, MetricSample, PolicyError,
    PolicyHandle, PolicyParams, SchedRequest, SchedulerState, TaskView,
};
use crate::seed;
use crate::workload::{next_request, ThreadCursor, TokenBucket, WorkloadError, WorkloadSpec};
use event::{Event, EventQueue};
pub use result::{DecisionRecord, LatencyStats, NodeStats, SimResult, TaskStats};

/// One memory node: a channel plus capacity, optionally hosting CPUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub node_id: usize,
    pub channel: ChannelConfig,
    pub capacity_bytes: u64,
    pub has_cpus: bool,
}

/// Simulator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cpus: usize,
    pub cpus_per_cluster: usize,
    pub nodes: Vec<NodeConfig>,
    /// Relative latency multipliers between nodes; diagonal 1.0.
    pub distance_matrix: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub horizon_ns: u64,
    pub sample_period_ns: u64,
    /// Outstanding requests per task.
    #[serde(default = "default_window")]
    pub inflight_window: usize,
    /// CPU time consumed between consecutive issues of one task.
    #[serde(default)]
    pub think_time_ns: f64,
    /// Fixed cost charged to a task when it is dispatched after a switch.
    #[serde(default)]
    pub context_switch_penalty_ns: f64,
    #[serde(default)]
    pub policy_params: PolicyParams,
    #[serde(default)]
    pub hint_tree: HintTree,
    /// Adjust the sample period with measured volatility instead of keeping
    /// it fixed.
    #[serde(default)]
    pub adaptive_sampling: bool,
    /// Wrap each task's lifetime in a function-level analysis scope.
    #[serde(default)]
    pub wrap_tasks_in_scope: bool,
}

fn default_window() -> usize {
    16
}

impl SimConfig {
    /// Minimal single-node configuration around one channel.
    pub fn single_node(channel: ChannelConfig, cpus: usize, cpus_per_cluster: usize) -> Self {
        SimConfig {
            cpus,
            cpus_per_cluster,
            nodes: vec![NodeConfig {
                node_id: 0,
                channel,
                capacity_bytes: 1 << 39,
                has_cpus: true,
            }],
            distance_matrix: vec![vec![1.0]],
            master_seed: 42,
            horizon_ns: 50_000_000,
            sample_period_ns: 1_000_000,
            inflight_window: default_window(),
            think_time_ns: 0.0,
            context_switch_penalty_ns: 0.0,
            policy_params: PolicyParams::default(),
            hint_tree: HintTree::default(),
            adaptive_sampling: false,
            wrap_tasks_in_scope: false,
        }
    }

    /// Four-node topology: two DDR5 nodes with CPUs plus two memory-only
    /// CXL expander nodes, with the measured relative access distances
    /// (cross-socket +20%, CPU-to-CXL +40%, inter-CXL +60%).
    pub fn numa_four_node(cpus: usize, cpus_per_cluster: usize) -> Self {
        let ddr = crate::channel::presets::ddr5();
        SimConfig {
            cpus,
            cpus_per_cluster,
            nodes: vec![
                NodeConfig {
                    node_id: 0,
                    channel: ddr.clone(),
                    capacity_bytes: 64 << 30,
                    has_cpus: true,
                },
                NodeConfig {
                    node_id: 1,
                    channel: ddr,
                    capacity_bytes: 64 << 30,
                    has_cpus: true,
                },
                NodeConfig {
                    node_id: 2,
                    channel: crate::channel::presets::cxl_256(),
                    capacity_bytes: 256 << 30,
                    has_cpus: false,
                },
                NodeConfig {
                    node_id: 3,
                    channel: crate::channel::presets::cxl_512(),
                    capacity_bytes: 512 << 30,
                    has_cpus: false,
                },
            ],
            distance_matrix: vec![
                vec![1.0, 1.2, 1.4, 1.4],
                vec![1.2, 1.0, 1.4, 1.4],
                vec![1.4, 1.4, 1.0, 1.6],
                vec![1.4, 1.4, 1.6, 1.0],
            ],
            master_seed: 42,
            horizon_ns: 50_000_000,
            sample_period_ns: 1_000_000,
            inflight_window: default_window(),
            think_time_ns: 0.0,
            context_switch_penalty_ns: 0.0,
            policy_params: PolicyParams::default(),
            hint_tree: HintTree::default(),
            adaptive_sampling: false,
            wrap_tasks_in_scope: false,
        }
    }

    pub fn clusters(&self) -> usize {
        self.cpus.div_ceil(self.cpus_per_cluster)
    }

    pub fn cluster_of_cpu(&self, cpu: usize) -> usize {
        cpu / self.cpus_per_cluster
    }

    /// Home node of a cluster: CPU-bearing nodes split the clusters evenly
    /// in order.
    pub fn cluster_home_node(&self, cluster: usize) -> usize {
        let cpu_nodes: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.has_cpus)
            .map(|n| n.node_id)
            .collect();
        let clusters = self.clusters();
        cpu_nodes[cluster * cpu_nodes.len() / clusters]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.cpus == 0 || self.cpus_per_cluster == 0 {
            return Err(SimError::Config("cpus and cpus_per_cluster must be >= 1".into()));
        }
        if self.nodes.is_empty() {
            return Err(SimError::Config("at least one node required".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.node_id != i {
                return Err(SimError::Config(format!(
                    "node ids must be sequential: position {i} has id {}",
                    node.node_id
                )));
            }
            node.channel.validate()?;
        }
        if !self.nodes.iter().any(|n| n.has_cpus) {
            return Err(SimError::Config("at least one node must host CPUs".into()));
        }
        let n = self.nodes.len();
        if self.distance_matrix.len() != n
            || self.distance_matrix.iter().any(|row| row.len() != n)
        {
            return Err(SimError::Config(format!("distance matrix must be {n}x{n}")));
        }
        for (i, row) in self.distance_matrix.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if i == j && d != 1.0 {
                    return Err(SimError::Config("distance matrix diagonal must be 1.0".into()));
                }
                if d < 1.0 {
                    return Err(SimError::Config("distance matrix entries must be >= 1.0".into()));
                }
            }
        }
        if self.horizon_ns == 0 || self.sample_period_ns == 0 {
            return Err(SimError::Config("horizon and sample period must be > 0".into()));
        }
        if self.inflight_window == 0 {
            return Err(SimError::Config("inflight_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// A workload plus the hint-tree group its tasks belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadBinding {
    pub spec: WorkloadSpec,
    #[serde(default)]
    pub hint_path: Vec<String>,
}

impl From<WorkloadSpec> for WorkloadBinding {
    fn from(spec: WorkloadSpec) -> Self {
        WorkloadBinding { spec, hint_path: Vec::new() }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskState {
    Runnable,
    Running,
    BlockedOnMemory,
    Done,
}

/// Per-task runtime state.
#[derive(Debug, Clone)]
pub struct TaskControlBlock {
    pub task_id: u64,
    pub workload: usize,
    pub thread_index: u32,
    pub state: TaskState,
    pub vruntime: f64,
    pub deadline: f64,
    pub weight: f64,
    pub assigned_cpu: Option<usize>,
    pub read_bytes: u64,
    pub write_bytes: u64,
    hint: policy::EffectiveHint,
    cursor: ThreadCursor,
    bucket: Option<TokenBucket>,
    in_flight: usize,
    completed_requests: u64,
    stream_done: bool,
    last_dispatch_ns: f64,
    next_issue_ready_ns: f64,
    pending_retry: bool,
    attr_read_mark: u64,
    attr_write_mark: u64,
    thread_ctx: CaxId,
}

impl TaskControlBlock {
    pub fn observed_read_ratio(&self) -> Option<f64> {
        let total = self.read_bytes + self.write_bytes;
        if total == 0 {
            None
        } else {
            Some(self.read_bytes as f64 / total as f64)
        }
    }

    fn on_cpu(&self) -> bool {
        matches!(self.state, TaskState::Running | TaskState::BlockedOnMemory)
    }

    fn alive(&self) -> bool {
        self.state != TaskState::Done
    }
}

struct Cpu {
    cluster: usize,
    current: Option<u64>,
    run_queue: Vec<u64>,
    slice_epoch: u64,
}

struct Link {
    cluster: usize,
    node: usize,
    state: ChannelState,
}

#[derive(Default)]
struct SampleAccum {
    period_start_ns: f64,
    last_change_ns: f64,
    demand_integral: f64,
    busy_integral: f64,
    demand_count: usize,
    busy_count: usize,
    node_read_bytes: Vec<u64>,
    node_write_bytes: Vec<u64>,
    cluster_read_bytes: Vec<u64>,
    cluster_write_bytes: Vec<u64>,
}

impl SampleAccum {
    fn advance(&mut self, now_ns: f64) {
        let dt = now_ns - self.last_change_ns;
        if dt > 0.0 {
            self.demand_integral += dt * self.demand_count as f64;
            self.busy_integral += dt * self.busy_count as f64;
            self.last_change_ns = now_ns;
        }
    }

    fn reset(&mut self, now_ns: f64) {
        self.period_start_ns = now_ns;
        self.last_change_ns = now_ns;
        self.demand_integral = 0.0;
        self.busy_integral = 0.0;
        self.node_read_bytes.iter_mut().for_each(|b| *b = 0);
        self.node_write_bytes.iter_mut().for_each(|b| *b = 0);
        self.cluster_read_bytes.iter_mut().for_each(|b| *b = 0);
        self.cluster_write_bytes.iter_mut().for_each(|b| *b = 0);
    }
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    workloads: &'a [WorkloadBinding],
    policy: &'a mut PolicyHandle,
    now: f64,
    queue: EventQueue,
    tasks: Vec<TaskControlBlock>,
    cpus: Vec<Cpu>,
    links: Vec<Link>,
    cax: CaxTree,
    accum: SampleAccum,
    samples: Vec<MetricSample>,
    decisions: Vec<DecisionRecord>,
    latencies: Vec<f64>,
    next_request_id: u64,
    node_optimal_ratio: Vec<f64>,
    cluster_rates: Vec<(f64, f64)>,
    sampler: crate::cax::SamplerState,
    engine_window: policy::SlidingWindow,
    last_completion_ns: f64,
}

/// Runs one simulation to completion.
///
/// Events are processed in (time, insertion) order until the queue drains:
/// tasks stop issuing at `min(duration, horizon)` and in-flight requests
/// complete, so the run terminates shortly after the horizon. Every
/// scheduling decision is delegated to `policy`.
pub fn run(
    config: &SimConfig,
    workloads: &[WorkloadBinding],
    policy: &mut PolicyHandle,
) -> Result<SimResult, SimError> {
    config.validate()?;
    for binding in workloads {
        binding.spec.validate()?;
        let node = binding.spec.target_node;
        if node >= config.nodes.len() {
            return Err(SimError::Config(format!(
                "workload '{}' targets unknown node {node}",
                binding.spec.name
            )));
        }
        if config.nodes[node].capacity_bytes == 0 {
            return Err(SimError::Config(format!(
                "workload '{}' targets node {node} with zero capacity",
                binding.spec.name
            )));
        }
        config.hint_tree.resolve(&binding.hint_path)?;
    }
    if workloads.is_empty() {
        return Err(SimError::Config("at least one workload required".into()));
    }

    let mut engine = Engine::new(config, workloads, policy)?;
    engine.prime();
    engine.drive();
    Ok(engine.finish())
}

impl<'a> Engine<'a> {
    fn new(
        cfg: &'a SimConfig,
        workloads: &'a [WorkloadBinding],
        policy: &'a mut PolicyHandle,
    ) -> Result<Engine<'a>, SimError> {
        let clusters = cfg.clusters();
        let mut cax = CaxTree::new();
        let mut tasks = Vec::new();
        for (w_idx, binding) in workloads.iter().enumerate() {
            let process = cax.add_process(&binding.spec.name);
            let hint = cfg.hint_tree.resolve(&binding.hint_path)?;
            for thread in 0..binding.spec.num_threads {
                let task_id = tasks.len() as u64;
                let thread_ctx = cax
                    .add_thread(process, &format!("{}/{thread}", binding.spec.name))
                    .expect("thread under process");
                tasks.push(TaskControlBlock {
                    task_id,
                    workload: w_idx,
                    thread_index: thread,
                    state: TaskState::Runnable,
                    vruntime: 0.0,
                    deadline: 0.0,
                    weight: hint.weight,
                    assigned_cpu: None,
                    read_bytes: 0,
                    write_bytes: 0,
                    hint,
                    cursor: ThreadCursor::new(cfg.master_seed, task_id, thread),
                    bucket: binding.spec.per_thread_rate_gbps().map(TokenBucket::new),
                    in_flight: 0,
                    completed_requests: 0,
                    stream_done: false,
                    last_dispatch_ns: 0.0,
                    next_issue_ready_ns: 0.0,
                    pending_retry: false,
                    attr_read_mark: 0,
                    attr_write_mark: 0,
                    thread_ctx,
                });
            }
        }
        let cpus = (0..cfg.cpus)
            .map(|cpu| Cpu {
                cluster: cfg.cluster_of_cpu(cpu),
                current: None,
                run_queue: Vec::new(),
                slice_epoch: 0,
            })
            .collect();
        let links = (0..clusters)
            .flat_map(|cluster| cfg.nodes.iter().map(move |node| (cluster, node.node_id)))
            .map(|(cluster, node)| Link {
                cluster,
                node,
                state: ChannelState::new(seed::derive(
                    cfg.master_seed,
                    0x4c49_4e4b ^ (((cluster as u64) << 32) | node as u64),
                )),
            })
            .collect();
        let node_optimal_ratio = cfg
            .nodes
            .iter()
            .map(|n| n.channel.optimal_read_ratio())
            .collect();
        let mut accum = SampleAccum {
            node_read_bytes: vec![0; cfg.nodes.len()],
            node_write_bytes: vec![0; cfg.nodes.len()],
            cluster_read_bytes: vec![0; clusters],
            cluster_write_bytes: vec![0; clusters],
            ..Default::default()
        };
        accum.reset(0.0);
        Ok(Engine {
            cfg,
            workloads,
            policy,
            now: 0.0,
            queue: EventQueue::new(),
            tasks,
            cpus,
            links,
            cax,
            accum,
            samples: Vec::new(),
            decisions: Vec::new(),
            latencies: Vec::new(),
            next_request_id: 0,
            node_optimal_ratio,
            cluster_rates: vec![(0.0, 0.0); clusters],
            sampler: crate::cax::SamplerState::new(
                cfg.sample_period_ns as f64,
                cfg.sample_period_ns as f64 / 4.0,
                cfg.sample_period_ns as f64 * 8.0,
            ),
            engine_window: policy::SlidingWindow::default(),
            last_completion_ns: 0.0,
        })
    }

    fn link_index(&self, cluster: usize, node: usize) -> usize {
        cluster * self.cfg.nodes.len() + node
    }

    fn prime(&mut self) {
        for task_id in 0..self.tasks.len() as u64 {
            self.queue.push(0.0, Event::TaskArrive { task: task_id });
        }
        self.queue.push(self.cfg.sample_period_ns as f64, Event::SampleTick);
    }

    fn drive(&mut self) {
        let mut last_t = 0.0f64;
        while let Some((t, event)) = self.queue.pop() {
            debug_assert!(t >= last_t, "event clock went backwards: {t} < {last_t}");
            last_t = t;
            self.now = t;
            match event {
                Event::TaskArrive { task } => self.on_task_arrive(task),
                Event::ChannelFree { link, direction } => {
                    let mode = self.cfg.nodes[self.links[link].node].channel.mode;
                    self.links[link].state.finish_service(mode, direction);
                    self.pump_link(link);
                }
                Event::RequestComplete {
                    task,
                    request_id: _,
                    link,
                    direction,
                    size_bytes,
                    issue_time_ns,
                } => self.on_request_complete(task, link, direction, size_bytes, issue_time_ns),
                Event::TimeSliceExpire { cpu, epoch } => self.on_slice_expire(cpu, epoch),
                Event::SampleTick => self.on_sample_tick(),
                Event::IssueRetry { task } => {
                    self.tasks[task as usize].pending_retry = false;
                    if self.tasks[task as usize].on_cpu() {
                        self.issue_requests(task);
                    }
                }
            }
        }
    }

    // -- scheduling ---------------------------------------------------------

    fn mvruntime(&self) -> f64 {
        let min = self
            .tasks
            .iter()
            .filter(|t| t.alive())
            .map(|t| t.vruntime)
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min
        } else {
            0.0
        }
    }

    fn build_views(&self) -> (Vec<CpuView>, Vec<ClusterView>, BTreeMap<u64, TaskView>) {
        let cpu_views: Vec<CpuView> = self
            .cpus
            .iter()
            .enumerate()
            .map(|(cpu, c)| CpuView {
                cpu,
                cluster: c.cluster,
                running: c.current,
                runnable: c.run_queue.clone(),
            })
            .collect();
        let clusters = self.cfg.clusters();
        let mut cluster_views = Vec::with_capacity(clusters);
        for cluster in 0..clusters {
            let mut read_depth = 0;
            let mut write_depth = 0;
            for node in 0..self.cfg.nodes.len() {
                let link = &self.links[self.link_index(cluster, node)];
                read_depth += link.state.queue_depth(Direction::Read);
                write_depth += link.state.queue_depth(Direction::Write);
            }
            cluster_views.push(ClusterView {
                cluster,
                cpus: (0..self.cfg.cpus)
                    .filter(|&c| self.cfg.cluster_of_cpu(c) == cluster)
                    .collect(),
                read_gbps: self.cluster_rates[cluster].0,
                write_gbps: self.cluster_rates[cluster].1,
                read_queue_depth: read_depth,
                write_queue_depth: write_depth,
            });
        }
        let task_views: BTreeMap<u64, TaskView> = self
            .tasks
            .iter()
            .filter(|t| t.alive())
            .map(|t| {
                (
                    t.task_id,
                    TaskView {
                        task_id: t.task_id,
                        weight: t.weight,
                        hint: t.hint,
                        observed_read_ratio: t.observed_read_ratio(),
                        target_node: self.workloads[t.workload].spec.target_node,
                        current_cpu: t.assigned_cpu,
                    },
                )
            })
            .collect();
        (cpu_views, cluster_views, task_views)
    }

    fn decide(&mut self, request: SchedRequest) -> Decision {
        let (cpu_views, cluster_views, task_views) = self.build_views();
        let (p50, p99) = self.latency_quick();
        let state = SchedulerState {
            now_ns: self.now,
            mvruntime: self.mvruntime(),
            cpus: &cpu_views,
            clusters: &cluster_views,
            tasks: &task_views,
            node_optimal_ratio: &self.node_optimal_ratio,
            latency_p50_ns: p50,
            latency_p99_ns: p99,
            request,
        };
        self.policy.schedule(&state)
    }

    fn latency_quick(&self) -> (f64, f64) {
        // Cheap rolling view for the policy: the most recent completions.
        let n = self.latencies.len();
        if n == 0 {
            return (0.0, 0.0);
        }
        let mut sorted: Vec<f64> = self.latencies[n.saturating_sub(256)..].to_vec();
        sorted.sort_by(f64::total_cmp);
        (
            result::percentile(&sorted, 50.0),
            result::percentile(&sorted, 99.0),
        )
    }

    fn on_task_arrive(&mut self, task_id: u64) {
        let weight = self.tasks[task_id as usize].weight;
        self.policy.update(&Feedback::TaskArrived { task_id, weight });
        if self.cfg.wrap_tasks_in_scope {
            let (thread_ctx, label) = {
                let t = &self.tasks[task_id as usize];
                (t.thread_ctx, self.workloads[t.workload].spec.name.clone())
            };
            self.cax
                .enter_scope(thread_ctx, &label, self.now)
                .expect("thread context exists");
        }
        self.accum.advance(self.now);
        self.accum.demand_count += 1;
        self.place_task(task_id, false);
    }

    /// Queues a task on the CPU the policy picks; fresh arrivals and
    /// preempted requeues both land here.
    fn place_task(&mut self, task_id: u64, requeue: bool) {
        let decision = self.decide(SchedRequest::Place { task_id, requeue });
        let (cpu, reason) = match decision {
            Decision::Place { cpu, reason, .. } => (cpu, reason),
            other => panic!("policy returned {other:?} to a placement request"),
        };
        let deadline = {
            let task = &mut self.tasks[task_id as usize];
            task.state = TaskState::Runnable;
            task.assigned_cpu = Some(cpu);
            task.deadline
        };
        self.cpus[cpu].run_queue.push(task_id);
        self.log_decision(task_id, cpu, 0.0, deadline, reason);
        if self.cpus[cpu].current.is_none() {
            self.dispatch(cpu);
        }
    }

    fn dispatch(&mut self, cpu: usize) {
        if self.cpus[cpu].current.is_some() || self.cpus[cpu].run_queue.is_empty() {
            return;
        }
        let decision = self.decide(SchedRequest::PickNext { cpu });
        let (task_id, slice_ns, deadline) = match decision {
            Decision::Dispatch { task_id, slice_ns, deadline } => (task_id, slice_ns, deadline),
            Decision::Idle => return,
            other => panic!("policy returned {other:?} to a pick-next request"),
        };
        let pos = self.cpus[cpu]
            .run_queue
            .iter()
            .position(|&id| id == task_id)
            .expect("policy dispatched a task queued on this cpu");
        self.cpus[cpu].run_queue.remove(pos);
        let penalty = self.cfg.context_switch_penalty_ns;
        {
            let task = &mut self.tasks[task_id as usize];
            task.state = TaskState::Running;
            task.assigned_cpu = Some(cpu);
            task.deadline = deadline;
            task.last_dispatch_ns = self.now;
            task.next_issue_ready_ns = task.next_issue_ready_ns.max(self.now + penalty);
        }
        self.cpus[cpu].current = Some(task_id);
        self.cpus[cpu].slice_epoch += 1;
        let epoch = self.cpus[cpu].slice_epoch;
        self.queue
            .push(self.now + slice_ns, Event::TimeSliceExpire { cpu, epoch });
        self.accum.advance(self.now);
        self.accum.busy_count += 1;
        self.log_decision(task_id, cpu, slice_ns, deadline, "dispatch");
        self.issue_requests(task_id);
        let queue_len: usize = self.cpus.iter().map(|c| c.run_queue.len()).sum();
        self.policy.update(&Feedback::Completion { queue_len });
    }

    /// Snapshots the departing task's byte counters, attributes the delta to
    /// its analysis contexts, charges virtual runtime, and releases the CPU.
    fn context_switch(&mut self, cpu: usize, prev: u64) {
        let exec_ns = self.now - self.tasks[prev as usize].last_dispatch_ns;
        let mvruntime = self.mvruntime();
        let weight = self.tasks[prev as usize].weight;
        {
            let task = &mut self.tasks[prev as usize];
            if let Ok(v) = policy::update_vruntime(task.vruntime, mvruntime, exec_ns, weight) {
                task.vruntime = v;
            }
        }
        self.flush_task_attribution(prev);
        self.policy.update(&Feedback::TaskRan {
            task_id: prev,
            exec_ns,
            mvruntime,
            weight,
        });
        self.cpus[cpu].current = None;
        self.accum.advance(self.now);
        self.accum.busy_count -= 1;
    }

    fn on_slice_expire(&mut self, cpu: usize, epoch: u64) {
        if self.cpus[cpu].slice_epoch != epoch {
            return;
        }
        let Some(task_id) = self.cpus[cpu].current else { return };
        self.context_switch(cpu, task_id);
        self.tasks[task_id as usize].state = TaskState::Runnable;
        // Re-placement is the migration opportunity; hysteresis in the
        // policy keeps this cheap for stationary workloads.
        self.place_task(task_id, true);
        self.dispatch(cpu);
    }

    // -- request lifecycle --------------------------------------------------

    fn issue_requests(&mut self, task_id: u64) {
        let idx = task_id as usize;
        let n_nodes = self.cfg.nodes.len();
        let window = self.cfg.inflight_window;
        let think = self.cfg.think_time_ns;
        loop {
            let stream_deadline = {
                let spec = &self.workloads[self.tasks[idx].workload].spec;
                (spec.duration_ns.min(self.cfg.horizon_ns)) as f64
            };
            if self.now >= stream_deadline {
                self.tasks[idx].stream_done = true;
            }
            if self.tasks[idx].stream_done
                || !self.tasks[idx].on_cpu()
                || self.tasks[idx].in_flight >= window
            {
                break;
            }
            let ready = self.tasks[idx].next_issue_ready_ns;
            if self.now < ready {
                self.schedule_retry(task_id, ready);
                break;
            }
            let request_id = self.next_request_id;
            let workloads = self.workloads;
            let spec = &workloads[self.tasks[idx].workload].spec;
            let block = spec.block_size_bytes;
            let maybe_request = {
                let task = &mut self.tasks[idx];
                next_request(spec, &mut task.cursor, task.bucket.as_mut(), self.now, request_id, task_id)
            };
            let request = match maybe_request {
                Some(r) => r,
                None => {
                    let at = self.tasks[idx]
                        .bucket
                        .as_ref()
                        .map(|b| b.ready_time_ns(block, self.now))
                        .unwrap_or(self.now);
                    self.schedule_retry(task_id, at);
                    break;
                }
            };
            self.next_request_id += 1;
            self.tasks[idx].in_flight += 1;
            if think > 0.0 {
                self.tasks[idx].next_issue_ready_ns = self.now + think;
            }
            let cpu = self.tasks[idx].assigned_cpu.expect("issuing task is on a cpu");
            let cluster = self.cpus[cpu].cluster;
            let link = cluster * n_nodes + request.node_id;
            self.links[link].state.enqueue(request);
            self.pump_link(link);
        }
        if self.tasks[idx].state == TaskState::Running && self.tasks[idx].in_flight >= window {
            self.tasks[idx].state = TaskState::BlockedOnMemory;
        }
        if self.tasks[idx].stream_done && self.tasks[idx].in_flight == 0 {
            self.finish_task(task_id);
        }
    }

    fn schedule_retry(&mut self, task_id: u64, at_ns: f64) {
        let idx = task_id as usize;
        if self.tasks[idx].pending_retry {
            return;
        }
        self.tasks[idx].pending_retry = true;
        // Strictly-future retries guarantee progress even when rounding
        // makes the computed ready time collapse onto the current instant.
        let at = at_ns.max(self.now + 1e-3);
        self.queue.push(at, Event::IssueRetry { task: task_id });
    }

    fn pump_link(&mut self, link_idx: usize) {
        let node = self.links[link_idx].node;
        let cfg = &self.cfg.nodes[node].channel;
        match cfg.mode {
            DuplexMode::HalfDuplex => {
                if let Some(commit) = self.links[link_idx].state.try_commit(cfg, self.now, None) {
                    self.schedule_commit(link_idx, commit);
                }
            }
            DuplexMode::FullDuplex => {
                for dir in [Direction::Read, Direction::Write] {
                    if let Some(commit) =
                        self.links[link_idx].state.try_commit(cfg, self.now, Some(dir))
                    {
                        self.schedule_commit(link_idx, commit);
                    }
                }
            }
        }
    }

    fn schedule_commit(&mut self, link_idx: usize, commit: crate::channel::ServiceCommit) {
        let cluster = self.links[link_idx].cluster;
        let node = self.links[link_idx].node;
        let home = self.cfg.cluster_home_node(cluster);
        let distance = self.cfg.distance_matrix[home][node];
        self.queue.push(
            commit.transfer_end_ns,
            Event::ChannelFree { link: link_idx, direction: commit.direction },
        );
        self.queue.push(
            commit.transfer_end_ns + distance * commit.base_latency_ns,
            Event::RequestComplete {
                task: commit.task_id,
                request_id: commit.request_id,
                link: link_idx,
                direction: commit.direction,
                size_bytes: commit.size_bytes,
                issue_time_ns: commit.issue_time_ns,
            },
        );
    }

    fn on_request_complete(
        &mut self,
        task_id: u64,
        link_idx: usize,
        direction: Direction,
        size_bytes: u64,
        issue_time_ns: f64,
    ) {
        self.latencies.push(self.now - issue_time_ns);
        self.last_completion_ns = self.now;
        let cluster = self.links[link_idx].cluster;
        let node = self.links[link_idx].node;
        match direction {
            Direction::Read => {
                self.accum.node_read_bytes[node] += size_bytes;
                self.accum.cluster_read_bytes[cluster] += size_bytes;
            }
            Direction::Write => {
                self.accum.node_write_bytes[node] += size_bytes;
                self.accum.cluster_write_bytes[cluster] += size_bytes;
            }
        }
        let state_after = {
            let task = &mut self.tasks[task_id as usize];
            task.in_flight -= 1;
            task.completed_requests += 1;
            match direction {
                Direction::Read => task.read_bytes += size_bytes,
                Direction::Write => task.write_bytes += size_bytes,
            }
            if task.state == TaskState::BlockedOnMemory {
                task.state = TaskState::Running;
            }
            task.state
        };
        match state_after {
            TaskState::Running => self.issue_requests(task_id),
            TaskState::Runnable => {
                let t = &self.tasks[task_id as usize];
                if t.stream_done && t.in_flight == 0 {
                    self.finish_task(task_id);
                }
            }
            TaskState::BlockedOnMemory | TaskState::Done => {
                unreachable!("completion for a task in state {state_after:?}")
            }
        }
    }

    fn finish_task(&mut self, task_id: u64) {
        let idx = task_id as usize;
        if self.tasks[idx].state == TaskState::Done {
            return;
        }
        if self.tasks[idx].on_cpu() {
            let cpu = self.tasks[idx].assigned_cpu.expect("running task has a cpu");
            self.context_switch(cpu, task_id);
            self.tasks[idx].state = TaskState::Done;
            self.accum.advance(self.now);
            self.accum.demand_count -= 1;
            self.finalize_task_scope(task_id);
            self.policy.update(&Feedback::TaskDone { task_id });
            self.dispatch(cpu);
        } else {
            if let Some(cpu) = self.tasks[idx].assigned_cpu {
                self.cpus[cpu].run_queue.retain(|&id| id != task_id);
            }
            self.flush_task_attribution(task_id);
            self.tasks[idx].state = TaskState::Done;
            self.accum.advance(self.now);
            self.accum.demand_count -= 1;
            self.finalize_task_scope(task_id);
            self.policy.update(&Feedback::TaskDone { task_id });
        }
    }

    fn finalize_task_scope(&mut self, task_id: u64) {
        if self.cfg.wrap_tasks_in_scope {
            let thread_ctx = self.tasks[task_id as usize].thread_ctx;
            self.flush_task_attribution(task_id);
            self.cax.exit_scope(thread_ctx, self.now).expect("balanced scope");
        }
    }

    // -- observability ------------------------------------------------------

    /// Attributes the task's byte delta since the last flush to its current
    /// analysis context. Zero deltas are suppressed.
    fn flush_task_attribution(&mut self, task_id: u64) {
        let (dr, dw, target) = {
            let task = &mut self.tasks[task_id as usize];
            let dr = task.read_bytes - task.attr_read_mark;
            let dw = task.write_bytes - task.attr_write_mark;
            if dr == 0 && dw == 0 {
                return;
            }
            task.attr_read_mark = task.read_bytes;
            task.attr_write_mark = task.write_bytes;
            (dr, dw, self.cax.attribution_target(task.thread_ctx))
        };
        self.cax
            .attribute(target, dr, dw, self.now)
            .expect("attribution target exists");
    }

    fn on_sample_tick(&mut self) {
        self.accum.advance(self.now);
        let period = self.now - self.accum.period_start_ns;
        if period <= 0.0 {
            return;
        }
        let cpus = self.cfg.cpus as f64;
        let read_bytes: u64 = self.accum.node_read_bytes.iter().sum();
        let write_bytes: u64 = self.accum.node_write_bytes.iter().sum();
        let cluster_ratio: Vec<f64> = self
            .accum
            .cluster_read_bytes
            .iter()
            .zip(&self.accum.cluster_write_bytes)
            .map(|(&r, &w)| if r + w == 0 { 1.0 } else { r as f64 / (r + w) as f64 })
            .collect();
        for (cluster, rates) in self.cluster_rates.iter_mut().enumerate() {
            *rates = (
                self.accum.cluster_read_bytes[cluster] as f64 / period,
                self.accum.cluster_write_bytes[cluster] as f64 / period,
            );
        }
        let sample = MetricSample {
            t_ns: self.now,
            running_threads: self.accum.demand_integral / period,
            cpu_utilization: (self.accum.busy_integral / (period * cpus)).min(1.0),
            read_gbps: read_bytes as f64 / period,
            write_gbps: write_bytes as f64 / period,
            cluster_read_ratio: cluster_ratio,
        };
        for task_id in 0..self.tasks.len() as u64 {
            if self.tasks[task_id as usize].alive() {
                self.flush_task_attribution(task_id);
            }
        }
        let _ = self.engine_window.update(sample.clone());
        self.samples.push(sample.clone());
        self.policy.update(&Feedback::Sample(sample));
        let queue_len: usize = self.cpus.iter().map(|c| c.run_queue.len()).sum();
        self.policy.update(&Feedback::Completion { queue_len });
        self.accum.reset(self.now);
        let next_period = if self.cfg.adaptive_sampling {
            let vol = self.engine_window.trends(0.05).bandwidth_volatility();
            crate::cax::adapt_period(&mut self.sampler, vol)
        } else {
            self.cfg.sample_period_ns as f64
        };
        if self.tasks.iter().any(|t| t.alive()) {
            self.queue.push(self.now + next_period, Event::SampleTick);
        }
    }

    fn log_decision(
        &mut self,
        task_id: u64,
        cpu: usize,
        slice_ns: f64,
        deadline: f64,
        reason: &str,
    ) {
        let policy = self.policy.name().to_string();
        self.decisions.push(DecisionRecord {
            t_ns: self.now,
            task_id,
            cpu,
            slice_ns,
            deadline,
            policy,
            reason: reason.to_string(),
        });
    }

    // -- teardown -----------------------------------------------------------

    fn finish(mut self) -> SimResult {
        for task_id in 0..self.tasks.len() as u64 {
            self.flush_task_attribution(task_id);
        }
        let mut nodes: Vec<NodeStats> = self
            .cfg
            .nodes
            .iter()
            .map(|n| NodeStats {
                node_id: n.node_id,
                read_bytes: 0,
                write_bytes: 0,
                read_gbps: 0.0,
                write_gbps: 0.0,
                turnarounds: 0,
            })
            .collect();
        for link in &self.links {
            let n = &mut nodes[link.node];
            n.read_bytes += link.state.cumulative_read_bytes;
            n.write_bytes += link.state.cumulative_write_bytes;
            n.turnarounds += link.state.turnaround_count;
        }
        // Throughput window: the horizon plus whatever in-flight tail
        // drained past it. Stale slice or sample events beyond the last
        // completion do not stretch the window.
        let elapsed = self.last_completion_ns.max(self.cfg.horizon_ns as f64);
        for n in &mut nodes {
            n.read_gbps = n.read_bytes as f64 / elapsed;
            n.write_gbps = n.write_bytes as f64 / elapsed;
        }
        let task_stats: Vec<TaskStats> = self
            .tasks
            .iter()
            .map(|t| TaskStats {
                task_id: t.task_id,
                workload: self.workloads[t.workload].spec.name.clone(),
                read_bytes: t.read_bytes,
                write_bytes: t.write_bytes,
                completed_requests: t.completed_requests,
                observed_read_ratio: t.observed_read_ratio().unwrap_or(1.0),
                vruntime: t.vruntime,
            })
            .collect();
        let total_read: u64 = task_stats.iter().map(|t| t.read_bytes).sum();
        let total_write: u64 = task_stats.iter().map(|t| t.write_bytes).sum();
        debug_assert_eq!(
            total_read + total_write,
            nodes.iter().map(|n| n.read_bytes + n.write_bytes).sum::<u64>(),
            "task and channel byte totals must agree"
        );
        let mut sorted = self.latencies.clone();
        sorted.sort_by(f64::total_cmp);
        let latency = LatencyStats {
            count: sorted.len() as u64,
            mean_ns: if sorted.is_empty() {
                0.0
            } else {
                sorted.iter().sum::<f64>() / sorted.len() as f64
            },
            p50_ns: result::percentile(&sorted, 50.0),
            p99_ns: result::percentile(&sorted, 99.0),
        };
        SimResult {
            horizon_ns: self.cfg.horizon_ns,
            elapsed_ns: elapsed,
            nodes,
            tasks: task_stats,
            latency,
            samples: self.samples,
            decisions: self.decisions,
            cax: self.cax,
            total_read_bytes: total_read,
            total_write_bytes: total_write,
        }
    }
}
