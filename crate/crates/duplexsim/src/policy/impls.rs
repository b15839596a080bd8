//! Built-in scheduling policies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{detect_oversubscription, SlidingWindow};
use super::sched_math::{
    calculate_deadline, calculate_time_slice, generate_scheduling_hint, update_vruntime, SchedHint,
};
use super::select_cpu::{select_cpu, task_ratio_estimate, ClusterLoad};
use super::{
    Decision, Feedback, Policy, PolicyParams, SchedRequest, SchedulerState, TaskView,
};

/// One task's placement contribution to a cluster's traffic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub cluster: usize,
    pub read_weight: f64,
    pub write_weight: f64,
}

/// Serializable policy bookkeeping. All built-in policies share this shape,
/// which makes runtime switching a plain export/import: the incoming policy
/// keeps the sliding window, vruntime map and placement estimates of the
/// outgoing one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub window: SlidingWindow,
    pub vruntime: BTreeMap<u64, f64>,
    pub deadline: BTreeMap<u64, f64>,
    pub weights: BTreeMap<u64, f64>,
    pub cluster_loads: BTreeMap<usize, ClusterLoad>,
    pub placements: BTreeMap<u64, Placement>,
    pub rr_cursor: usize,
    pub queue_len_history: Vec<usize>,
    pub hint: SchedHint,
    pub oversubscribed: bool,
}

impl PolicyState {
    fn with_params(params: &PolicyParams) -> Self {
        PolicyState {
            window: SlidingWindow::new(params.window_capacity, params.ewma_alpha),
            ..Default::default()
        }
    }

    /// Bookkeeping common to every policy: vruntime/deadline accounting,
    /// queue-length feedback history and the metric window.
    fn absorb(&mut self, feedback: &Feedback, params: &PolicyParams) {
        match feedback {
            Feedback::Sample(sample) => {
                // Out-of-order samples are rejected upstream; ignore here.
                let _ = self.window.update(sample.clone());
            }
            Feedback::TaskArrived { task_id, weight } => {
                self.weights.insert(*task_id, *weight);
                self.vruntime.entry(*task_id).or_insert(0.0);
                let vr = self.vruntime[task_id];
                self.deadline.insert(
                    *task_id,
                    calculate_deadline(vr, params.base_slice_ns, self.hint.recommended_slice_scale, *weight),
                );
            }
            Feedback::TaskRan { task_id, exec_ns, mvruntime, weight } => {
                let vr = self.vruntime.get(task_id).copied().unwrap_or(0.0);
                if let Ok(next) = update_vruntime(vr, *mvruntime, *exec_ns, *weight) {
                    self.vruntime.insert(*task_id, next);
                    self.deadline.insert(
                        *task_id,
                        calculate_deadline(
                            next,
                            params.base_slice_ns,
                            self.hint.recommended_slice_scale,
                            *weight,
                        ),
                    );
                }
            }
            Feedback::TaskDone { task_id } => {
                if let Some(p) = self.placements.remove(task_id) {
                    if let Some(load) = self.cluster_loads.get_mut(&p.cluster) {
                        load.remove(p.read_weight, p.write_weight);
                    }
                }
            }
            Feedback::Completion { queue_len } => {
                self.queue_len_history.push(*queue_len);
            }
        }
    }

    fn record_placement(&mut self, task: &TaskView, cluster: usize) {
        if let Some(old) = self.placements.remove(&task.task_id) {
            if let Some(load) = self.cluster_loads.get_mut(&old.cluster) {
                load.remove(old.read_weight, old.write_weight);
            }
        }
        let ratio = task_ratio_estimate(&task.hint, task.observed_read_ratio);
        let placement = Placement {
            cluster,
            read_weight: ratio,
            write_weight: 1.0 - ratio,
        };
        self.cluster_loads
            .entry(cluster)
            .or_default()
            .add(placement.read_weight, placement.write_weight);
        self.placements.insert(task.task_id, placement);
    }

    fn pick_by<F: Fn(&Self, u64) -> f64>(
        &self,
        runnable: &[u64],
        key: F,
    ) -> Option<u64> {
        runnable
            .iter()
            .copied()
            .min_by(|a, b| {
                (key(self, *a), *a)
                    .partial_cmp(&(key(self, *b), *b))
                    .expect("keys are finite")
            })
    }

    fn dispatch(&self, task_id: u64, params: &PolicyParams) -> Decision {
        Decision::Dispatch {
            task_id,
            slice_ns: calculate_time_slice(&self.hint, params.base_slice_ns),
            deadline: self.deadline.get(&task_id).copied().unwrap_or(0.0),
        }
    }
}

fn task_view<'a>(state: &'a SchedulerState, task_id: u64) -> &'a TaskView {
    state.tasks.get(&task_id).expect("scheduler state includes every live task")
}

/// Duplex-blind reference behavior: vruntime-ordered dispatch on
/// round-robin-assigned CPUs, fixed slices.
#[derive(Default)]
pub struct BaselinePolicy {
    params: PolicyParams,
    state: PolicyState,
}

impl Policy for BaselinePolicy {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn init(&mut self, params: PolicyParams) {
        self.params = params;
        self.state = PolicyState::with_params(&params);
    }

    fn schedule(&mut self, state: &SchedulerState) -> Decision {
        match state.request {
            SchedRequest::Place { task_id, requeue } => {
                let task = task_view(state, task_id);
                let cpu = if requeue {
                    task.current_cpu.unwrap_or(0)
                } else {
                    let cpu = self.state.rr_cursor % state.cpus.len();
                    self.state.rr_cursor += 1;
                    cpu
                };
                self.state.record_placement(task, state.cpus[cpu].cluster);
                Decision::Place { task_id, cpu, reason: if requeue { "requeue" } else { "round-robin" } }
            }
            SchedRequest::PickNext { cpu } => {
                match self.state.pick_by(&state.cpus[cpu].runnable, |s, id| {
                    s.vruntime.get(&id).copied().unwrap_or(0.0)
                }) {
                    Some(task_id) => self.state.dispatch(task_id, &self.params),
                    None => Decision::Idle,
                }
            }
        }
    }

    fn update(&mut self, feedback: &Feedback) {
        self.state.absorb(feedback, &self.params);
    }

    fn export_state(&self) -> PolicyState {
        self.state.clone()
    }

    fn import_state(&mut self, state: PolicyState) {
        self.state = state;
    }
}

/// Baseline ordering plus duplex-aware placement.
#[derive(Default)]
pub struct ColocatePolicy {
    params: PolicyParams,
    state: PolicyState,
}

impl Policy for ColocatePolicy {
    fn name(&self) -> &'static str {
        "colocate"
    }

    fn init(&mut self, params: PolicyParams) {
        self.params = params;
        self.state = PolicyState::with_params(&params);
    }

    fn schedule(&mut self, state: &SchedulerState) -> Decision {
        match state.request {
            SchedRequest::Place { task_id, .. } => {
                let task = task_view(state, task_id);
                let pick = select_cpu(
                    task,
                    state,
                    &self.state.cluster_loads,
                    1.0,
                    self.params.hysteresis_delta,
                );
                self.state.record_placement(task, pick.cluster);
                Decision::Place { task_id, cpu: pick.cpu, reason: pick.reason }
            }
            SchedRequest::PickNext { cpu } => {
                match self.state.pick_by(&state.cpus[cpu].runnable, |s, id| {
                    s.vruntime.get(&id).copied().unwrap_or(0.0)
                }) {
                    Some(task_id) => self.state.dispatch(task_id, &self.params),
                    None => Decision::Idle,
                }
            }
        }
    }

    fn update(&mut self, feedback: &Feedback) {
        self.state.absorb(feedback, &self.params);
    }

    fn export_state(&self) -> PolicyState {
        self.state.clone()
    }

    fn import_state(&mut self, state: PolicyState) {
        self.state = state;
    }
}

/// The predictive scheduler: per sample tick the metric window advances,
/// trends are classified, oversubscription is detected and a scheduling
/// hint is regenerated; dispatch is EDF over virtual deadlines with
/// hint-scaled slices, placement is duplex-aware.
#[derive(Default)]
pub struct TimeseriesPolicy {
    params: PolicyParams,
    state: PolicyState,
}

impl Policy for TimeseriesPolicy {
    fn name(&self) -> &'static str {
        "timeseries"
    }

    fn init(&mut self, params: PolicyParams) {
        self.params = params;
        self.state = PolicyState::with_params(&params);
    }

    fn schedule(&mut self, state: &SchedulerState) -> Decision {
        match state.request {
            SchedRequest::Place { task_id, .. } => {
                let task = task_view(state, task_id);
                let pick = select_cpu(
                    task,
                    state,
                    &self.state.cluster_loads,
                    1.0,
                    self.params.hysteresis_delta,
                );
                self.state.record_placement(task, pick.cluster);
                Decision::Place { task_id, cpu: pick.cpu, reason: pick.reason }
            }
            SchedRequest::PickNext { cpu } => {
                match self.state.pick_by(&state.cpus[cpu].runnable, |s, id| {
                    s.deadline.get(&id).copied().unwrap_or(0.0)
                }) {
                    Some(task_id) => self.state.dispatch(task_id, &self.params),
                    None => Decision::Idle,
                }
            }
        }
    }

    fn update(&mut self, feedback: &Feedback) {
        self.state.absorb(feedback, &self.params);
        if let Feedback::Sample(_) = feedback {
            let trends = self.state.window.trends(self.params.trend_epsilon);
            self.state.oversubscribed = detect_oversubscription(
                &self.state.window,
                self.params.cpus,
                self.params.oversub_threads_per_cpu,
                self.params.oversub_util_floor,
            );
            self.state.hint = generate_scheduling_hint(self.state.oversubscribed, &trends);
        }
    }

    fn export_state(&self) -> PolicyState {
        self.state.clone()
    }

    fn import_state(&mut self, state: PolicyState) {
        self.state = state;
    }
}

/// Reference anti-policy: readers and writers are forced onto disjoint
/// cluster halves, defeating duplex balancing. Useful as the segregated
/// placement arm in policy comparisons.
#[derive(Default)]
pub struct SegregatePolicy {
    params: PolicyParams,
    state: PolicyState,
}

impl Policy for SegregatePolicy {
    fn name(&self) -> &'static str {
        "segregate"
    }

    fn init(&mut self, params: PolicyParams) {
        self.params = params;
        self.state = PolicyState::with_params(&params);
    }

    fn schedule(&mut self, state: &SchedulerState) -> Decision {
        match state.request {
            SchedRequest::Place { task_id, requeue } => {
                let task = task_view(state, task_id);
                if requeue {
                    if let Some(cpu) = task.current_cpu {
                        return Decision::Place { task_id, cpu, reason: "requeue" };
                    }
                }
                let ratio = task_ratio_estimate(&task.hint, task.observed_read_ratio);
                let n = state.clusters.len();
                let readers_end = (n / 2).max(1);
                let range = if ratio >= 0.5 { 0..readers_end } else { readers_end.min(n - 1)..n };
                let cpu = state
                    .cpus
                    .iter()
                    .filter(|c| range.contains(&c.cluster))
                    .map(|c| (c.runnable.len() + usize::from(c.running.is_some()), c.cpu))
                    .min()
                    .map(|(_, cpu)| cpu)
                    .unwrap_or(0);
                self.state.record_placement(task, state.cpus[cpu].cluster);
                Decision::Place { task_id, cpu, reason: "segregate" }
            }
            SchedRequest::PickNext { cpu } => {
                match self.state.pick_by(&state.cpus[cpu].runnable, |s, id| {
                    s.vruntime.get(&id).copied().unwrap_or(0.0)
                }) {
                    Some(task_id) => self.state.dispatch(task_id, &self.params),
                    None => Decision::Idle,
                }
            }
        }
    }

    fn update(&mut self, feedback: &Feedback) {
        self.state.absorb(feedback, &self.params);
    }

    fn export_state(&self) -> PolicyState {
        self.state.clone()
    }

    fn import_state(&mut self, state: PolicyState) {
        self.state = state;
    }
}
