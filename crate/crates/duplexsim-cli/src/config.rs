//! Experiment configuration file handling.
//!
//! The config format is TOML with a versioned `schema` field. See the
//! repository README for the full reference. A minimal sweep:
//!
//! ```toml
//! schema = 1
//!
//! [experiment]
//! name = "duplex-peak"
//! replicas = 3
//! seed = 42
//! policies = ["baseline", "timeseries"]
//!
//! [sim]
//! cpus = 8
//! cpus_per_cluster = 4
//! horizon_ns = 10_000_000
//!
//! [[node]]
//! channel = "cxl-512"
//! has_cpus = true
//!
//! [workload]
//! block_size_bytes = 65536
//! pattern = "random"
//!
//! [sweep]
//! read_ratios = [0.0, 0.5, 1.0]
//! thread_counts = [8]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use duplexsim::channel::{presets as channel_presets, AccessPattern, ChannelConfig};
use duplexsim::policy::{DuplexScheduling, HintFields, HintGroup, HintTree, PolicyParams};
use duplexsim::sim::{NodeConfig, SimConfig, WorkloadBinding};
use duplexsim::workload::{presets as workload_presets, WorkloadSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown channel preset '{0}'")]
    UnknownChannelPreset(String),
    #[error("unknown workload preset '{0}'")]
    UnknownWorkloadPreset(String),
}

/// Top-level experiment configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: ExperimentSection,
    pub sim: SimSection,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeSection>,
    pub workload: WorkloadSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub hints: HintGroup,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub name: String,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub policies: Vec<String>,
    /// How a sweep cell's read ratio maps onto tasks: `bernoulli` mixes
    /// directions per request inside every task; `split` builds separate
    /// pure-reader and pure-writer populations with direction hints.
    #[serde(default)]
    pub population: Population,
    /// Emit the scheduling decision log alongside the results.
    #[serde(default)]
    pub log_decisions: bool,
}

fn default_replicas() -> u32 {
    3
}
fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    #[default]
    Bernoulli,
    Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    pub cpus: usize,
    pub cpus_per_cluster: usize,
    pub horizon_ns: u64,
    #[serde(default = "default_sample_period")]
    pub sample_period_ns: u64,
    #[serde(default = "default_window")]
    pub inflight_window: usize,
    #[serde(default)]
    pub think_time_ns: f64,
    #[serde(default)]
    pub context_switch_penalty_ns: f64,
    #[serde(default)]
    pub distance_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub adaptive_sampling: bool,
    #[serde(default)]
    pub wrap_tasks_in_scope: bool,
    #[serde(default = "default_base_slice")]
    pub base_slice_ns: f64,
}

fn default_sample_period() -> u64 {
    1_000_000
}
fn default_window() -> usize {
    16
}
fn default_base_slice() -> f64 {
    1_000_000.0
}

/// One memory node: a named channel preset, an inline channel table, or a
/// channel file written by `duplexsim calibrate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSection {
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub channel_config: Option<ChannelConfig>,
    #[serde(default)]
    pub channel_file: Option<std::path::PathBuf>,
    #[serde(default = "default_node_capacity")]
    pub capacity_bytes: u64,
    #[serde(default)]
    pub has_cpus: bool,
}

fn default_node_capacity() -> u64 {
    1 << 39
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadSection {
    /// Start from a named workload preset, then apply any overrides below.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub read_ratio: Option<f64>,
    #[serde(default)]
    pub block_size_bytes: Option<u64>,
    #[serde(default)]
    pub pattern: Option<AccessPattern>,
    #[serde(default)]
    pub working_set_bytes: Option<u64>,
    #[serde(default)]
    pub rate_limit_gbps: Option<f64>,
    #[serde(default)]
    pub target_node: Option<usize>,
    #[serde(default)]
    pub duration_ns: Option<u64>,
    #[serde(default)]
    pub split_pools: Option<bool>,
    /// Slash-separated hint group path, e.g. "llm/attention".
    #[serde(default)]
    pub hint_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub read_ratios: Vec<f64>,
    pub thread_counts: Vec<u32>,
    #[serde(default)]
    pub block_sizes: Vec<u64>,
}

/// A fully resolved sweep cell: the simulator inputs for one
/// (ratio, threads, block size) point under one policy.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub read_ratio: f64,
    pub threads: u32,
    pub block_size: u64,
    pub sim: SimConfig,
    pub workloads: Vec<WorkloadBinding>,
    pub pattern: AccessPattern,
    pub target_node: usize,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema));
        }
        if self.experiment.replicas == 0 {
            return Err(ConfigError::Invalid("replicas must be >= 1".into()));
        }
        if self.experiment.policies.is_empty() {
            return Err(ConfigError::Invalid("at least one policy required".into()));
        }
        for name in &self.experiment.policies {
            if !duplexsim::policy::POLICY_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown policy '{name}'")));
            }
        }
        if self.sweep.read_ratios.is_empty() || self.sweep.thread_counts.is_empty() {
            return Err(ConfigError::Invalid("sweep axes must be non-empty".into()));
        }
        if self.nodes.is_empty() {
            return Err(ConfigError::Invalid("at least one node required".into()));
        }
        for node in &self.nodes {
            self.resolve_channel(node)?;
        }
        self.base_workload()?;
        Ok(())
    }

    fn resolve_channel(&self, node: &NodeSection) -> Result<ChannelConfig, ConfigError> {
        let sources = usize::from(node.channel.is_some())
            + usize::from(node.channel_config.is_some())
            + usize::from(node.channel_file.is_some());
        if sources != 1 {
            return Err(ConfigError::Invalid(
                "node needs exactly one of: channel preset name, inline channel_config, channel_file".into(),
            ));
        }
        if let Some(name) = &node.channel {
            return channel_presets::by_name(name)
                .ok_or_else(|| ConfigError::UnknownChannelPreset(name.clone()));
        }
        if let Some(cfg) = &node.channel_config {
            return Ok(cfg.clone());
        }
        let path = node.channel_file.as_ref().expect("one source");
        let text = std::fs::read_to_string(path)?;
        let cfg: ChannelConfig = toml::from_str(&text)?;
        Ok(cfg)
    }

    /// The base workload before sweep axes are applied.
    pub fn base_workload(&self) -> Result<WorkloadSpec, ConfigError> {
        let mut spec = match &self.workload.preset {
            Some(name) => workload_presets::by_name(name)
                .ok_or_else(|| ConfigError::UnknownWorkloadPreset(name.clone()))?,
            None => WorkloadSpec {
                name: self.experiment.name.clone(),
                num_threads: 1,
                read_ratio: 0.5,
                block_size_bytes: 65536,
                pattern: AccessPattern::Random,
                working_set_bytes: 1 << 30,
                rate_limit_gbps: None,
                target_node: 0,
                duration_ns: self.sim.horizon_ns,
                split_pools: false,
            },
        };
        spec.name = self.experiment.name.clone();
        if let Some(r) = self.workload.read_ratio {
            spec.read_ratio = r;
        }
        if let Some(b) = self.workload.block_size_bytes {
            spec.block_size_bytes = b;
        }
        if let Some(p) = self.workload.pattern {
            spec.pattern = p;
        }
        if let Some(w) = self.workload.working_set_bytes {
            spec.working_set_bytes = w;
        }
        if self.workload.rate_limit_gbps.is_some() {
            spec.rate_limit_gbps = self.workload.rate_limit_gbps;
        }
        if let Some(n) = self.workload.target_node {
            spec.target_node = n;
        }
        spec.duration_ns = self.workload.duration_ns.unwrap_or(self.sim.horizon_ns);
        if let Some(s) = self.workload.split_pools {
            spec.split_pools = s;
        }
        Ok(spec)
    }

    fn hint_tree(&self) -> HintTree {
        let mut root = self.hints.clone();
        // Split populations rely on generated direction groups.
        if self.experiment.population == Population::Split {
            let group = |ratio: f64| HintGroup {
                fields: HintFields {
                    expected_read_ratio: Some(ratio),
                    duplex_scheduling: Some(DuplexScheduling::On),
                    weight: None,
                },
                groups: BTreeMap::new(),
            };
            root.groups.entry("split-readers".into()).or_insert_with(|| group(1.0));
            root.groups.entry("split-writers".into()).or_insert_with(|| group(0.0));
        }
        HintTree::new(root)
    }

    pub fn sim_config(&self, master_seed: u64) -> Result<SimConfig, ConfigError> {
        let nodes: Vec<NodeConfig> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(node_id, n)| {
                Ok(NodeConfig {
                    node_id,
                    channel: self.resolve_channel(n)?,
                    capacity_bytes: n.capacity_bytes,
                    has_cpus: n.has_cpus,
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        let n = nodes.len();
        // Unit distances unless the config says otherwise.
        let distance_matrix = self
            .sim
            .distance_matrix
            .clone()
            .unwrap_or_else(|| vec![vec![1.0; n]; n]);
        Ok(SimConfig {
            cpus: self.sim.cpus,
            cpus_per_cluster: self.sim.cpus_per_cluster,
            nodes,
            distance_matrix,
            master_seed,
            horizon_ns: self.sim.horizon_ns,
            sample_period_ns: self.sim.sample_period_ns,
            inflight_window: self.sim.inflight_window,
            think_time_ns: self.sim.think_time_ns,
            context_switch_penalty_ns: self.sim.context_switch_penalty_ns,
            policy_params: PolicyParams {
                base_slice_ns: self.sim.base_slice_ns,
                cpus: self.sim.cpus,
                ..PolicyParams::default()
            },
            hint_tree: self.hint_tree(),
            adaptive_sampling: self.sim.adaptive_sampling,
            wrap_tasks_in_scope: self.sim.wrap_tasks_in_scope,
        })
    }

    /// Sweep cells in deterministic order: ratios outermost, then thread
    /// counts, then block sizes.
    pub fn cells(&self, master_seed: u64) -> Result<Vec<CellSpec>, ConfigError> {
        let base = self.base_workload()?;
        let blocks = if self.sweep.block_sizes.is_empty() {
            vec![base.block_size_bytes]
        } else {
            self.sweep.block_sizes.clone()
        };
        let hint_path: Vec<String> = self
            .workload
            .hint_path
            .as_deref()
            .map(|p| p.split('/').map(str::to_string).collect())
            .unwrap_or_default();
        let mut cells = Vec::new();
        for &ratio in &self.sweep.read_ratios {
            for &threads in &self.sweep.thread_counts {
                for &block in &blocks {
                    let sim = self.sim_config(master_seed)?;
                    let workloads = match self.experiment.population {
                        Population::Bernoulli => {
                            let mut spec = base.clone();
                            spec.read_ratio = ratio;
                            spec.num_threads = threads;
                            spec.block_size_bytes = block;
                            spec.name = format!("{}-r{ratio:.2}-t{threads}", base.name);
                            vec![WorkloadBinding { spec, hint_path: hint_path.clone() }]
                        }
                        Population::Split => {
                            let readers = (ratio * threads as f64).round() as u32;
                            let writers = threads - readers.min(threads);
                            let mut out = Vec::new();
                            if readers > 0 {
                                let mut spec = base.clone();
                                spec.read_ratio = 1.0;
                                spec.num_threads = readers;
                                spec.block_size_bytes = block;
                                spec.name = format!("{}-readers", base.name);
                                out.push(WorkloadBinding {
                                    spec,
                                    hint_path: vec!["split-readers".into()],
                                });
                            }
                            if writers > 0 {
                                let mut spec = base.clone();
                                spec.read_ratio = 0.0;
                                spec.num_threads = writers;
                                spec.block_size_bytes = block;
                                spec.name = format!("{}-writers", base.name);
                                out.push(WorkloadBinding {
                                    spec,
                                    hint_path: vec!["split-writers".into()],
                                });
                            }
                            out
                        }
                    };
                    cells.push(CellSpec {
                        read_ratio: ratio,
                        threads,
                        block_size: block,
                        sim,
                        workloads,
                        pattern: base.pattern,
                        target_node: base.target_node,
                    });
                }
            }
        }
        Ok(cells)
    }
}
