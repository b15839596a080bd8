//! Built-in experiment configurations.
//!
//! These reproduce the channel characterization curves and scheduling
//! comparisons at desk scale without hand-written config files:
//! `duplexsim sweep --builtin <name>`.

use duplexsim::channel::{calibrate, ChannelConfig, ChannelError, DuplexMode};

use crate::config::{
    ExperimentConfig, ExperimentSection, NodeSection, Population, SimSection, SweepSection,
    WorkloadSection,
};

pub const NAMES: &[&str] = &[
    "duplex-peak",
    "ddr-flatness",
    "asymmetry",
    "thread-scaling-ddr-like",
    "thread-scaling-cxl-like",
    "scheduling-benefit",
    "unidirectional",
    "oversubscription",
];

/// Measured anchors for the 512 GB CXL-class expander: pure-write floor,
/// balanced-mix peak, pure-read ceiling.
pub fn cxl_512_targets() -> Vec<(f64, f64)> {
    vec![(0.0, 35.9), (0.55, 57.8), (1.0, 48.0)]
}

/// Measured anchors for the 256 GB CXL-class expander.
pub fn cxl_256_targets() -> Vec<(f64, f64)> {
    vec![(0.0, 22.2), (0.5, 34.4), (1.0, 23.87)]
}

/// Measured band for the DDR5-class channel: unidirectional ceiling with a
/// balanced-mix floor.
pub fn ddr5_targets() -> Vec<(f64, f64)> {
    vec![(0.0, 189.0), (0.5, 153.0), (1.0, 189.0)]
}

pub fn calibrated_cxl_512() -> Result<ChannelConfig, ChannelError> {
    Ok(calibrate(&cxl_512_targets(), DuplexMode::FullDuplex)?.config)
}

pub fn calibrated_ddr5() -> Result<ChannelConfig, ChannelError> {
    Ok(calibrate(&ddr5_targets(), DuplexMode::HalfDuplex)?.config)
}

fn base(name: &str, policies: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        schema: crate::config::SCHEMA_VERSION,
        experiment: ExperimentSection {
            name: name.to_string(),
            replicas: 3,
            seed: 42,
            policies: policies.iter().map(|s| s.to_string()).collect(),
            population: Population::Bernoulli,
            log_decisions: false,
        },
        sim: SimSection {
            cpus: 4,
            cpus_per_cluster: 4,
            horizon_ns: 10_000_000,
            sample_period_ns: 1_000_000,
            inflight_window: 16,
            think_time_ns: 0.0,
            context_switch_penalty_ns: 0.0,
            distance_matrix: None,
            adaptive_sampling: false,
            wrap_tasks_in_scope: false,
            base_slice_ns: 1_000_000.0,
        },
        nodes: vec![NodeSection {
            channel: Some("cxl-512".into()),
            channel_config: None,
            channel_file: None,
            capacity_bytes: 1 << 39,
            has_cpus: true,
        }],
        workload: WorkloadSection {
            preset: None,
            read_ratio: None,
            block_size_bytes: Some(65536),
            pattern: Some(duplexsim::channel::AccessPattern::Random),
            working_set_bytes: Some(1 << 30),
            rate_limit_gbps: None,
            target_node: None,
            duration_ns: None,
            split_pools: None,
            hint_path: None,
        },
        sweep: SweepSection {
            read_ratios: vec![0.5],
            thread_counts: vec![8],
            block_sizes: vec![],
        },
        hints: Default::default(),
    }
}

fn ratio_axis(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step * 100.0).round() / 100.0).collect()
}

/// Ratio sweep over a node calibrated to the 512 GB expander anchors;
/// the duplex peak and pure-write improvement emerge from the sweep.
pub fn duplex_peak() -> Result<ExperimentConfig, ChannelError> {
    let mut cfg = base("duplex-peak", &["baseline"]);
    cfg.nodes[0] = NodeSection {
        channel: None,
        channel_config: Some(calibrated_cxl_512()?),
        channel_file: None,
        capacity_bytes: 1 << 39,
        has_cpus: true,
    };
    cfg.sweep.read_ratios = ratio_axis(0.05);
    Ok(cfg)
}

/// Ratio sweep over the calibrated DDR5-class half-duplex channel.
pub fn ddr_flatness() -> Result<ExperimentConfig, ChannelError> {
    let mut cfg = base("ddr-flatness", &["baseline"]);
    cfg.nodes[0] = NodeSection {
        channel: None,
        channel_config: Some(calibrated_ddr5()?),
        channel_file: None,
        capacity_bytes: 1 << 39,
        has_cpus: true,
    };
    cfg.sim.horizon_ns = 5_000_000;
    cfg.sweep.read_ratios = ratio_axis(0.05);
    Ok(cfg)
}

/// Pure-direction endpoints on one preset, for write/read asymmetry checks.
pub fn asymmetry(preset: &str) -> ExperimentConfig {
    let mut cfg = base(&format!("asymmetry-{preset}"), &["baseline"]);
    cfg.nodes[0].channel = Some(preset.into());
    cfg.sim.horizon_ns = 5_000_000;
    cfg.sweep.read_ratios = vec![0.0, 1.0];
    cfg
}

/// Thread scaling on an equal-capacity channel pair differing only in
/// unloaded latency; window depth 1 makes latency the limiting factor.
pub fn thread_scaling(preset: &str) -> ExperimentConfig {
    let mut cfg = base(&format!("thread-scaling-{preset}"), &["baseline"]);
    cfg.nodes[0].channel = Some(preset.into());
    cfg.sim.cpus = 8;
    cfg.sim.cpus_per_cluster = 8;
    cfg.sim.horizon_ns = 1_000_000;
    cfg.sim.inflight_window = 1;
    cfg.workload.block_size_bytes = Some(4096);
    cfg.sweep.read_ratios = vec![1.0];
    cfg.sweep.thread_counts = (1..=8).collect();
    cfg
}

/// Split reader/writer population on the CXL-class preset across five
/// clusters, compared across all four policies at balanced mixes.
pub fn scheduling_benefit() -> ExperimentConfig {
    let mut cfg = base(
        "scheduling-benefit",
        &["baseline", "colocate", "timeseries", "segregate"],
    );
    cfg.experiment.population = Population::Split;
    cfg.experiment.replicas = 2;
    cfg.sim.cpus = 20;
    cfg.sim.cpus_per_cluster = 4;
    cfg.sim.horizon_ns = 5_000_000;
    cfg.sweep.read_ratios = vec![0.4, 0.45, 0.5, 0.55, 0.6];
    cfg.sweep.thread_counts = vec![20];
    cfg
}

/// Pure-read and pure-write sweeps comparing the predictive policy against
/// the baseline; placement cannot help here, so parity is the bar.
pub fn unidirectional() -> ExperimentConfig {
    let mut cfg = base("unidirectional", &["baseline", "timeseries"]);
    cfg.sim.cpus = 8;
    cfg.sim.cpus_per_cluster = 4;
    cfg.sim.horizon_ns = 5_000_000;
    cfg.experiment.replicas = 2;
    cfg.sweep.read_ratios = vec![0.0, 1.0];
    cfg.sweep.thread_counts = vec![8];
    cfg
}

/// Three runnable tasks per CPU: exercises oversubscription detection and
/// adaptive slicing under load.
pub fn oversubscription() -> ExperimentConfig {
    let mut cfg = base("oversubscription", &["baseline", "timeseries"]);
    cfg.sim.cpus = 2;
    cfg.sim.cpus_per_cluster = 2;
    cfg.sim.horizon_ns = 10_000_000;
    cfg.experiment.replicas = 1;
    cfg.experiment.log_decisions = true;
    cfg.sweep.read_ratios = vec![0.5];
    cfg.sweep.thread_counts = vec![6];
    cfg
}

pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    match name {
        "duplex-peak" => duplex_peak().ok(),
        "ddr-flatness" => ddr_flatness().ok(),
        "asymmetry" => Some(asymmetry("cxl-512")),
        "thread-scaling-ddr-like" => Some(thread_scaling("ddr-like-latency")),
        "thread-scaling-cxl-like" => Some(thread_scaling("cxl-like-latency")),
        "scheduling-benefit" => Some(scheduling_benefit()),
        "unidirectional" => Some(unidirectional()),
        "oversubscription" => Some(oversubscription()),
        _ => None,
    }
}
