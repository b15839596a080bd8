//! System metric samples, the sliding window consumed by the predictive
//! scheduler, EWMA trend classification and oversubscription detection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PolicyError;

/// One periodic snapshot of system-wide metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub t_ns: f64,
    /// Average number of running threads over the sample period.
    pub running_threads: f64,
    /// Busy fraction of all CPUs over the sample period, in [0, 1].
    pub cpu_utilization: f64,
    pub read_gbps: f64,
    pub write_gbps: f64,
    /// Aggregate read ratio per cluster over the period (1.0 when idle).
    pub cluster_read_ratio: Vec<f64>,
}

/// Metrics tracked by the sliding window, indexable into the per-metric
/// arrays below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    RunningThreads = 0,
    CpuUtilization = 1,
    ReadGbps = 2,
    WriteGbps = 3,
}

pub const METRIC_COUNT: usize = 4;

impl MetricSample {
    fn value(&self, metric: usize) -> f64 {
        match metric {
            0 => self.running_threads,
            1 => self.cpu_utilization,
            2 => self.read_gbps,
            3 => self.write_gbps,
            _ => unreachable!("metric index"),
        }
    }
}

/// Direction of a metric's recent movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Rising,
    Falling,
    Flat,
}

/// Per-metric trend classification plus volatility (coefficient of
/// variation over the raw window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub trend: [Trend; METRIC_COUNT],
    pub volatility: [f64; METRIC_COUNT],
}

impl TrendReport {
    pub fn flat() -> Self {
        TrendReport {
            trend: [Trend::Flat; METRIC_COUNT],
            volatility: [0.0; METRIC_COUNT],
        }
    }

    /// Volatility used for adaptive time slicing: the worse of the two
    /// bandwidth directions.
    pub fn bandwidth_volatility(&self) -> f64 {
        self.volatility[Metric::ReadGbps as usize].max(self.volatility[Metric::WriteGbps as usize])
    }

    pub fn of(&self, metric: Metric) -> Trend {
        self.trend[metric as usize]
    }
}

/// Ring of the most recent samples plus per-metric EWMA state.
///
/// The EWMA update is `ewma <- alpha * x + (1 - alpha) * ewma`, initialized
/// to the first sample. A parallel ring of post-update EWMA values supports
/// half-window lookback for trend classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingWindow {
    capacity: usize,
    alpha: f64,
    samples: VecDeque<MetricSample>,
    ewma: Option<[f64; METRIC_COUNT]>,
    ewma_history: VecDeque<[f64; METRIC_COUNT]>,
    last_t_ns: Option<f64>,
}

pub const DEFAULT_WINDOW_CAPACITY: usize = 32;
pub const DEFAULT_EWMA_ALPHA: f64 = 0.25;

impl Default for SlidingWindow {
    fn default() -> Self {
        SlidingWindow::new(DEFAULT_WINDOW_CAPACITY, DEFAULT_EWMA_ALPHA)
    }
}

impl SlidingWindow {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity >= 1, "window capacity must be >= 1");
        assert!((0.0..=1.0).contains(&alpha) && alpha > 0.0);
        SlidingWindow {
            capacity,
            alpha,
            samples: VecDeque::with_capacity(capacity),
            ewma: None,
            ewma_history: VecDeque::with_capacity(capacity),
            last_t_ns: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &MetricSample> {
        self.samples.iter()
    }

    pub fn ewma(&self, metric: Metric) -> Option<f64> {
        self.ewma.map(|e| e[metric as usize])
    }

    /// Appends a sample, evicting the oldest beyond capacity and updating
    /// the per-metric EWMA state. Out-of-order samples are rejected.
    pub fn update(&mut self, sample: MetricSample) -> Result<(), PolicyError> {
        if let Some(last) = self.last_t_ns {
            if sample.t_ns <= last {
                return Err(PolicyError::OutOfOrderSample { last, got: sample.t_ns });
            }
        }
        self.last_t_ns = Some(sample.t_ns);
        let mut ewma = self.ewma.unwrap_or([
            sample.value(0),
            sample.value(1),
            sample.value(2),
            sample.value(3),
        ]);
        if self.ewma.is_some() {
            for (m, e) in ewma.iter_mut().enumerate() {
                *e = self.alpha * sample.value(m) + (1.0 - self.alpha) * *e;
            }
        }
        self.ewma = Some(ewma);
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
            self.ewma_history.pop_front();
        }
        self.samples.push_back(sample);
        self.ewma_history.push_back(ewma);
        Ok(())
    }

    /// Classifies each metric Rising/Falling/Flat by comparing the current
    /// EWMA against the EWMA from half a window earlier, with a relative
    /// dead band `epsilon`. With fewer than 2 samples everything is Flat
    /// with zero volatility.
    pub fn trends(&self, epsilon: f64) -> TrendReport {
        let n = self.samples.len();
        if n < 2 {
            return TrendReport::flat();
        }
        let lookback = (n / 2).clamp(1, n - 1);
        let current = self.ewma_history[n - 1];
        let past = self.ewma_history[n - 1 - lookback];
        let mut report = TrendReport::flat();
        for m in 0..METRIC_COUNT {
            let base = past[m].abs().max(1e-12);
            let rel = (current[m] - past[m]) / base;
            report.trend[m] = if rel > epsilon {
                Trend::Rising
            } else if rel < -epsilon {
                Trend::Falling
            } else {
                Trend::Flat
            };
            report.volatility[m] = coefficient_of_variation(
                self.samples.iter().map(|s| s.value(m)),
                n,
            );
        }
        report
    }

    /// Window-average of a metric.
    pub fn mean(&self, metric: Metric) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.value(metric as usize)).sum::<f64>()
            / self.samples.len() as f64
    }
}

fn coefficient_of_variation(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let vals: Vec<f64> = values.collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    if mean.abs() < 1e-12 {
        return 0.0;
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt() / mean.abs()
}

/// Oversubscription predicate: the window-average running thread count
/// exceeds `threads_per_cpu` per core while window-average CPU utilization
/// stays above `util_floor`.
pub fn detect_oversubscription(
    window: &SlidingWindow,
    cpus: usize,
    threads_per_cpu: f64,
    util_floor: f64,
) -> bool {
    if window.is_empty() || cpus == 0 {
        return false;
    }
    let avg_threads = window.mean(Metric::RunningThreads);
    let avg_util = window.mean(Metric::CpuUtilization);
    avg_threads / cpus as f64 > threads_per_cpu && avg_util > util_floor
}

#[cfg(test)]
pub(crate) fn sample_at(t_ns: f64, threads: f64, util: f64, read: f64, write: f64) -> MetricSample {
    MetricSample {
        t_ns,
        running_threads: threads,
        cpu_utilization: util,
        read_gbps: read,
        write_gbps: write,
        cluster_read_ratio: vec![],
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// The window never holds more than `capacity` samples and the EWMA
        /// stays within the min/max envelope of everything observed.
        #[test]
        fn window_bounds(values in proptest::collection::vec(0.0f64..1000.0, 1..100)) {
            let mut w = SlidingWindow::new(16, 0.25);
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for (i, v) in values.iter().enumerate() {
                lo = lo.min(*v);
                hi = hi.max(*v);
                w.update(sample_at(i as f64 + 1.0, *v, 0.5, *v, *v)).unwrap();
                prop_assert!(w.len() <= 16);
                let e = w.ewma(Metric::ReadGbps).unwrap();
                prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
            }
        }
    }
}
