//! Virtual-runtime and deadline arithmetic shared by all policies.

use serde::{Deserialize, Serialize};

use super::metrics::{Metric, Trend, TrendReport, METRIC_COUNT};
use super::PolicyError;

/// Scheduling hint produced from oversubscription state and metric trends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedHint {
    pub oversubscribed: bool,
    pub trend: [Trend; METRIC_COUNT],
    /// Slice multiplier, clamped to [0.25, 4.0].
    pub recommended_slice_scale: f64,
}

impl Default for SchedHint {
    fn default() -> Self {
        SchedHint {
            oversubscribed: false,
            trend: [Trend::Flat; METRIC_COUNT],
            recommended_slice_scale: 1.0,
        }
    }
}

pub const SLICE_SCALE_MIN: f64 = 0.25;
pub const SLICE_SCALE_MAX: f64 = 4.0;

/// Advances a task's virtual runtime after it executed for `exec_ns`:
/// `max(vruntime, mvruntime) + exec_ns / weight`. The max-normalization
/// against the runnable minimum keeps long-sleeping tasks from hoarding
/// credit.
pub fn update_vruntime(
    vruntime: f64,
    mvruntime: f64,
    exec_ns: f64,
    weight: f64,
) -> Result<f64, PolicyError> {
    if weight.is_nan() || weight <= 0.0 {
        return Err(PolicyError::NonPositiveWeight);
    }
    debug_assert!(exec_ns >= 0.0);
    Ok(vruntime.max(mvruntime) + exec_ns / weight)
}

/// Virtual deadline: vruntime plus a weight-scaled slice allowance. Tasks
/// dispatch in ascending deadline order (EDF over virtual deadlines).
pub fn calculate_deadline(
    vruntime: f64,
    base_slice_ns: f64,
    slice_scale: f64,
    weight: f64,
) -> f64 {
    vruntime + (base_slice_ns * slice_scale) / weight
}

/// Builds a hint from the detection outputs. Under oversubscription the
/// slice shrinks with bandwidth volatility (`1 / (1 + v)`, floored at 0.25x);
/// otherwise rising bandwidth trends earn a modest extension (0.5x per
/// rising direction, capped at 4x).
pub fn generate_scheduling_hint(oversubscribed: bool, trends: &TrendReport) -> SchedHint {
    let volatility = trends.bandwidth_volatility();
    let scale = if oversubscribed {
        (1.0 / (1.0 + volatility)).clamp(SLICE_SCALE_MIN, 1.0)
    } else {
        let rising = [Metric::ReadGbps, Metric::WriteGbps]
            .iter()
            .filter(|&&m| trends.of(m) == Trend::Rising)
            .count() as f64;
        (1.0 + 0.5 * rising).clamp(1.0, SLICE_SCALE_MAX)
    };
    SchedHint {
        oversubscribed,
        trend: trends.trend,
        recommended_slice_scale: scale,
    }
}

/// Time slice granted to the next dispatch.
pub fn calculate_time_slice(hint: &SchedHint, base_slice_ns: f64) -> f64 {
    base_slice_ns * hint.recommended_slice_scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_with(volatility: f64, trend: Trend) -> TrendReport {
        let mut r = TrendReport::flat();
        r.volatility[Metric::ReadGbps as usize] = volatility;
        r.trend[Metric::ReadGbps as usize] = trend;
        r
    }

    #[test]
    fn vruntime_charges_weighted_exec() {
        // vruntime 0, mvruntime 100, exec 50, weight 1 -> 150.
        assert_eq!(update_vruntime(0.0, 100.0, 50.0, 1.0).unwrap(), 150.0);
        // Zero exec degenerates to the max-normalization.
        assert_eq!(update_vruntime(80.0, 100.0, 0.0, 1.0).unwrap(), 100.0);
        assert_eq!(update_vruntime(120.0, 100.0, 0.0, 1.0).unwrap(), 120.0);
        // weight 2 halves the charge.
        assert_eq!(update_vruntime(0.0, 0.0, 100.0, 2.0).unwrap(), 50.0);
    }

    #[test]
    fn vruntime_rejects_non_positive_weight() {
        assert_eq!(
            update_vruntime(0.0, 0.0, 1.0, 0.0),
            Err(PolicyError::NonPositiveWeight)
        );
        assert_eq!(
            update_vruntime(0.0, 0.0, 1.0, -1.0),
            Err(PolicyError::NonPositiveWeight)
        );
    }

    #[test]
    fn deadline_basic() {
        assert_eq!(calculate_deadline(0.0, 1e6, 1.0, 1.0), 1e6);
        // Halving the scale halves the slack.
        assert_eq!(calculate_deadline(0.0, 1e6, 0.5, 1.0), 0.5e6);
        // Heavier tasks get earlier deadlines.
        assert_eq!(calculate_deadline(0.0, 1e6, 1.0, 2.0), 0.5e6);
    }

    #[test]
    fn slice_base_when_calm() {
        let hint = generate_scheduling_hint(false, &report_with(0.0, Trend::Flat));
        assert_eq!(hint.recommended_slice_scale, 1.0);
        assert_eq!(calculate_time_slice(&hint, 1e6), 1e6);
    }

    #[test]
    fn slice_halves_under_oversubscription_with_unit_volatility() {
        let hint = generate_scheduling_hint(true, &report_with(1.0, Trend::Flat));
        assert_eq!(hint.recommended_slice_scale, 0.5);
        assert_eq!(calculate_time_slice(&hint, 1e6), 0.5e6);
    }

    #[test]
    fn slice_floor_under_extreme_volatility() {
        let hint = generate_scheduling_hint(true, &report_with(1e12, Trend::Flat));
        assert_eq!(hint.recommended_slice_scale, SLICE_SCALE_MIN);
    }

    #[test]
    fn slice_monotone_in_volatility() {
        let mut prev = f64::MAX;
        for v in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let hint = generate_scheduling_hint(true, &report_with(v, Trend::Flat));
            assert!(hint.recommended_slice_scale <= prev);
            assert!(hint.recommended_slice_scale <= 1.0);
            prev = hint.recommended_slice_scale;
        }
    }

    #[test]
    fn slice_extension_stays_clamped() {
        let mut r = TrendReport::flat();
        r.trend[Metric::ReadGbps as usize] = Trend::Rising;
        r.trend[Metric::WriteGbps as usize] = Trend::Rising;
        let hint = generate_scheduling_hint(false, &r);
        assert!(hint.recommended_slice_scale >= 1.0);
        assert!(hint.recommended_slice_scale <= SLICE_SCALE_MAX);
        assert_eq!(hint.recommended_slice_scale, 2.0);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Repeated updates never decrease vruntime.
        #[test]
        fn vruntime_monotone(
            steps in proptest::collection::vec(
                (0.0f64..1e9, 0.0f64..1e6, 0.1f64..16.0),
                1..200,
            )
        ) {
            let mut vr = 0.0;
            for (mvr, exec, weight) in steps {
                let next = update_vruntime(vr, mvr, exec, weight).unwrap();
                prop_assert!(next >= vr);
                vr = next;
            }
        }

        /// The recommended slice scale always lands in [0.25, 4.0].
        #[test]
        fn slice_scale_clamped(vol in 0.0f64..1e6, oversub: bool) {
            let mut r = TrendReport::flat();
            r.volatility[Metric::ReadGbps as usize] = vol;
            let hint = generate_scheduling_hint(oversub, &r);
            prop_assert!(hint.recommended_slice_scale >= SLICE_SCALE_MIN);
            prop_assert!(hint.recommended_slice_scale <= SLICE_SCALE_MAX);
        }
    }
}
