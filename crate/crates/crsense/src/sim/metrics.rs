//! Per-slot metric series and their aggregation across runs.

/// Metric snapshots at a fixed set of sample slots.
#[derive(Debug, Clone, Default)]
pub struct MetricsSeries {
    pub slots: Vec<u64>,
    pub cum_su_throughput: Vec<f64>,
    pub cum_genie_throughput: Vec<f64>,
    /// Cumulative SU throughput over cumulative genie throughput; 0/0 is
    /// defined as 1.
    pub relative_throughput: Vec<f64>,
    /// Cumulative miss rate over occupied-and-sensed events; empty cell
    /// before the first such event.
    pub miss_rate: Vec<Option<f64>>,
    /// Sliding-window miss rate; present only when a window is configured.
    pub miss_rate_windowed: Vec<Option<f64>>,
    /// Cumulative sensor count over the fixed-diversity reference.
    pub sensing_ratio: Vec<f64>,
}

/// Log-spaced slot sample points from 1 to `horizon`, deduplicated,
/// always ending exactly at the horizon.
pub fn log_spaced_slots(horizon: u64, points: usize) -> Vec<u64> {
    assert!(horizon >= 1 && points >= 2);
    let lg = (horizon as f64).log10();
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let exp = lg * i as f64 / (points - 1) as f64;
            (10f64.powf(exp)).round() as u64
        })
        .map(|k| k.clamp(1, horizon))
        .collect();
    out.dedup();
    out
}

/// Cumulative miss-detection rate; undefined until an occupied band has
/// been sensed.
pub fn cumulative_miss_rate(misses: u64, occupied_sensed: u64) -> Option<f64> {
    if occupied_sensed == 0 {
        None
    } else {
        Some(misses as f64 / occupied_sensed as f64)
    }
}

/// Sensors used so far relative to a fixed-diversity reference policy
/// that would spend `d_ref * l_ref` sensors every slot.
pub fn sensing_ratio(sensors_used: u64, slots: u64, d_ref: usize, l_ref: usize) -> f64 {
    sensors_used as f64 / (slots as f64 * (d_ref * l_ref) as f64)
}

/// Relative throughput with the 0/0 convention.
pub fn relative_throughput(cum_su: f64, cum_genie: f64) -> f64 {
    if cum_genie == 0.0 {
        if cum_su == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        cum_su / cum_genie
    }
}

/// Pointwise average over runs. Optional cells average over the runs
/// where they are defined.
pub fn average_series(all: &[MetricsSeries]) -> MetricsSeries {
    assert!(!all.is_empty());
    let slots = all[0].slots.clone();
    for s in all {
        assert_eq!(s.slots, slots, "sample points must agree across runs");
    }
    let n = slots.len();
    let avg = |f: &dyn Fn(&MetricsSeries) -> &Vec<f64>| -> Vec<f64> {
        (0..n)
            .map(|i| all.iter().map(|s| f(s)[i]).sum::<f64>() / all.len() as f64)
            .collect()
    };
    let avg_opt = |f: &dyn Fn(&MetricsSeries) -> &Vec<Option<f64>>| -> Vec<Option<f64>> {
        (0..n)
            .map(|i| {
                let defined: Vec<f64> = all.iter().filter_map(|s| f(s)[i]).collect();
                if defined.is_empty() {
                    None
                } else {
                    Some(defined.iter().sum::<f64>() / defined.len() as f64)
                }
            })
            .collect()
    };
    MetricsSeries {
        slots,
        cum_su_throughput: avg(&|s| &s.cum_su_throughput),
        cum_genie_throughput: avg(&|s| &s.cum_genie_throughput),
        relative_throughput: avg(&|s| &s.relative_throughput),
        miss_rate: avg_opt(&|s| &s.miss_rate),
        miss_rate_windowed: if all[0].miss_rate_windowed.is_empty() {
            Vec::new()
        } else {
            avg_opt(&|s| &s.miss_rate_windowed)
        },
        sensing_ratio: avg(&|s| &s.sensing_ratio),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing_hits_both_ends() {
        let pts = log_spaced_slots(10_000, 200);
        assert_eq!(*pts.first().unwrap(), 1);
        assert_eq!(*pts.last().unwrap(), 10_000);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let pts = log_spaced_slots(5, 200);
        assert_eq!(pts, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn miss_rate_cases() {
        assert_eq!(cumulative_miss_rate(0, 100), Some(0.0));
        assert_eq!(cumulative_miss_rate(60, 60), Some(1.0));
        assert_eq!(cumulative_miss_rate(3, 60), Some(0.05));
        assert_eq!(cumulative_miss_rate(0, 0), None);
    }

    #[test]
    fn sensing_ratio_cases() {
        // Exploration-only at the reference diversity: exactly 1.
        assert_eq!(sensing_ratio(6 * 500, 500, 2, 3), 1.0);
        // One sensor per band on every slot against d_ref = 2.
        assert_eq!(sensing_ratio(3 * 500, 500, 2, 3), 0.5);
        assert_eq!(sensing_ratio(0, 500, 2, 3), 0.0);
    }

    #[test]
    fn relative_throughput_convention() {
        assert_eq!(relative_throughput(0.0, 0.0), 1.0);
        assert_eq!(relative_throughput(5.0, 10.0), 0.5);
    }

    #[test]
    fn averaging_handles_undefined_cells() {
        let a = MetricsSeries {
            slots: vec![1, 2],
            cum_su_throughput: vec![1.0, 2.0],
            cum_genie_throughput: vec![2.0, 4.0],
            relative_throughput: vec![0.5, 0.5],
            miss_rate: vec![None, Some(0.2)],
            miss_rate_windowed: vec![],
            sensing_ratio: vec![1.0, 1.0],
        };
        let b = MetricsSeries {
            miss_rate: vec![None, None],
            ..a.clone()
        };
        let avg = average_series(&[a, b]);
        assert_eq!(avg.miss_rate[0], None);
        assert_eq!(avg.miss_rate[1], Some(0.2));
        assert_eq!(avg.cum_su_throughput, vec![1.0, 2.0]);
    }
}
