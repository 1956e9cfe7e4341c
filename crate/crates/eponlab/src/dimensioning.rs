//! EPON system parameters and the static IPACT dimensioning formulas.
//!
//! An EPON upstream channel is time-shared by `N` ONUs. The OLT polls them in
//! a fixed cyclic order; each ONU `i` may transmit at most `W_MAX[i]` bytes
//! per visit and consecutive slots are separated by a guard interval `G`.
//! With every window full, one polling round takes
//!
//! ```text
//! t_max = Σ_i (G + 8·W_MAX[i] / R_U)
//! ```
//!
//! seconds, which bounds the cycle from above and pins the bandwidth each ONU
//! is guaranteed regardless of what the others offer:
//!
//! ```text
//! lambda_min[i] = 8·W_MAX[i] / t_max
//! ```

use crate::error::{Error, Result};

/// Static parameters of one EPON upstream channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// Number of ONUs sharing the upstream channel.
    pub n_onus: usize,
    /// Upstream line rate in bits per second.
    pub line_rate: f64,
    /// Guard interval between consecutive slots, in seconds.
    pub guard: f64,
    /// Fixed Ethernet frame size in bytes.
    pub frame_length: u32,
    /// Per-ONU maximum transmission window in bytes.
    pub w_max: Vec<u64>,
}

impl SystemConfig {
    /// Builds a config, validating every field.
    pub fn new(
        n_onus: usize,
        line_rate: f64,
        guard: f64,
        frame_length: u32,
        w_max: Vec<u64>,
    ) -> Result<Self> {
        if n_onus < 1 {
            return Err(Error::InvalidConfig("n_onus must be at least 1".into()));
        }
        if !(line_rate > 0.0) || !line_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "line_rate must be positive and finite, got {line_rate}"
            )));
        }
        if !(guard >= 0.0) || !guard.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "guard must be non-negative and finite, got {guard}"
            )));
        }
        if frame_length == 0 {
            return Err(Error::InvalidConfig("frame_length must be positive".into()));
        }
        if w_max.len() != n_onus {
            return Err(Error::InvalidConfig(format!(
                "w_max has {} entries for {} ONUs",
                w_max.len(),
                n_onus
            )));
        }
        if let Some((i, &w)) = w_max
            .iter()
            .enumerate()
            .find(|(_, &w)| w < u64::from(frame_length))
        {
            return Err(Error::InvalidConfig(format!(
                "w_max[{i}] = {w} bytes cannot hold one {frame_length}-byte frame"
            )));
        }
        Ok(Self {
            n_onus,
            line_rate,
            guard,
            frame_length,
            w_max,
        })
    }

    /// Builds a config where every ONU has the same window size.
    pub fn homogeneous(
        n_onus: usize,
        line_rate: f64,
        guard: f64,
        frame_length: u32,
        w_max: u64,
    ) -> Result<Self> {
        Self::new(n_onus, line_rate, guard, frame_length, vec![w_max; n_onus])
    }

    /// Transmission time of one frame in seconds.
    pub fn frame_time(&self) -> f64 {
        8.0 * f64::from(self.frame_length) / self.line_rate
    }
}

/// Derived dimensioning quantities for a [`SystemConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct DimensioningReport {
    /// Maximum polling cycle time in seconds.
    pub t_max: f64,
    /// Per-ONU guaranteed bandwidth in bits per second.
    pub lambda_min: Vec<f64>,
    /// Per-ONU batch size in whole frames.
    pub batch_size: Vec<u32>,
}

impl DimensioningReport {
    /// Computes the full report from a config.
    pub fn from_config(config: &SystemConfig) -> Result<Self> {
        let t_max = compute_max_cycle(config);
        let lambda_min = compute_guaranteed_bandwidth(config, t_max)?;
        let batch_size = (0..config.n_onus).map(|i| batch_size(config, i)).collect();
        Ok(Self {
            t_max,
            lambda_min,
            batch_size,
        })
    }
}

/// Maximum polling cycle time in seconds: every window full, one guard per slot.
pub fn compute_max_cycle(config: &SystemConfig) -> f64 {
    config
        .w_max
        .iter()
        .map(|&w| config.guard + 8.0 * w as f64 / config.line_rate)
        .sum()
}

/// Per-ONU guaranteed bandwidth in bits per second over a cycle of `t_max`.
pub fn compute_guaranteed_bandwidth(config: &SystemConfig, t_max: f64) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive and finite, got {t_max}"
        )));
    }
    Ok(config
        .w_max
        .iter()
        .map(|&w| 8.0 * w as f64 / t_max)
        .collect())
}

/// Largest homogeneous window (bytes) whose full cycle stays within the target.
///
/// Inverts the cycle formula for identical per-ONU SLAs and rounds down to a
/// whole byte so the resulting cycle never exceeds the target.
pub fn solve_wmax_for_cycle(
    n_onus: usize,
    line_rate: f64,
    guard: f64,
    target_t_max: f64,
) -> Result<u64> {
    if n_onus < 1 {
        return Err(Error::InvalidArgument("n_onus must be at least 1".into()));
    }
    if !(line_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "line_rate must be positive, got {line_rate}"
        )));
    }
    let guard_total = n_onus as f64 * guard;
    if !(target_t_max > guard_total) {
        return Err(Error::InfeasibleCycle {
            target_s: target_t_max,
            n_onus,
            guard_s: guard,
        });
    }
    let bytes = (target_t_max / n_onus as f64 - guard) * line_rate / 8.0;
    Ok(bytes.floor() as u64)
}

/// Whole frames that fit in ONU `onu_index`'s window.
pub fn batch_size(config: &SystemConfig, onu_index: usize) -> u32 {
    assert!(
        onu_index < config.n_onus,
        "onu_index {onu_index} out of range for {} ONUs",
        config.n_onus
    );
    let k = config.w_max[onu_index] / u64::from(config.frame_length);
    u32::try_from(k).expect("batch size exceeds u32")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn siv_config() -> SystemConfig {
        SystemConfig::homogeneous(16, 1e9, 5e-6, 1500, 15000).unwrap()
    }

    #[test]
    fn max_cycle_reference_scenario() {
        assert_relative_eq!(compute_max_cycle(&siv_config()), 2.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn max_cycle_single_onu_one_second() {
        let config = SystemConfig::homogeneous(1, 8.0 * 1500.0, 0.0, 1500, 1500).unwrap();
        assert_relative_eq!(compute_max_cycle(&config), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn max_cycle_three_heterogeneous_onus() {
        let config = SystemConfig::new(3, 1e8, 1e-5, 1500, vec![1500, 3000, 4500]).unwrap();
        assert_relative_eq!(compute_max_cycle(&config), 7.5e-4, max_relative = 1e-12);
    }

    #[test]
    fn guaranteed_bandwidth_reference_scenario() {
        let config = siv_config();
        let t_max = compute_max_cycle(&config);
        let bw = compute_guaranteed_bandwidth(&config, t_max).unwrap();
        for b in bw {
            assert_relative_eq!(b, 60e6, max_relative = 1e-12);
        }
    }

    #[test]
    fn guaranteed_bandwidth_zero_guard_splits_evenly() {
        let config = SystemConfig::homogeneous(16, 1e9, 0.0, 1500, 15000).unwrap();
        let t_max = compute_max_cycle(&config);
        let bw = compute_guaranteed_bandwidth(&config, t_max).unwrap();
        for b in bw {
            assert_relative_eq!(b, 62.5e6, max_relative = 1e-12);
        }
    }

    #[test]
    fn guaranteed_bandwidth_scales_with_window() {
        let config = SystemConfig::new(2, 1e9, 0.0, 1500, vec![15000, 30000]).unwrap();
        let t_max = compute_max_cycle(&config);
        let bw = compute_guaranteed_bandwidth(&config, t_max).unwrap();
        assert_relative_eq!(bw[1] / bw[0], 2.0, max_relative = 1e-12);
        assert!(bw.iter().sum::<f64>() <= config.line_rate * (1.0 + 1e-12));
    }

    #[test]
    fn guaranteed_bandwidth_rejects_nonpositive_cycle() {
        let config = siv_config();
        assert!(matches!(
            compute_guaranteed_bandwidth(&config, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            compute_guaranteed_bandwidth(&config, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn wmax_solution_reference_scenario() {
        assert_eq!(solve_wmax_for_cycle(16, 1e9, 5e-6, 2e-3).unwrap(), 15000);
    }

    #[test]
    fn wmax_solution_without_guard() {
        assert_eq!(solve_wmax_for_cycle(4, 1e9, 0.0, 1e-3).unwrap(), 31250);
    }

    #[test]
    fn wmax_infeasible_when_guards_fill_cycle() {
        let err = solve_wmax_for_cycle(4, 1e9, 2.5e-4, 1e-3).unwrap_err();
        assert!(matches!(err, Error::InfeasibleCycle { .. }));
    }

    #[test]
    fn batch_size_examples() {
        let config = siv_config();
        assert_eq!(batch_size(&config, 0), 10);
        let single = SystemConfig::homogeneous(1, 1e9, 0.0, 1500, 1500).unwrap();
        assert_eq!(batch_size(&single, 0), 1);
        let partial = SystemConfig::homogeneous(1, 1e9, 0.0, 1500, 15001).unwrap();
        assert_eq!(batch_size(&partial, 0), 10);
    }

    #[test]
    fn dimensioning_report_is_self_consistent() {
        let config = siv_config();
        let report = DimensioningReport::from_config(&config).unwrap();
        assert_relative_eq!(report.t_max, compute_max_cycle(&config), max_relative = 1e-15);
        assert!(report.lambda_min.iter().sum::<f64>() <= config.line_rate * (1.0 + 1e-12));
        assert_eq!(report.batch_size, vec![10; 16]);
    }

    #[test]
    fn bandwidth_cycle_identity_homogeneous() {
        let config = siv_config();
        let t_max = compute_max_cycle(&config);
        let bw = compute_guaranteed_bandwidth(&config, t_max).unwrap();
        for (b, &w) in bw.iter().zip(&config.w_max) {
            assert_relative_eq!(b * t_max, 8.0 * w as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        assert!(SystemConfig::homogeneous(0, 1e9, 5e-6, 1500, 15000).is_err());
        assert!(SystemConfig::homogeneous(4, 0.0, 5e-6, 1500, 15000).is_err());
        assert!(SystemConfig::homogeneous(4, 1e9, -1e-6, 1500, 15000).is_err());
        assert!(SystemConfig::homogeneous(4, 1e9, 5e-6, 0, 15000).is_err());
        assert!(SystemConfig::homogeneous(4, 1e9, 5e-6, 1500, 1499).is_err());
        assert!(SystemConfig::new(4, 1e9, 5e-6, 1500, vec![15000; 3]).is_err());
    }

    proptest! {
        #[test]
        fn max_cycle_increases_with_window(
            n in 1usize..32,
            rate in 1e6f64..1e10,
            guard in 0.0f64..1e-4,
            w in 1500u64..1_000_000,
            bump in 1u64..100_000,
        ) {
            let base = SystemConfig::homogeneous(n, rate, guard, 1500, w).unwrap();
            let mut grown = base.clone();
            grown.w_max[0] += bump;
            prop_assert!(compute_max_cycle(&grown) > compute_max_cycle(&base));
        }

        #[test]
        fn max_cycle_increases_with_onu_count(
            n in 1usize..32,
            rate in 1e6f64..1e10,
            guard in 1e-9f64..1e-4,
            w in 1500u64..1_000_000,
        ) {
            let base = SystemConfig::homogeneous(n, rate, guard, 1500, w).unwrap();
            let grown = SystemConfig::homogeneous(n + 1, rate, guard, 1500, w).unwrap();
            prop_assert!(compute_max_cycle(&grown) > compute_max_cycle(&base));
        }

        #[test]
        fn max_cycle_invariant_under_joint_scaling(
            n in 1usize..32,
            rate in 1e6f64..1e9,
            guard in 0.0f64..1e-4,
            w in 1500u64..100_000,
            scale in 1u64..64,
        ) {
            let base = SystemConfig::homogeneous(n, rate, guard, 1500, w).unwrap();
            let scaled = SystemConfig::homogeneous(
                n,
                rate * scale as f64,
                guard,
                1500,
                w * scale,
            ).unwrap();
            let a = compute_max_cycle(&base);
            let b = compute_max_cycle(&scaled);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
        }

        #[test]
        fn wmax_round_trip_stays_within_one_frame_time(
            n in 1usize..32,
            rate in 1e7f64..1e10,
            guard in 0.0f64..1e-5,
            target in 1e-4f64..1e-2,
        ) {
            prop_assume!(target > n as f64 * guard + n as f64 * 8.0 * 1500.0 / rate);
            let w = solve_wmax_for_cycle(n, rate, guard, target).unwrap();
            prop_assume!(w >= 1500);
            let config = SystemConfig::homogeneous(n, rate, guard, 1500, w).unwrap();
            let cycle = compute_max_cycle(&config);
            let frame_time = 8.0 * 1500.0 / rate;
            prop_assert!(cycle <= target * (1.0 + 1e-12));
            prop_assert!(target - cycle <= frame_time);
        }
    }
}
