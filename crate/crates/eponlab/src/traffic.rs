//! Diffserv traffic classes, offered-load decomposition, and the
//! load-weighted GPS service split.
//!
//! Offered traffic is described by a global load fraction plus a per-class
//! mix `alpha_c`. Each class also carries a priority weight `delta_c`; the
//! product `phi_c = alpha_c * delta_c` is the class's GPS service share, and
//! an ONU's guaranteed bandwidth is split among the nonempty classes in
//! proportion to those shares.

use std::fmt;

use crate::dimensioning::{compute_guaranteed_bandwidth, compute_max_cycle, SystemConfig};
use crate::error::{Error, Result};

/// The three Diffserv priority classes, highest priority first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    Ef,
    Af,
    Be,
}

impl TrafficClass {
    /// All classes in fixed priority order (EF before AF before BE).
    pub const ALL: [TrafficClass; 3] = [TrafficClass::Ef, TrafficClass::Af, TrafficClass::Be];

    /// Position in the priority order; 0 is the highest priority.
    pub fn priority_rank(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            TrafficClass::Ef => "EF",
            TrafficClass::Af => "AF",
            TrafficClass::Be => "BE",
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One value per traffic class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PerClass<T> {
    pub ef: T,
    pub af: T,
    pub be: T,
}

impl<T> PerClass<T> {
    pub fn new(ef: T, af: T, be: T) -> Self {
        Self { ef, af, be }
    }

    pub fn from_fn(mut f: impl FnMut(TrafficClass) -> T) -> Self {
        Self {
            ef: f(TrafficClass::Ef),
            af: f(TrafficClass::Af),
            be: f(TrafficClass::Be),
        }
    }

    pub fn get(&self, class: TrafficClass) -> &T {
        match class {
            TrafficClass::Ef => &self.ef,
            TrafficClass::Af => &self.af,
            TrafficClass::Be => &self.be,
        }
    }

    pub fn get_mut(&mut self, class: TrafficClass) -> &mut T {
        match class {
            TrafficClass::Ef => &mut self.ef,
            TrafficClass::Af => &mut self.af,
            TrafficClass::Be => &mut self.be,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(TrafficClass, &T) -> U) -> PerClass<U> {
        PerClass {
            ef: f(TrafficClass::Ef, &self.ef),
            af: f(TrafficClass::Af, &self.af),
            be: f(TrafficClass::Be, &self.be),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (TrafficClass, &T)> {
        TrafficClass::ALL.iter().map(move |&c| (c, self.get(c)))
    }
}

impl<T: Copy> PerClass<T> {
    pub fn splat(value: T) -> Self {
        Self {
            ef: value,
            af: value,
            be: value,
        }
    }
}

impl PerClass<f64> {
    pub fn sum(&self) -> f64 {
        self.ef + self.af + self.be
    }
}

/// A subset of the three traffic classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassSet(PerClass<bool>);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet(PerClass {
        ef: false,
        af: false,
        be: false,
    });

    pub fn all() -> Self {
        ClassSet(PerClass::splat(true))
    }

    pub fn from_fn(f: impl FnMut(TrafficClass) -> bool) -> Self {
        ClassSet(PerClass::from_fn(f))
    }

    pub fn with(mut self, class: TrafficClass) -> Self {
        *self.0.get_mut(class) = true;
        self
    }

    pub fn contains(&self, class: TrafficClass) -> bool {
        *self.0.get(class)
    }

    pub fn is_empty(&self) -> bool {
        !self.0.ef && !self.0.af && !self.0.be
    }

    pub fn iter(&self) -> impl Iterator<Item = TrafficClass> + '_ {
        TrafficClass::ALL.into_iter().filter(|&c| self.contains(c))
    }
}

/// What the scalar load is a fraction of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Load is a fraction of the upstream line rate.
    ChannelCapacity,
    /// Load is a fraction of the ONU's guaranteed bandwidth.
    GuaranteedBandwidth,
}

/// Offered-traffic description for one ONU.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficProfile {
    /// Fraction of the global load carried by each class; sums to 1.
    pub mix: PerClass<f64>,
    /// Priority weight of each class; sums to 1.
    pub weights: PerClass<f64>,
    /// Offered load in `[0, 1)` of the normalization base.
    pub load: f64,
    pub normalization: Normalization,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl TrafficProfile {
    /// Builds a profile, validating the mix, weights and load.
    ///
    /// Weights must be non-negative and sum to 1; a class with a positive mix
    /// fraction must also carry a positive weight, otherwise its GPS share
    /// would vanish while it still offers traffic.
    pub fn new(
        mix: PerClass<f64>,
        weights: PerClass<f64>,
        load: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        for (class, &a) in mix.iter() {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "mix fraction for {class} must be non-negative, got {a}"
                )));
            }
        }
        if (mix.sum() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "mix fractions must sum to 1, got {}",
                mix.sum()
            )));
        }
        for (class, &d) in weights.iter() {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "weight for {class} must be non-negative, got {d}"
                )));
            }
            if d == 0.0 && *mix.get(class) > 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "class {class} offers traffic but has zero weight"
                )));
            }
        }
        if (weights.sum() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1, got {}",
                weights.sum()
            )));
        }
        if !(0.0..1.0).contains(&load) {
            return Err(Error::InvalidArgument(format!(
                "load must lie in [0, 1), got {load}"
            )));
        }
        Ok(Self {
            mix,
            weights,
            load,
            normalization,
        })
    }

    /// Same profile at a different load.
    pub fn with_load(&self, load: f64) -> Result<Self> {
        Self::new(self.mix, self.weights, load, self.normalization)
    }
}

/// GPS outcome: shares, realized service rates and the set they were split over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpsAllocation {
    /// Class service shares `phi_c`.
    pub shares: PerClass<f64>,
    /// Realized service rates in packets/second; zero outside `nonempty`.
    pub rates: PerClass<f64>,
    /// Bandwidth being split, in packets/second.
    pub base_rate: f64,
    /// The set of nonempty queues the split was computed over.
    pub nonempty: ClassSet,
}

/// Per-class Poisson arrival rates in packets/second for one ONU.
///
/// The total arrival rate is `load * B / (8 * L)` where `B` is the line rate
/// under [`Normalization::ChannelCapacity`] or ONU `onu_index`'s guaranteed
/// bandwidth under [`Normalization::GuaranteedBandwidth`].
pub fn class_arrival_rates(
    profile: &TrafficProfile,
    config: &SystemConfig,
    onu_index: usize,
) -> Result<PerClass<f64>> {
    if onu_index >= config.n_onus {
        return Err(Error::InvalidArgument(format!(
            "onu_index {onu_index} out of range for {} ONUs",
            config.n_onus
        )));
    }
    let base = match profile.normalization {
        Normalization::ChannelCapacity => config.line_rate,
        Normalization::GuaranteedBandwidth => {
            let t_max = compute_max_cycle(config);
            compute_guaranteed_bandwidth(config, t_max)?[onu_index]
        }
    };
    let total = profile.load * base / (8.0 * f64::from(config.frame_length));
    Ok(profile.mix.map(|_, &alpha| alpha * total))
}

/// Class service shares `phi_c = alpha_c * delta_c`.
///
/// Shares are undefined at zero load: the class fraction `lambda_c / lambda`
/// behind `alpha_c` has the total arrival rate in its denominator.
pub fn service_shares(profile: &TrafficProfile) -> Result<PerClass<f64>> {
    if profile.load == 0.0 {
        return Err(Error::UndefinedShares);
    }
    Ok(PerClass::from_fn(|c| {
        profile.mix.get(c) * profile.weights.get(c)
    }))
}

/// Splits `base_rate` among the nonempty classes in proportion to their shares.
pub fn gps_rates(
    shares: &PerClass<f64>,
    nonempty: ClassSet,
    base_rate: f64,
) -> Result<GpsAllocation> {
    if nonempty.is_empty() {
        return Err(Error::InvalidArgument(
            "GPS split requires at least one nonempty queue".into(),
        ));
    }
    if !(base_rate > 0.0) || !base_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "base_rate must be positive and finite, got {base_rate}"
        )));
    }
    let share_total: f64 = nonempty.iter().map(|c| shares.get(c)).sum();
    if !(share_total > 0.0) {
        return Err(Error::InvalidArgument(
            "nonempty classes carry no positive share".into(),
        ));
    }
    let rates = PerClass::from_fn(|c| {
        if nonempty.contains(c) {
            shares.get(c) / share_total * base_rate
        } else {
            0.0
        }
    });
    Ok(GpsAllocation {
        shares: *shares,
        rates,
        base_rate,
        nonempty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn siv_config() -> SystemConfig {
        SystemConfig::homogeneous(16, 1e9, 5e-6, 1500, 15000).unwrap()
    }

    fn uniform_mix() -> PerClass<f64> {
        PerClass::splat(1.0 / 3.0)
    }

    fn default_weights() -> PerClass<f64> {
        PerClass::new(0.5, 0.3, 0.2)
    }

    #[test]
    fn arrival_rates_zero_load() {
        let profile = TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            0.0,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let rates = class_arrival_rates(&profile, &siv_config(), 0).unwrap();
        assert_eq!(rates, PerClass::splat(0.0));
    }

    #[test]
    fn arrival_rates_channel_capacity() {
        let profile = TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            0.3,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let rates = class_arrival_rates(&profile, &siv_config(), 0).unwrap();
        assert_relative_eq!(rates.sum(), 25000.0, max_relative = 1e-9);
        for (_, &r) in rates.iter() {
            assert_relative_eq!(r, 25000.0 / 3.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn arrival_rates_skewed_mix() {
        let profile = TrafficProfile::new(
            PerClass::new(0.2, 0.3, 0.5),
            default_weights(),
            0.4,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let rates = class_arrival_rates(&profile, &siv_config(), 0).unwrap();
        assert_relative_eq!(rates.be, 16_666.666_666_666_668, max_relative = 1e-9);
        assert_relative_eq!(rates.sum(), 0.4 * 1e9 / 12000.0, max_relative = 1e-9);
    }

    #[test]
    fn arrival_rates_guaranteed_bandwidth() {
        let profile = TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            0.3,
            Normalization::GuaranteedBandwidth,
        )
        .unwrap();
        let rates = class_arrival_rates(&profile, &siv_config(), 0).unwrap();
        assert_relative_eq!(rates.sum(), 0.3 * 60e6 / 12000.0, max_relative = 1e-9);
    }

    #[test]
    fn shares_uniform_symmetry() {
        let profile = TrafficProfile::new(
            uniform_mix(),
            PerClass::splat(1.0 / 3.0),
            0.2,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let shares = service_shares(&profile).unwrap();
        for (_, &s) in shares.iter() {
            assert_relative_eq!(s, 1.0 / 9.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn shares_reference_mix() {
        let profile = TrafficProfile::new(
            PerClass::new(0.2, 0.3, 0.5),
            default_weights(),
            0.2,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let shares = service_shares(&profile).unwrap();
        assert_relative_eq!(shares.ef, 0.10, max_relative = 1e-12);
        assert_relative_eq!(shares.af, 0.09, max_relative = 1e-12);
        assert_relative_eq!(shares.be, 0.10, max_relative = 1e-12);
    }

    #[test]
    fn shares_single_active_class() {
        let profile = TrafficProfile::new(
            PerClass::new(1.0, 0.0, 0.0),
            PerClass::new(1.0, 0.0, 0.0),
            0.2,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        let shares = service_shares(&profile).unwrap();
        assert_relative_eq!(shares.ef, 1.0, max_relative = 1e-12);
        assert_eq!(shares.af, 0.0);
        assert_eq!(shares.be, 0.0);
    }

    #[test]
    fn shares_undefined_at_zero_load() {
        let profile = TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            0.0,
            Normalization::ChannelCapacity,
        )
        .unwrap();
        assert!(matches!(
            service_shares(&profile),
            Err(Error::UndefinedShares)
        ));
    }

    #[test]
    fn gps_equal_shares() {
        let alloc = gps_rates(&PerClass::splat(1.0 / 9.0), ClassSet::all(), 5000.0).unwrap();
        for (_, &r) in alloc.rates.iter() {
            assert_relative_eq!(r, 5000.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gps_single_queue_takes_all() {
        let set = ClassSet::EMPTY.with(TrafficClass::Ef);
        let alloc = gps_rates(&PerClass::new(0.1, 0.2, 0.3), set, 5000.0).unwrap();
        assert_relative_eq!(alloc.rates.ef, 5000.0, max_relative = 1e-12);
        assert_eq!(alloc.rates.af, 0.0);
        assert_eq!(alloc.rates.be, 0.0);
    }

    #[test]
    fn gps_two_queue_split() {
        let set = ClassSet::EMPTY.with(TrafficClass::Af).with(TrafficClass::Be);
        let alloc = gps_rates(&PerClass::new(0.10, 0.09, 0.10), set, 5000.0).unwrap();
        assert_relative_eq!(alloc.rates.af, 0.09 / 0.19 * 5000.0, max_relative = 1e-9);
        assert_relative_eq!(alloc.rates.be, 0.10 / 0.19 * 5000.0, max_relative = 1e-9);
        assert_eq!(alloc.rates.ef, 0.0);
    }

    #[test]
    fn gps_rejects_empty_set() {
        assert!(matches!(
            gps_rates(&PerClass::splat(0.1), ClassSet::EMPTY, 5000.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn profile_validation_rejects_bad_sums() {
        assert!(TrafficProfile::new(
            PerClass::new(0.5, 0.6, 0.1),
            default_weights(),
            0.2,
            Normalization::ChannelCapacity,
        )
        .is_err());
        assert!(TrafficProfile::new(
            uniform_mix(),
            PerClass::new(0.5, 0.3, 0.3),
            0.2,
            Normalization::ChannelCapacity,
        )
        .is_err());
        assert!(TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            1.0,
            Normalization::ChannelCapacity,
        )
        .is_err());
        assert!(TrafficProfile::new(
            uniform_mix(),
            default_weights(),
            -0.1,
            Normalization::ChannelCapacity,
        )
        .is_err());
    }

    #[test]
    fn profile_rejects_zero_weight_on_active_class() {
        assert!(TrafficProfile::new(
            uniform_mix(),
            PerClass::new(0.5, 0.5, 0.0),
            0.2,
            Normalization::ChannelCapacity,
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn gps_is_work_conserving(
            s_ef in 1e-6f64..1.0,
            s_af in 1e-6f64..1.0,
            s_be in 1e-6f64..1.0,
            base in 1.0f64..1e6,
            mask in 1u8..8,
        ) {
            let shares = PerClass::new(s_ef, s_af, s_be);
            let set = ClassSet::from_fn(|c| mask & (1 << c.priority_rank()) != 0);
            let alloc = gps_rates(&shares, set, base).unwrap();
            let total: f64 = set.iter().map(|c| alloc.rates.get(c)).sum();
            prop_assert!((total - base).abs() <= 1e-9 * base);
        }

        #[test]
        fn gps_invariant_under_weight_scaling(
            s_ef in 1e-6f64..1.0,
            s_af in 1e-6f64..1.0,
            s_be in 1e-6f64..1.0,
            base in 1.0f64..1e6,
            scale in 1e-3f64..1e3,
        ) {
            let shares = PerClass::new(s_ef, s_af, s_be);
            let scaled = shares.map(|_, &s| s * scale);
            let a = gps_rates(&shares, ClassSet::all(), base).unwrap();
            let b = gps_rates(&scaled, ClassSet::all(), base).unwrap();
            for (class, &r) in a.rates.iter() {
                prop_assert!((r - b.rates.get(class)).abs() <= 1e-9 * base);
            }
        }

        #[test]
        fn gps_removal_never_decreases_survivors(
            s_ef in 1e-6f64..1.0,
            s_af in 1e-6f64..1.0,
            s_be in 1e-6f64..1.0,
            base in 1.0f64..1e6,
        ) {
            let shares = PerClass::new(s_ef, s_af, s_be);
            let full = gps_rates(&shares, ClassSet::all(), base).unwrap();
            for dropped in TrafficClass::ALL {
                let set = ClassSet::from_fn(|c| c != dropped);
                let reduced = gps_rates(&shares, set, base).unwrap();
                for kept in set.iter() {
                    prop_assert!(
                        *reduced.rates.get(kept) >= full.rates.get(kept) - 1e-12 * base
                    );
                }
            }
        }
    }
}
