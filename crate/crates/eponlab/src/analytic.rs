//! Closed-form steady-state analysis of the two-stage ONU queueing network.
//!
//! Stage one is a triple of M/M/1 stations, one per class, whose service
//! rates come from the GPS split of the guaranteed bandwidth. Stage two is
//! a batch station: service epochs occur at rate `mu` and each epoch removes
//! up to `K` packets at once. Its queue length is geometric with parameter
//! `r0`, the unique root in (0, 1) of
//!
//! ```text
//! mu * r^(K+1) - (lambda + mu) * r + lambda = 0
//! ```
//!
//! The network has a Jackson product-form stationary law, so the mean delay
//! follows from Little's formula:
//!
//! ```text
//! E[T] = E[N] / gamma
//!      = r0 / (lambda * (1 - r0)) + (1/lambda) * sum_c rho_c / (1 - rho_c)
//! ```
//!
//! Undefined quantities are encoded in the report as IEEE specials: an
//! unstable station reports an infinite expected count, and a delay with no
//! defining arrival stream (zero load) is NaN.

use crate::dimensioning::{
    batch_size, compute_guaranteed_bandwidth, compute_max_cycle, SystemConfig,
};
use crate::error::{Error, Result};
use crate::traffic::{
    class_arrival_rates, gps_rates, service_shares, ClassSet, PerClass, TrafficProfile,
};

/// Parameters of one service station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationParams {
    /// Poisson arrival rate in packets/second.
    pub arrival_rate: f64,
    /// Service epoch rate in packets/second. May be infinite for a class
    /// that offers no traffic.
    pub service_rate: f64,
    /// Packets served per epoch; 1 for the first-stage stations.
    pub batch_size: u32,
}

impl StationParams {
    pub fn new(arrival_rate: f64, service_rate: f64, batch_size: u32) -> Result<Self> {
        if !(arrival_rate >= 0.0) || arrival_rate.is_infinite() {
            return Err(Error::InvalidArgument(format!(
                "arrival_rate must be finite and non-negative, got {arrival_rate}"
            )));
        }
        if !(service_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "service_rate must be positive, got {service_rate}"
            )));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(Self {
            arrival_rate,
            service_rate,
            batch_size,
        })
    }

    /// Maximum sustainable throughput `K * mu` in packets/second.
    pub fn capacity(&self) -> f64 {
        f64::from(self.batch_size) * self.service_rate
    }
}

/// Steady-state figures of one station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationMetrics {
    /// Offered load relative to capacity: `lambda / (K * mu)`.
    pub utilization: f64,
    pub stable: bool,
    /// Mean number of packets at the station; infinite when unstable.
    pub expected_count: f64,
    /// Geometric parameter of the marginal queue-length law: `rho` for an
    /// M/M/1 station, `r0` for the batch station. NaN when unstable.
    pub marginal_ratio: f64,
}

/// The four stations of one ONU: three class queues plus the grant stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationSet {
    pub per_class: PerClass<StationParams>,
    pub stage2: StationParams,
}

/// Stability of each station.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StabilityFlags {
    pub per_class: PerClass<bool>,
    pub stage2: bool,
}

impl StabilityFlags {
    pub fn all_stable(&self) -> bool {
        self.per_class.ef && self.per_class.af && self.per_class.be && self.stage2
    }
}

/// Full steady-state evaluation of one ONU.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticReport {
    pub stations: StationSet,
    pub per_class: PerClass<StationMetrics>,
    pub stage2: StationMetrics,
    /// Per-class arrival rates in packets/second.
    pub arrival_rates: PerClass<f64>,
    /// Network throughput in packets/second; equals the total arrival rate
    /// at equilibrium.
    pub throughput: f64,
    /// Mean total packet count over all four stations; infinite when any
    /// station is unstable.
    pub expected_total: f64,
    /// Mean access delay in seconds; infinite when unstable, NaN at zero
    /// load.
    pub mean_delay: f64,
    /// Mean access delay per class in seconds; NaN for a class with no
    /// arrivals, infinite when the class or the grant stage is unstable.
    pub class_delay: PerClass<f64>,
    pub all_stable: bool,
}

/// Steady-state figures of an M/M/1 station.
///
/// Instability is a reported state, not an error.
pub fn mm1_metrics(params: &StationParams) -> StationMetrics {
    debug_assert_eq!(params.batch_size, 1);
    let rho = params.arrival_rate / params.service_rate;
    if rho < 1.0 {
        StationMetrics {
            utilization: rho,
            stable: true,
            expected_count: rho / (1.0 - rho),
            marginal_ratio: rho,
        }
    } else {
        StationMetrics {
            utilization: rho,
            stable: false,
            expected_count: f64::INFINITY,
            marginal_ratio: f64::NAN,
        }
    }
}

/// The unique root in (0, 1) of `mu * r^(K+1) - (lambda + mu) * r + lambda`.
///
/// The polynomial is positive at 0 (value `lambda`), has a root at 1, and
/// its derivative at 1 is `K * mu - lambda`, so under the stability
/// condition `lambda < K * mu` it crosses zero exactly once inside the unit
/// interval. The root is bracketed by scanning `1 - 2^-j` for a sign change,
/// narrowed by bisection, and polished with a few Newton steps.
pub fn batch_root(params: &StationParams) -> Result<f64> {
    let lambda = params.arrival_rate;
    let mu = params.service_rate;
    let k = params.batch_size;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    if !(lambda < params.capacity()) {
        return Err(Error::UnstableStation {
            arrival_rate: lambda,
            capacity: params.capacity(),
        });
    }
    let exponent = (i64::from(k) + 1).min(i64::from(i32::MAX)) as i32;
    let f = |r: f64| mu * r.powi(exponent) - (lambda + mu) * r + lambda;
    let df = |r: f64| f64::from(exponent) * mu * r.powi(exponent - 1) - (lambda + mu);

    let mut lo = 0.0;
    let mut hi = 1.0;
    for j in 1..=60 {
        let candidate = 1.0 - 0.5f64.powi(j);
        if f(candidate) < 0.0 {
            hi = candidate;
            break;
        }
        lo = candidate;
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    for _ in 0..3 {
        let slope = df(root);
        if slope == 0.0 {
            break;
        }
        let next = root - f(root) / slope;
        if next > lo && next < hi {
            root = next;
        }
    }
    Ok(root)
}

/// Steady-state figures of the batch station.
pub fn batch_metrics(params: &StationParams) -> StationMetrics {
    let utilization = params.arrival_rate / params.capacity();
    match batch_root(params) {
        Ok(r0) => StationMetrics {
            utilization,
            stable: true,
            expected_count: r0 / (1.0 - r0),
            marginal_ratio: r0,
        },
        Err(_) => StationMetrics {
            utilization,
            stable: false,
            expected_count: f64::INFINITY,
            marginal_ratio: f64::NAN,
        },
    }
}

/// Product-form probability of the joint state `(n1, n2, n3, n4)`.
///
/// Each station's marginal is geometric in its ratio, so the joint
/// probability is the product of the four marginal terms.
pub fn joint_state_probability(counts: [u64; 4], report: &AnalyticReport) -> Result<f64> {
    let ratios = [
        report.per_class.ef.marginal_ratio,
        report.per_class.af.marginal_ratio,
        report.per_class.be.marginal_ratio,
        report.stage2.marginal_ratio,
    ];
    let stable = [
        report.per_class.ef.stable,
        report.per_class.af.stable,
        report.per_class.be.stable,
        report.stage2.stable,
    ];
    if stable.iter().any(|s| !s) {
        return Err(Error::NoStationaryDistribution);
    }
    let mut probability = 1.0;
    for (q, &n) in ratios.iter().zip(counts.iter()) {
        probability *= (1.0 - q) * geometric_power(*q, n);
    }
    Ok(probability)
}

fn geometric_power(q: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        q.powi(n as i32)
    } else {
        q.powf(n as f64)
    }
}

/// Per-station stability booleans.
pub fn stability_report(stations: &StationSet) -> StabilityFlags {
    StabilityFlags {
        per_class: stations
            .per_class
            .map(|_, p| p.arrival_rate < p.capacity()),
        stage2: stations.stage2.arrival_rate < stations.stage2.capacity(),
    }
}

/// Assembles the four station parameter sets for one ONU.
///
/// Stage-one service rates split the guaranteed bandwidth across the classes
/// that offer traffic; a class with no arrivals gets an infinite service
/// rate so it drops out of every sum. The grant stage serves batches of
/// `K = floor(W / L)` packets at epoch rate equal to the guaranteed
/// bandwidth in packets/second.
pub fn station_params(
    config: &SystemConfig,
    profile: &TrafficProfile,
    onu_index: usize,
) -> Result<StationSet> {
    let rates = class_arrival_rates(profile, config, onu_index)?;
    let t_max = compute_max_cycle(config);
    let lambda_min = compute_guaranteed_bandwidth(config, t_max)?[onu_index];
    let lambda_min_pkts = lambda_min / (8.0 * f64::from(config.frame_length));
    let total = rates.sum();

    let per_class = if total > 0.0 {
        let shares = service_shares(profile)?;
        let active = ClassSet::from_fn(|c| *rates.get(c) > 0.0);
        let alloc = gps_rates(&shares, active, lambda_min_pkts)?;
        PerClass::from_fn(|c| {
            let mu = if active.contains(c) {
                *alloc.rates.get(c)
            } else {
                f64::INFINITY
            };
            StationParams {
                arrival_rate: *rates.get(c),
                service_rate: mu,
                batch_size: 1,
            }
        })
    } else {
        PerClass::from_fn(|c| StationParams {
            arrival_rate: *rates.get(c),
            service_rate: f64::INFINITY,
            batch_size: 1,
        })
    };

    Ok(StationSet {
        per_class,
        stage2: StationParams {
            arrival_rate: total,
            service_rate: lambda_min_pkts,
            batch_size: batch_size(config, onu_index),
        },
    })
}

/// Evaluates the steady state of one ONU.
///
/// Instability never raises an error: the report carries `stable = false`
/// and infinite counts and delays so that load sweeps can continue past the
/// stability boundary.
pub fn evaluate(
    config: &SystemConfig,
    profile: &TrafficProfile,
    onu_index: usize,
) -> Result<AnalyticReport> {
    let stations = station_params(config, profile, onu_index)?;
    let per_class = stations.per_class.map(|_, p| mm1_metrics(p));
    let stage2 = batch_metrics(&stations.stage2);
    let arrival_rates = stations.per_class.map(|_, p| p.arrival_rate);
    let lambda = stations.stage2.arrival_rate;
    let flags = stability_report(&stations);
    let all_stable = flags.all_stable();

    let expected_total =
        per_class.ef.expected_count + per_class.af.expected_count + per_class.be.expected_count
            + stage2.expected_count;
    let mean_delay = if lambda == 0.0 {
        f64::NAN
    } else if all_stable {
        expected_total / lambda
    } else {
        f64::INFINITY
    };
    let stage2_delay = if lambda == 0.0 {
        f64::NAN
    } else if stage2.stable {
        stage2.expected_count / lambda
    } else {
        f64::INFINITY
    };
    let class_delay = PerClass::from_fn(|c| {
        let rate = *arrival_rates.get(c);
        if rate == 0.0 {
            f64::NAN
        } else if per_class.get(c).stable && stage2.stable {
            per_class.get(c).expected_count / rate + stage2_delay
        } else {
            f64::INFINITY
        }
    });

    #[cfg(debug_assertions)]
    if all_stable && lambda > 0.0 {
        let two_term = stage2.marginal_ratio / (lambda * (1.0 - stage2.marginal_ratio))
            + per_class
                .iter()
                .map(|(_, m)| m.expected_count)
                .sum::<f64>()
                / lambda;
        debug_assert!(
            (mean_delay - two_term).abs() <= 1e-9 * two_term.abs(),
            "delay expansion mismatch: {mean_delay} vs {two_term}"
        );
    }

    Ok(AnalyticReport {
        stations,
        per_class,
        stage2,
        arrival_rates,
        throughput: lambda,
        expected_total,
        mean_delay,
        class_delay,
        all_stable,
    })
}
