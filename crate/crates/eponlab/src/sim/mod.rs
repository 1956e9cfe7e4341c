//! Deterministic seeded discrete-event simulation at two fidelities.
//!
//! The protocol fidelity executes the full polling machinery: GATE and
//! REPORT exchanges, interleaved cyclic polling with guard gaps, grants
//! capped at each ONU's maximum window, and intra-slot GPS apportionment of
//! whole frames over the class queues. The queueing fidelity drives the
//! bare two-stage station network with exponential timers and exists to
//! validate the closed-form results and to measure how much the protocol
//! machinery deviates from them.
//!
//! Runs are reproducible bit for bit: all randomness flows from ChaCha
//! streams derived from the seed, one stream per (purpose, station) pair,
//! so event interleaving never perturbs the draws.

mod protocol;
mod queueing;
pub mod stats;

pub use protocol::run_protocol_sim;
pub use queueing::run_queueing_sim;

use crate::error::{Error, Result};
use crate::traffic::{PerClass, TrafficClass};
use stats::Estimate;

/// Which machinery a run exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    /// Full MPCP polling with IPACT grant sizing.
    Protocol,
    /// Bare two-stage queueing network.
    QueueingNetwork,
}

/// Run controls for one simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub rng_seed: u64,
    /// Simulated seconds, including warmup.
    pub sim_duration: f64,
    /// Leading seconds whose samples are discarded.
    pub warmup: f64,
    pub fidelity: Fidelity,
    /// Number of equal-width batches for confidence intervals.
    pub batch_count: usize,
    /// Retain every GATE message in the report for invariant checking.
    pub trace_gates: bool,
}

impl SimConfig {
    pub fn new(
        rng_seed: u64,
        sim_duration: f64,
        warmup: f64,
        fidelity: Fidelity,
        batch_count: usize,
    ) -> Result<Self> {
        if !(sim_duration > 0.0) || !sim_duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sim_duration must be positive and finite, got {sim_duration}"
            )));
        }
        if !(warmup >= 0.0) || warmup >= sim_duration {
            return Err(Error::InvalidConfig(format!(
                "warmup must lie in [0, sim_duration), got {warmup}"
            )));
        }
        if batch_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch_count must be at least 2, got {batch_count}"
            )));
        }
        Ok(Self {
            rng_seed,
            sim_duration,
            warmup,
            fidelity,
            batch_count,
            trace_gates: false,
        })
    }

    pub fn with_gate_trace(mut self) -> Self {
        self.trace_gates = true;
        self
    }
}

/// One fixed-size upstream frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub traffic_class: TrafficClass,
    pub size: u32,
    pub arrival_time: f64,
    pub onu_id: usize,
}

/// Grant issued by the OLT to one ONU.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateMessage {
    pub onu_id: usize,
    /// Slot start on the OLT timeline, seconds.
    pub slot_start: f64,
    /// Granted window, bytes.
    pub slot_length_bytes: u64,
}

/// Queue occupancy an ONU reports at its transmission slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportMessage {
    pub onu_id: usize,
    /// Whole-frame byte totals per class at the report instant.
    pub queue_occupancy: PerClass<u64>,
}

/// Measured outcome of one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub fidelity: Fidelity,
    pub frame_length: u32,
    /// Mean access delay per class, seconds; NaN for a class that delivered
    /// nothing inside the measurement window.
    pub class_delay: PerClass<Estimate>,
    /// Mean access delay over all classes, seconds.
    pub total_delay: Estimate,
    /// Time-averaged queue content per class, bytes.
    pub class_queue_bytes: PerClass<f64>,
    /// Time-averaged content of the shared second stage, bytes; zero under
    /// protocol fidelity, which has no such stage.
    pub stage2_queue_bytes: f64,
    /// Fraction of the measurement window the upstream spent carrying data.
    pub utilization: f64,
    /// Mean polling cycle, seconds; NaN under queueing fidelity.
    pub cycle_mean: f64,
    /// Longest observed polling cycle, seconds; NaN under queueing fidelity.
    pub cycle_max: f64,
    /// Packets created per class over the whole run.
    pub class_generated: PerClass<u64>,
    /// Packets fully transmitted per class over the whole run.
    pub class_delivered: PerClass<u64>,
    /// Packets still in the system when the run ended, including any frame
    /// mid-transmission.
    pub class_queued_end: PerClass<u64>,
    /// Every GATE issued, when tracing was requested.
    pub gates: Option<Vec<GateMessage>>,
}

impl SimReport {
    /// Total time-averaged system content in packets.
    pub fn mean_system_packets(&self) -> f64 {
        let bytes = self.class_queue_bytes.sum() + self.stage2_queue_bytes;
        bytes / f64::from(self.frame_length)
    }

    pub fn total_generated(&self) -> u64 {
        self.class_generated.ef + self.class_generated.af + self.class_generated.be
    }

    pub fn total_delivered(&self) -> u64 {
        self.class_delivered.ef + self.class_delivered.af + self.class_delivered.be
    }

    /// Exact equality with NaN treated as equal to NaN, for determinism
    /// checks (plain `==` fails on the NaN fields of a valid report).
    pub fn same_results(&self, other: &Self) -> bool {
        fn eq(a: f64, b: f64) -> bool {
            a == b || (a.is_nan() && b.is_nan())
        }
        fn eq_est(a: &Estimate, b: &Estimate) -> bool {
            eq(a.mean, b.mean) && eq(a.ci_half_width, b.ci_half_width) && a.samples == b.samples
        }
        self.fidelity == other.fidelity
            && self.frame_length == other.frame_length
            && TrafficClass::ALL.iter().all(|&c| {
                eq_est(self.class_delay.get(c), other.class_delay.get(c))
                    && eq(
                        *self.class_queue_bytes.get(c),
                        *other.class_queue_bytes.get(c),
                    )
                    && self.class_generated.get(c) == other.class_generated.get(c)
                    && self.class_delivered.get(c) == other.class_delivered.get(c)
                    && self.class_queued_end.get(c) == other.class_queued_end.get(c)
            })
            && eq_est(&self.total_delay, &other.total_delay)
            && eq(self.stage2_queue_bytes, other.stage2_queue_bytes)
            && eq(self.utilization, other.utilization)
            && eq(self.cycle_mean, other.cycle_mean)
            && eq(self.cycle_max, other.cycle_max)
            && self.gates == other.gates
    }
}

/// Relative discrepancy between the measured mean delay and the delay
/// Little's formula predicts from the measured mean content.
pub fn little_check(report: &SimReport, effective_arrival_rate: f64) -> Result<f64> {
    if report.total_delay.samples == 0
        || !(effective_arrival_rate > 0.0)
        || !report.total_delay.mean.is_finite()
    {
        return Err(Error::UndefinedCheck);
    }
    let little_delay = report.mean_system_packets() / effective_arrival_rate;
    Ok((little_delay - report.total_delay.mean).abs() / report.total_delay.mean)
}

/// Mixes a stream tag into the base seed so that each random stream is
/// independent of event interleaving.
pub(crate) fn derive_seed(base: u64, tag: u64) -> u64 {
    base.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Heap key ordering simulation events: time first, then a fixed kind rank
/// (departures before arrivals before grants), then station indices, then
/// an insertion sequence number so the order is total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct EventKey {
    pub time: f64,
    pub kind_rank: u8,
    pub station: u32,
    pub seq: u64,
}

impl Eq for EventKey {}

impl Ord for EventKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind_rank.cmp(&other.kind_rank))
            .then(self.station.cmp(&other.station))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
