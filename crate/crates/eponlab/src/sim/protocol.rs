//! Full polling-protocol simulation: cyclic OLT polling with guard gaps,
//! REPORT-driven grant sizing capped at each ONU's maximum window, and a
//! GPS split of every slot's frame budget across the class queues.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use crate::dimensioning::SystemConfig;
use crate::error::{Error, Result};
use crate::sim::stats::{BusyTime, DelayTally, TimeAverage};
use crate::sim::{
    derive_seed, EventKey, Fidelity, GateMessage, ReportMessage, SimConfig, SimReport,
};
use crate::traffic::{class_arrival_rates, service_shares, PerClass, TrafficClass, TrafficProfile};

#[derive(Clone, Copy, Debug)]
enum Event {
    /// Last bit of one frame leaves the ONU.
    Departure {
        onu: usize,
        class: TrafficClass,
        packet_arrival: f64,
    },
    /// External arrival to one class queue.
    Arrival { onu: usize, class: TrafficClass },
    /// Granted transmission slot begins.
    Slot { onu: usize },
}

fn kind_rank(event: &Event) -> u8 {
    match event {
        Event::Departure { .. } => 0,
        Event::Arrival { .. } => 1,
        Event::Slot { .. } => 2,
    }
}

fn station(event: &Event) -> u32 {
    match event {
        Event::Departure { onu, .. } | Event::Arrival { onu, .. } | Event::Slot { onu } => {
            *onu as u32
        }
    }
}

struct HeapEntry {
    key: EventKey,
    event: Event,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

struct Heap {
    items: BinaryHeap<Reverse<HeapEntry>>,
    seq: u64,
}

impl Heap {
    fn new() -> Self {
        Self {
            items: BinaryHeap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, time: f64, event: Event) {
        let key = EventKey {
            time,
            kind_rank: kind_rank(&event),
            station: station(&event),
            seq: self.seq,
        };
        self.seq += 1;
        self.items.push(Reverse(HeapEntry { key, event }));
    }

    fn pop(&mut self) -> Option<(EventKey, Event)> {
        let Reverse(entry) = self.items.pop()?;
        Some((entry.key, entry.event))
    }
}

/// Splits a slot's frame budget over the class queues in proportion to the
/// GPS shares of the nonempty ones, by largest remainder on whole frames
/// with ties broken in priority order. A pass that hits a queue's occupancy
/// cap redistributes the surplus among the remaining classes.
fn apportion_frames(budget: usize, occupancy: [usize; 3], shares: [f64; 3]) -> [usize; 3] {
    let mut allocated = [0usize; 3];
    let mut remaining = budget;
    loop {
        let active: Vec<usize> = (0..3)
            .filter(|&c| occupancy[c] > allocated[c] && shares[c] > 0.0)
            .collect();
        if remaining == 0 || active.is_empty() {
            break;
        }
        let share_total: f64 = active.iter().map(|&c| shares[c]).sum();
        let mut pass = [0usize; 3];
        let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(active.len());
        let mut floored = 0usize;
        for &c in &active {
            let quota = remaining as f64 * shares[c] / share_total;
            let base = quota.floor() as usize;
            pass[c] = base;
            floored += base;
            fractions.push((quota - base as f64, c));
        }
        let mut leftover = remaining.saturating_sub(floored);
        fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, c) in &fractions {
            if leftover == 0 {
                break;
            }
            pass[c] += 1;
            leftover -= 1;
        }
        let mut advanced = false;
        for &c in &active {
            let take = pass[c].min(occupancy[c] - allocated[c]);
            if take > 0 {
                advanced = true;
            }
            allocated[c] += take;
            remaining -= take;
        }
        if !advanced {
            break;
        }
    }
    allocated
}

/// Runs the protocol-fidelity simulation.
///
/// The OLT polls ONUs in a fixed cyclic order. Each slot starts one guard
/// interval after the previous slot ends; its grant is the lesser of the
/// ONU's last reported backlog and its maximum window. Within the slot the
/// ONU transmits whole frames chosen by the GPS apportionment, highest
/// priority leaving first, and reports its remaining backlog for the next
/// round. The run is bit-reproducible for a fixed seed.
pub fn run_protocol_sim(
    config: &SystemConfig,
    profile: &TrafficProfile,
    sim: &SimConfig,
) -> Result<SimReport> {
    if sim.fidelity != Fidelity::Protocol {
        return Err(Error::InvalidConfig(
            "run_protocol_sim requires Protocol fidelity".into(),
        ));
    }
    let n = config.n_onus;
    let duration = sim.sim_duration;
    let warmup = sim.warmup;
    let frame_bytes = u64::from(config.frame_length);
    let frame_time = config.frame_time();

    let shares = if profile.load > 0.0 {
        let s = service_shares(profile)?;
        [s.ef, s.af, s.be]
    } else {
        [0.0; 3]
    };

    let mut arrival_rates: Vec<PerClass<f64>> = Vec::with_capacity(n);
    for onu in 0..n {
        arrival_rates.push(class_arrival_rates(profile, config, onu)?);
    }

    struct ArrivalStream {
        rng: ChaCha12Rng,
        distribution: Exp<f64>,
    }
    let mut streams: Vec<PerClass<Option<ArrivalStream>>> = Vec::with_capacity(n);
    for (onu, rates) in arrival_rates.iter().enumerate() {
        streams.push(PerClass::from_fn(|c| {
            let rate = *rates.get(c);
            if rate > 0.0 {
                Some(ArrivalStream {
                    rng: ChaCha12Rng::seed_from_u64(derive_seed(
                        sim.rng_seed,
                        (onu * 3 + c.priority_rank()) as u64,
                    )),
                    distribution: Exp::new(rate).expect("positive finite rate"),
                })
            } else {
                None
            }
        }));
    }

    let mut heap = Heap::new();
    let mut queues: Vec<PerClass<VecDeque<f64>>> =
        (0..n).map(|_| PerClass::from_fn(|_| VecDeque::new())).collect();
    let mut pending_grant: Vec<u64> = vec![0; n];
    let mut in_flight: Vec<PerClass<u64>> = vec![PerClass::splat(0); n];

    let mut generated = PerClass::splat(0u64);
    let mut delivered = PerClass::splat(0u64);
    let mut class_avg = PerClass::from_fn(|_| TimeAverage::new(warmup, duration));
    let mut class_tally =
        PerClass::from_fn(|_| DelayTally::new(warmup, duration, sim.batch_count));
    let mut total_tally = DelayTally::new(warmup, duration, sim.batch_count);
    let mut airtime = BusyTime::new(warmup, duration);
    let mut gates: Vec<GateMessage> = Vec::new();
    let mut cycle_anchor: Option<f64> = None;
    let mut cycle_sum = 0.0;
    let mut cycle_count = 0u64;
    let mut cycle_max = f64::NAN;

    for (onu, stream_set) in streams.iter_mut().enumerate() {
        for class in TrafficClass::ALL {
            if let Some(stream) = stream_set.get_mut(class) {
                let gap = stream.distribution.sample(&mut stream.rng);
                heap.push(gap, Event::Arrival { onu, class });
            }
        }
    }
    heap.push(0.0, Event::Slot { onu: 0 });

    while let Some((key, event)) = heap.pop() {
        let now = key.time;
        if now > duration {
            break;
        }
        match event {
            Event::Arrival { onu, class } => {
                queues[onu].get_mut(class).push_back(now);
                *generated.get_mut(class) += 1;
                class_avg.get_mut(class).step(now, 1.0);
                let stream = streams[onu]
                    .get_mut(class)
                    .as_mut()
                    .expect("arrival implies an active stream");
                let gap = stream.distribution.sample(&mut stream.rng);
                heap.push(now + gap, Event::Arrival { onu, class });
            }
            Event::Departure {
                onu,
                class,
                packet_arrival,
            } => {
                *delivered.get_mut(class) += 1;
                *in_flight[onu].get_mut(class) -= 1;
                class_avg.get_mut(class).step(now, -1.0);
                let delay = now - packet_arrival;
                class_tally.get_mut(class).record(now, delay);
                total_tally.record(now, delay);
            }
            Event::Slot { onu } => {
                let grant_bytes = pending_grant[onu];
                if sim.trace_gates {
                    gates.push(GateMessage {
                        onu_id: onu,
                        slot_start: now,
                        slot_length_bytes: grant_bytes,
                    });
                }
                if onu == 0 {
                    if let Some(previous) = cycle_anchor {
                        let cycle = now - previous;
                        if previous >= warmup && now <= duration {
                            cycle_sum += cycle;
                            cycle_count += 1;
                            cycle_max = if cycle_max.is_nan() {
                                cycle
                            } else {
                                cycle_max.max(cycle)
                            };
                        }
                    }
                    cycle_anchor = Some(now);
                }

                let budget = (grant_bytes / frame_bytes) as usize;
                let occupancy = [
                    queues[onu].ef.len(),
                    queues[onu].af.len(),
                    queues[onu].be.len(),
                ];
                let committed = apportion_frames(budget, occupancy, shares);
                let mut sent = 0usize;
                for class in TrafficClass::ALL {
                    let count = committed[class.priority_rank()];
                    for _ in 0..count {
                        let packet_arrival = queues[onu]
                            .get_mut(class)
                            .pop_front()
                            .expect("committed frame must be queued");
                        sent += 1;
                        *in_flight[onu].get_mut(class) += 1;
                        heap.push(
                            now + sent as f64 * frame_time,
                            Event::Departure {
                                onu,
                                class,
                                packet_arrival,
                            },
                        );
                    }
                }
                if sent > 0 {
                    airtime.add_interval(now, now + sent as f64 * frame_time);
                }

                let report = ReportMessage {
                    onu_id: onu,
                    queue_occupancy: PerClass::from_fn(|c| {
                        queues[onu].get(c).len() as u64 * frame_bytes
                    }),
                };
                let backlog = report.queue_occupancy.ef
                    + report.queue_occupancy.af
                    + report.queue_occupancy.be;
                pending_grant[onu] = backlog.min(config.w_max[onu]);

                let slot_length = 8.0 * grant_bytes as f64 / config.line_rate;
                let next = (onu + 1) % n;
                heap.push(now + slot_length + config.guard, Event::Slot { onu: next });
            }
        }
    }

    let class_queued_end = PerClass::from_fn(|c| {
        (0..n)
            .map(|onu| queues[onu].get(c).len() as u64 + in_flight[onu].get(c))
            .sum()
    });

    Ok(SimReport {
        fidelity: Fidelity::Protocol,
        frame_length: config.frame_length,
        class_delay: class_tally.map(|_, t| t.estimate()),
        total_delay: total_tally.estimate(),
        class_queue_bytes: class_avg.map(|_, avg| avg.finish() * frame_bytes as f64),
        stage2_queue_bytes: 0.0,
        utilization: airtime.fraction(),
        cycle_mean: if cycle_count > 0 {
            cycle_sum / cycle_count as f64
        } else {
            f64::NAN
        },
        cycle_max,
        class_generated: generated,
        class_delivered: delivered,
        class_queued_end,
        gates: if sim.trace_gates { Some(gates) } else { None },
    })
}
