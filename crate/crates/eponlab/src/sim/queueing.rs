//! Event-driven twin of the analytic two-stage network: three exponential
//! single servers feed one batch server that removes up to `K` packets per
//! exponential epoch.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};

use crate::analytic::StationSet;
use crate::error::{Error, Result};
use crate::sim::stats::{DelayTally, TimeAverage};
use crate::sim::{derive_seed, EventKey, Fidelity, SimConfig, SimReport};
use crate::traffic::{PerClass, TrafficClass};

#[derive(Clone, Copy, Debug)]
enum Event {
    /// Head-of-line completion at a first-stage class server.
    StageOneComplete(TrafficClass),
    /// Batch service epoch at the second stage.
    StageTwoEpoch,
    /// External arrival to a class queue.
    Arrival(TrafficClass),
}

fn kind_rank(event: &Event) -> u8 {
    match event {
        Event::StageOneComplete(_) | Event::StageTwoEpoch => 0,
        Event::Arrival(_) => 1,
    }
}

fn station_index(event: &Event) -> u32 {
    match event {
        Event::StageOneComplete(c) | Event::Arrival(c) => c.priority_rank() as u32,
        Event::StageTwoEpoch => 3,
    }
}

enum SamplerMode {
    Never,
    Instant,
    Exponential(Exp<f64>),
}

struct Sampler {
    rng: ChaCha12Rng,
    mode: SamplerMode,
}

impl Sampler {
    /// Exponential sampler for one stream. A zero rate never fires and an
    /// infinite rate fires instantly.
    fn new(seed: u64, rate: f64) -> Self {
        let mode = if rate == 0.0 {
            SamplerMode::Never
        } else if rate.is_infinite() {
            SamplerMode::Instant
        } else {
            SamplerMode::Exponential(Exp::new(rate).expect("positive finite rate"))
        };
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            mode,
        }
    }

    fn draw(&mut self) -> Option<f64> {
        match &self.mode {
            SamplerMode::Never => None,
            SamplerMode::Instant => Some(0.0),
            SamplerMode::Exponential(d) => Some(d.sample(&mut self.rng)),
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
            station: station_index(&event),
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

/// Runs the queueing-fidelity simulation of one ONU's station network.
///
/// `frame_length` converts packet counts into the byte-denominated queue
/// averages of the report. The run is bit-reproducible for a fixed seed.
pub fn run_queueing_sim(
    stations: &StationSet,
    frame_length: u32,
    sim: &SimConfig,
) -> Result<SimReport> {
    if sim.fidelity != Fidelity::QueueingNetwork {
        return Err(Error::InvalidConfig(
            "run_queueing_sim requires QueueingNetwork fidelity".into(),
        ));
    }
    let duration = sim.sim_duration;
    let warmup = sim.warmup;
    let frame_bytes = f64::from(frame_length);

    let mut arrival_samplers = PerClass::from_fn(|c| {
        Sampler::new(
            derive_seed(sim.rng_seed, c.priority_rank() as u64),
            stations.per_class.get(c).arrival_rate,
        )
    });
    let mut service_samplers = PerClass::from_fn(|c| {
        Sampler::new(
            derive_seed(sim.rng_seed, 3 + c.priority_rank() as u64),
            stations.per_class.get(c).service_rate,
        )
    });
    let mut epoch_sampler = Sampler::new(
        derive_seed(sim.rng_seed, 6),
        stations.stage2.service_rate,
    );

    let mut heap = Heap::new();
    let mut stage1: PerClass<VecDeque<f64>> = PerClass::from_fn(|_| VecDeque::new());
    let mut stage2: VecDeque<(f64, TrafficClass)> = VecDeque::new();
    let batch_limit = stations.stage2.batch_size as usize;

    let mut generated = PerClass::splat(0u64);
    let mut delivered = PerClass::splat(0u64);
    let mut class_avg = PerClass::from_fn(|_| TimeAverage::new(warmup, duration));
    let mut stage2_avg = TimeAverage::new(warmup, duration);
    let mut busy_avg = TimeAverage::new(warmup, duration);
    let mut class_tally =
        PerClass::from_fn(|_| DelayTally::new(warmup, duration, sim.batch_count));
    let mut total_tally = DelayTally::new(warmup, duration, sim.batch_count);

    for class in TrafficClass::ALL {
        if let Some(gap) = arrival_samplers.get_mut(class).draw() {
            heap.push(gap, Event::Arrival(class));
        }
    }

    while let Some((key, event)) = heap.pop() {
        let now = key.time;
        if now > duration {
            break;
        }
        match event {
            Event::Arrival(class) => {
                stage1.get_mut(class).push_back(now);
                *generated.get_mut(class) += 1;
                class_avg.get_mut(class).step(now, 1.0);
                if stage1.get(class).len() == 1 {
                    if let Some(service) = service_samplers.get_mut(class).draw() {
                        heap.push(now + service, Event::StageOneComplete(class));
                    }
                }
                if let Some(gap) = arrival_samplers.get_mut(class).draw() {
                    heap.push(now + gap, Event::Arrival(class));
                }
            }
            Event::StageOneComplete(class) => {
                let arrival = stage1
                    .get_mut(class)
                    .pop_front()
                    .expect("completion implies a queued packet");
                class_avg.get_mut(class).step(now, -1.0);
                if stage2.is_empty() {
                    if let Some(gap) = epoch_sampler.draw() {
                        heap.push(now + gap, Event::StageTwoEpoch);
                    }
                    busy_avg.step(now, 1.0);
                }
                stage2.push_back((arrival, class));
                stage2_avg.step(now, 1.0);
                if !stage1.get(class).is_empty() {
                    if let Some(service) = service_samplers.get_mut(class).draw() {
                        heap.push(now + service, Event::StageOneComplete(class));
                    }
                }
            }
            Event::StageTwoEpoch => {
                let served = stage2.len().min(batch_limit);
                for _ in 0..served {
                    let (arrival, class) = stage2.pop_front().expect("nonempty batch");
                    let delay = now - arrival;
                    *delivered.get_mut(class) += 1;
                    class_tally.get_mut(class).record(now, delay);
                    total_tally.record(now, delay);
                }
                stage2_avg.step(now, -(served as f64));
                if stage2.is_empty() {
                    busy_avg.step(now, -1.0);
                } else if let Some(gap) = epoch_sampler.draw() {
                    heap.push(now + gap, Event::StageTwoEpoch);
                }
            }
        }
    }

    let mut stage2_left = PerClass::splat(0u64);
    for &(_, class) in stage2.iter() {
        *stage2_left.get_mut(class) += 1;
    }

    Ok(SimReport {
        fidelity: Fidelity::QueueingNetwork,
        frame_length,
        class_delay: class_tally.map(|_, t| t.estimate()),
        total_delay: total_tally.estimate(),
        class_queue_bytes: class_avg.map(|_, avg| avg.finish() * frame_bytes),
        stage2_queue_bytes: stage2_avg.finish() * frame_bytes,
        utilization: busy_avg.finish(),
        cycle_mean: f64::NAN,
        cycle_max: f64::NAN,
        class_generated: generated,
        class_delivered: delivered,
        class_queued_end: PerClass::from_fn(|c| {
            stage1.get(c).len() as u64 + stage2_left.get(c)
        }),
        gates: None,
    })
}
