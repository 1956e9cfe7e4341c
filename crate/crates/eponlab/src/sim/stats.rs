//! Measurement pieces shared by both simulation fidelities: batch-means
//! delay tallies with Student-t confidence intervals, and time-weighted
//! averages of queue content.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Point estimate with a 95% confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    /// Sample mean; NaN when no samples fell in the measurement window.
    pub mean: f64,
    /// 95% batch-means confidence half-width; NaN when fewer than two
    /// batches received samples.
    pub ci_half_width: f64,
    pub samples: u64,
}

/// Accumulates delay samples into equal-width time batches over the
/// measurement window.
#[derive(Clone, Debug)]
pub struct DelayTally {
    warmup: f64,
    duration: f64,
    batch_sum: Vec<f64>,
    batch_count: Vec<u64>,
}

impl DelayTally {
    pub fn new(warmup: f64, duration: f64, batches: usize) -> Self {
        debug_assert!(batches >= 2);
        debug_assert!(warmup < duration);
        Self {
            warmup,
            duration,
            batch_sum: vec![0.0; batches],
            batch_count: vec![0; batches],
        }
    }

    /// Records one delay sample, attributed to the batch containing the
    /// packet's departure instant. Samples outside the measurement window
    /// are discarded.
    pub fn record(&mut self, departure_time: f64, delay: f64) {
        if departure_time < self.warmup || departure_time > self.duration {
            return;
        }
        let width = (self.duration - self.warmup) / self.batch_sum.len() as f64;
        let index = (((departure_time - self.warmup) / width) as usize)
            .min(self.batch_sum.len() - 1);
        self.batch_sum[index] += delay;
        self.batch_count[index] += 1;
    }

    pub fn estimate(&self) -> Estimate {
        let samples: u64 = self.batch_count.iter().sum();
        if samples == 0 {
            return Estimate {
                mean: f64::NAN,
                ci_half_width: f64::NAN,
                samples: 0,
            };
        }
        let mean = self.batch_sum.iter().sum::<f64>() / samples as f64;
        let means: Vec<f64> = self
            .batch_sum
            .iter()
            .zip(self.batch_count.iter())
            .filter(|(_, &n)| n > 0)
            .map(|(&s, &n)| s / n as f64)
            .collect();
        let ci_half_width = if means.len() >= 2 {
            let b = means.len() as f64;
            let grand = means.iter().sum::<f64>() / b;
            let variance = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
            let t = StudentsT::new(0.0, 1.0, b - 1.0)
                .expect("valid t distribution")
                .inverse_cdf(0.975);
            t * (variance / b).sqrt()
        } else {
            f64::NAN
        };
        Estimate {
            mean,
            ci_half_width,
            samples,
        }
    }
}

/// Time-weighted average of a step function (queue content) over the
/// measurement window.
#[derive(Clone, Copy, Debug)]
pub struct TimeAverage {
    warmup: f64,
    duration: f64,
    level: f64,
    last_change: f64,
    weighted_sum: f64,
}

impl TimeAverage {
    pub fn new(warmup: f64, duration: f64) -> Self {
        debug_assert!(warmup < duration);
        Self {
            warmup,
            duration,
            level: 0.0,
            last_change: 0.0,
            weighted_sum: 0.0,
        }
    }

    /// Applies a level change at `now`, crediting the previous level for the
    /// elapsed overlap with the measurement window.
    pub fn step(&mut self, now: f64, delta: f64) {
        self.accumulate(now);
        self.level += delta;
        self.last_change = now;
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Final time average over `[warmup, duration]`.
    pub fn finish(mut self) -> f64 {
        self.accumulate(self.duration);
        self.weighted_sum / (self.duration - self.warmup)
    }

    fn accumulate(&mut self, now: f64) {
        let lo = self.last_change.max(self.warmup);
        let hi = now.min(self.duration);
        if hi > lo {
            self.weighted_sum += self.level * (hi - lo);
        }
    }
}

/// Accumulates busy time (e.g. transmission airtime) over the measurement
/// window from possibly clipped intervals.
#[derive(Clone, Copy, Debug)]
pub struct BusyTime {
    warmup: f64,
    duration: f64,
    total: f64,
}

impl BusyTime {
    pub fn new(warmup: f64, duration: f64) -> Self {
        Self {
            warmup,
            duration,
            total: 0.0,
        }
    }

    pub fn add_interval(&mut self, start: f64, end: f64) {
        let lo = start.max(self.warmup);
        let hi = end.min(self.duration);
        if hi > lo {
            self.total += hi - lo;
        }
    }

    /// Busy fraction of the measurement window.
    pub fn fraction(&self) -> f64 {
        self.total / (self.duration - self.warmup)
    }
}
