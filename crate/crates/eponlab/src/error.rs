//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by configuration validation, the analytic engine,
/// the simulators and the scenario front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A type invariant was violated while building a configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An operation received an argument outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested cycle time cannot even cover the guard intervals.
    #[error(
        "infeasible cycle: target {target_s} s does not exceed {n_onus} guard intervals of {guard_s} s"
    )]
    InfeasibleCycle {
        target_s: f64,
        n_onus: usize,
        guard_s: f64,
    },

    /// Per-class service shares are undefined when no traffic is offered.
    #[error("service shares are undefined at zero offered load")]
    UndefinedShares,

    /// A station's arrival rate meets or exceeds its service capacity.
    #[error("unstable station: arrival rate {arrival_rate} pkt/s >= capacity {capacity} pkt/s")]
    UnstableStation { arrival_rate: f64, capacity: f64 },

    /// Joint state probabilities require every station to be stable.
    #[error("no stationary distribution: at least one station is unstable")]
    NoStationaryDistribution,

    /// A truncated state space left too much probability mass in the tail.
    #[error("truncation too small: estimated tail mass {tail:e} is not below {bound:e}")]
    TruncationTooSmall { tail: f64, bound: f64 },

    /// The scenario text could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// CSV emission was asked to render an empty row set.
    #[error("no rows to emit")]
    EmptyOutput,

    /// A consistency check was requested on a run with no delivered packets.
    #[error("check undefined: the run delivered no packets")]
    UndefinedCheck,

    /// An I/O failure while reading configs or writing reports.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
