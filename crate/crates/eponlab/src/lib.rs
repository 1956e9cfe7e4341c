//! Analytic and discrete-event performance laboratory for EPON upstream
//! scheduling with adaptive-cycle polling and load-weighted GPS service.

// `!(x > 0.0)` is used throughout validation to reject NaN along with the
// out-of-range values; `x <= 0.0` would silently accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ctmc;
pub mod dimensioning;
pub mod error;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod traffic;
pub mod validate;

pub use analytic::{AnalyticReport, StationMetrics, StationParams};
pub use dimensioning::{DimensioningReport, SystemConfig};
pub use error::{Error, Result};
pub use scenario::{parse_scenario, Scenario};
pub use sim::{
    little_check, run_protocol_sim, run_queueing_sim, Fidelity, GateMessage, Packet,
    ReportMessage, SimConfig, SimReport,
};
pub use sweep::{emit_csv, run_sweep, SweepRow};
pub use traffic::{
    ClassSet, GpsAllocation, Normalization, PerClass, TrafficClass, TrafficProfile,
};
pub use validate::{all_passed, render_report, run_checks, CheckOutcome, ValidateOptions};
