//! C ABI for the eponlab performance laboratory.
//!
//! Handles are opaque; every function returns an [`EponStatus`] and writes
//! results through out-pointers. Undefined quantities (zero-load delays,
//! checks without samples) cross the boundary as NaN, unstable means as
//! infinity. On any non-OK status, `eponlab_last_error_message` returns a
//! thread-local description valid until the next failing call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eponlab::analytic::evaluate;
use eponlab::error::Error;
use eponlab::scenario::{parse_scenario, Scenario};
use eponlab::sim::{little_check, run_protocol_sim, run_queueing_sim, Fidelity, SimConfig};
use eponlab::sweep::{emit_csv, run_sweep};
use eponlab::validate::{all_passed, render_report, run_checks, ValidateOptions};

/// Status code returned by every API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EponStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A text argument was not valid UTF-8.
    InvalidText = 2,
    /// Scenario text was rejected; the error message names the line.
    ParseError = 3,
    /// Parameters violate a model precondition.
    ConfigError = 4,
    /// The requested quantity needs a stationary regime that does not
    /// exist at these parameters.
    Unstable = 5,
    /// One or more built-in validation checks failed.
    CheckFailed = 6,
    /// Unexpected internal failure.
    Internal = 7,
}

/// Opaque experiment description created by `eponlab_scenario_parse` or
/// `eponlab_scenario_default` and released by `eponlab_scenario_free`.
pub struct EponScenario {
    inner: Scenario,
}

/// Closed-form steady-state figures for one ONU at one offered load.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EponAnalyticResult {
    pub load: f64,
    /// Total per-ONU arrival rate in packets/second.
    pub lambda_pps: f64,
    pub rho_ef: f64,
    pub rho_af: f64,
    pub rho_be: f64,
    pub rho_stage2: f64,
    /// True when every station is stable.
    pub stable: bool,
    /// Geometric parameter of the grant stage; NaN when it is unstable.
    pub r0: f64,
    pub en_ef_pkts: f64,
    pub en_af_pkts: f64,
    pub en_be_pkts: f64,
    pub en_stage2_pkts: f64,
    pub en_total_bytes: f64,
    pub et_ef_s: f64,
    pub et_af_s: f64,
    pub et_be_s: f64,
    pub et_total_s: f64,
}

/// Measured figures from one simulation run.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EponSimResult {
    pub et_total_s: f64,
    /// 95% batch-means confidence half-width.
    pub et_ci_s: f64,
    pub et_ef_s: f64,
    pub et_af_s: f64,
    pub et_be_s: f64,
    pub utilization: f64,
    /// Mean polling cycle; NaN under queueing fidelity.
    pub cycle_mean_s: f64,
    pub cycle_max_s: f64,
    pub generated: u64,
    pub delivered: u64,
    /// Relative gap between time-average occupancy over arrival rate and
    /// the measured mean delay; NaN when undefined.
    pub little_gap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("no error").expect("static message"));
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("sanitized message");
    });
}

fn status_for(error: &Error) -> EponStatus {
    match error {
        Error::Parse { .. } => EponStatus::ParseError,
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::InfeasibleCycle { .. } => {
            EponStatus::ConfigError
        }
        Error::UnstableStation { .. } | Error::NoStationaryDistribution => EponStatus::Unstable,
        _ => EponStatus::Internal,
    }
}

fn fail(error: &Error) -> EponStatus {
    set_error(&error.to_string());
    status_for(error)
}

fn guarded<F: FnOnce() -> EponStatus>(body: F) -> EponStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            EponStatus::Internal
        }
    }
}

/// Message for the most recent failure on this thread. Never null; the
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eponlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses scenario text (UTF-8, `key = value` lines) into a new handle.
///
/// # Safety
///
/// `text` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer; both must be non-null.
#[no_mangle]
pub unsafe extern "C" fn eponlab_scenario_parse(
    text: *const c_char,
    out: *mut *mut EponScenario,
) -> EponStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            set_error("text and out must be non-null");
            return EponStatus::NullArgument;
        }
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            set_error("scenario text is not valid UTF-8");
            return EponStatus::InvalidText;
        };
        match parse_scenario(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(EponScenario { inner }));
                EponStatus::Ok
            }
            Err(error) => fail(&error),
        }
    })
}

/// Creates the reference deployment scenario.
///
/// # Safety
///
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn eponlab_scenario_default(out: *mut *mut EponScenario) -> EponStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must be non-null");
            return EponStatus::NullArgument;
        }
        *out = Box::into_raw(Box::new(EponScenario {
            inner: Scenario::default_scenario(),
        }));
        EponStatus::Ok
    })
}

/// Releases a scenario handle. Null is a no-op.
///
/// # Safety
///
/// `scenario` must be null or a handle from this library that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn eponlab_scenario_free(scenario: *mut EponScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Evaluates the closed-form model at one offered load. Instability is
/// reported through the `stable` flag and infinite means, not a status.
///
/// # Safety
///
/// `scenario` must be a live handle from this library and `out` must point
/// to writable storage for one `EponAnalyticResult`.
#[no_mangle]
pub unsafe extern "C" fn eponlab_analytic_report(
    scenario: *const EponScenario,
    load: f64,
    out: *mut EponAnalyticResult,
) -> EponStatus {
    guarded(|| {
        if scenario.is_null() || out.is_null() {
            set_error("scenario and out must be non-null");
            return EponStatus::NullArgument;
        }
        let scenario = &(*scenario).inner;
        let profile = match scenario.profile_at(load) {
            Ok(profile) => profile,
            Err(error) => return fail(&error),
        };
        let report = match evaluate(&scenario.config, &profile, 0) {
            Ok(report) => report,
            Err(error) => return fail(&error),
        };
        let frame = f64::from(scenario.config.frame_length);
        *out = EponAnalyticResult {
            load,
            lambda_pps: report.throughput,
            rho_ef: report.per_class.ef.utilization,
            rho_af: report.per_class.af.utilization,
            rho_be: report.per_class.be.utilization,
            rho_stage2: report.stage2.utilization,
            stable: report.all_stable,
            r0: report.stage2.marginal_ratio,
            en_ef_pkts: report.per_class.ef.expected_count,
            en_af_pkts: report.per_class.af.expected_count,
            en_be_pkts: report.per_class.be.expected_count,
            en_stage2_pkts: report.stage2.expected_count,
            en_total_bytes: report.expected_total * frame,
            et_ef_s: report.class_delay.ef,
            et_af_s: report.class_delay.af,
            et_be_s: report.class_delay.be,
            et_total_s: report.mean_delay,
        };
        EponStatus::Ok
    })
}

/// Runs one simulation at the scenario's fidelity, duration, and warmup.
///
/// # Safety
///
/// `scenario` must be a live handle from this library and `out` must point
/// to writable storage for one `EponSimResult`.
#[no_mangle]
pub unsafe extern "C" fn eponlab_simulate(
    scenario: *const EponScenario,
    load: f64,
    seed: u64,
    out: *mut EponSimResult,
) -> EponStatus {
    guarded(|| {
        if scenario.is_null() || out.is_null() {
            set_error("scenario and out must be non-null");
            return EponStatus::NullArgument;
        }
        let scenario = &(*scenario).inner;
        let profile = match scenario.profile_at(load) {
            Ok(profile) => profile,
            Err(error) => return fail(&error),
        };
        let analytic = match evaluate(&scenario.config, &profile, 0) {
            Ok(report) => report,
            Err(error) => return fail(&error),
        };
        let sim = match SimConfig::new(
            seed,
            scenario.sim_duration,
            scenario.warmup,
            scenario.fidelity,
            10,
        ) {
            Ok(sim) => sim,
            Err(error) => return fail(&error),
        };
        let report = match scenario.fidelity {
            Fidelity::QueueingNetwork => {
                run_queueing_sim(&analytic.stations, scenario.config.frame_length, &sim)
            }
            Fidelity::Protocol => run_protocol_sim(&scenario.config, &profile, &sim),
        };
        let report = match report {
            Ok(report) => report,
            Err(error) => return fail(&error),
        };
        let lambda_effective = match scenario.fidelity {
            Fidelity::QueueingNetwork => analytic.throughput,
            Fidelity::Protocol => analytic.throughput * scenario.config.n_onus as f64,
        };
        *out = EponSimResult {
            et_total_s: report.total_delay.mean,
            et_ci_s: report.total_delay.ci_half_width,
            et_ef_s: report.class_delay.ef.mean,
            et_af_s: report.class_delay.af.mean,
            et_be_s: report.class_delay.be.mean,
            utilization: report.utilization,
            cycle_mean_s: report.cycle_mean,
            cycle_max_s: report.cycle_max,
            generated: report.total_generated(),
            delivered: report.total_delivered(),
            little_gap: little_check(&report, lambda_effective).unwrap_or(f64::NAN),
        };
        EponStatus::Ok
    })
}

fn export_string(text: &str, out: *mut *mut c_char) -> EponStatus {
    let c_text = match CString::new(text) {
        Ok(c_text) => c_text,
        Err(_) => {
            set_error("output contained an interior NUL byte");
            return EponStatus::Internal;
        }
    };
    let bytes = c_text.as_bytes_with_nul();
    let buffer = unsafe { libc::malloc(bytes.len()) }.cast::<c_char>();
    if buffer.is_null() {
        set_error("allocation failed");
        return EponStatus::Internal;
    }
    unsafe {
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, bytes.len());
        *out = buffer;
    }
    EponStatus::Ok
}

/// Runs the load sweep and returns the CSV as a malloc'd NUL-terminated
/// string in `*out_csv`; release it with `eponlab_string_free`.
///
/// # Safety
///
/// `scenario` must be a live handle from this library and `out_csv` must
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn eponlab_sweep_csv(
    scenario: *const EponScenario,
    with_simulation: bool,
    out_csv: *mut *mut c_char,
) -> EponStatus {
    guarded(|| {
        if scenario.is_null() || out_csv.is_null() {
            set_error("scenario and out_csv must be non-null");
            return EponStatus::NullArgument;
        }
        let scenario = &(*scenario).inner;
        let rows = match run_sweep(scenario, with_simulation) {
            Ok(rows) => rows,
            Err(error) => return fail(&error),
        };
        match emit_csv(&rows) {
            Ok(csv) => export_string(&csv, out_csv),
            Err(error) => fail(&error),
        }
    })
}

/// Runs the built-in cross-validation suite. Returns `Ok` when every check
/// passes, `CheckFailed` otherwise. When `out_report` is non-null it
/// receives the per-check report as a malloc'd string; release it with
/// `eponlab_string_free`.
///
/// # Safety
///
/// `out_report` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn eponlab_validate(out_report: *mut *mut c_char) -> EponStatus {
    guarded(|| {
        let outcomes = match run_checks(&ValidateOptions::default()) {
            Ok(outcomes) => outcomes,
            Err(error) => return fail(&error),
        };
        let report = render_report(&outcomes);
        if !out_report.is_null() {
            let status = export_string(&report, out_report);
            if status != EponStatus::Ok {
                return status;
            }
        }
        if all_passed(&outcomes) {
            EponStatus::Ok
        } else {
            set_error("one or more validation checks failed");
            EponStatus::CheckFailed
        }
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
///
/// `text` must be null or a string returned by this library that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn eponlab_string_free(text: *mut c_char) {
    if !text.is_null() {
        libc::free(text.cast());
    }
}
