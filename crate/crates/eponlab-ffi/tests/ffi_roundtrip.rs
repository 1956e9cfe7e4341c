//! Exercises the C ABI end to end from Rust: handle lifecycle, analytic
//! and simulation calls, CSV export, error reporting, and the validation
//! suite.

use std::ffi::{CStr, CString};
use std::ptr;

use eponlab_ffi::{
    eponlab_analytic_report, eponlab_last_error_message, eponlab_scenario_default,
    eponlab_scenario_free, eponlab_scenario_parse, eponlab_simulate, eponlab_string_free,
    eponlab_sweep_csv, eponlab_validate, EponAnalyticResult, EponScenario, EponSimResult,
    EponStatus,
};

fn zeroed_analytic() -> EponAnalyticResult {
    unsafe { std::mem::zeroed() }
}

fn zeroed_sim() -> EponSimResult {
    unsafe { std::mem::zeroed() }
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(eponlab_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn default_scenario_analytic_roundtrip() {
    unsafe {
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(eponlab_scenario_default(&mut scenario), EponStatus::Ok);
        assert!(!scenario.is_null());

        let mut result = zeroed_analytic();
        assert_eq!(
            eponlab_analytic_report(scenario, 0.02, &mut result),
            EponStatus::Ok
        );
        assert!(result.stable);
        assert!((result.lambda_pps - 0.02 * 1e9 / 12000.0).abs() < 1e-6);
        assert!(result.et_total_s > 0.0 && result.et_total_s.is_finite());
        assert!(result.r0 > 0.0 && result.r0 < 1.0);
        let total = result.en_ef_pkts
            + result.en_af_pkts
            + result.en_be_pkts
            + result.en_stage2_pkts;
        assert!((result.en_total_bytes - total * 1500.0).abs() < 1e-6);

        eponlab_scenario_free(scenario);
    }
}

#[test]
fn unstable_load_reports_flag_and_infinite_delay() {
    unsafe {
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(eponlab_scenario_default(&mut scenario), EponStatus::Ok);
        let mut result = zeroed_analytic();
        assert_eq!(
            eponlab_analytic_report(scenario, 0.1, &mut result),
            EponStatus::Ok
        );
        assert!(!result.stable);
        assert!(result.et_total_s.is_infinite());
        eponlab_scenario_free(scenario);
    }
}

#[test]
fn zero_load_delay_is_nan() {
    unsafe {
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(eponlab_scenario_default(&mut scenario), EponStatus::Ok);
        let mut result = zeroed_analytic();
        assert_eq!(
            eponlab_analytic_report(scenario, 0.0, &mut result),
            EponStatus::Ok
        );
        assert!(result.stable);
        assert!(result.et_total_s.is_nan());
        assert_eq!(result.en_total_bytes, 0.0);
        eponlab_scenario_free(scenario);
    }
}

#[test]
fn parse_and_simulate_small_run() {
    unsafe {
        let text = CString::new(
            "load_start = 0.02\nload_end = 0.02\nload_steps = 1\n\
sim_duration_s = 2\nwarmup_s = 0.2\nseed = 5\n",
        )
        .unwrap();
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(
            eponlab_scenario_parse(text.as_ptr(), &mut scenario),
            EponStatus::Ok
        );

        let mut result = zeroed_sim();
        assert_eq!(
            eponlab_simulate(scenario, 0.02, 5, &mut result),
            EponStatus::Ok
        );
        assert!(result.delivered > 0);
        assert!(result.generated >= result.delivered);
        assert!(result.et_total_s > 0.0);
        assert!(result.et_ci_s.is_finite());
        assert!(result.cycle_mean_s.is_nan());
        assert!(result.little_gap < 0.1);

        let mut repeat = zeroed_sim();
        assert_eq!(
            eponlab_simulate(scenario, 0.02, 5, &mut repeat),
            EponStatus::Ok
        );
        assert_eq!(result.et_total_s, repeat.et_total_s);
        assert_eq!(result.delivered, repeat.delivered);

        eponlab_scenario_free(scenario);
    }
}

#[test]
fn sweep_csv_exports_and_frees() {
    unsafe {
        let text = CString::new("load_steps = 3\n").unwrap();
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(
            eponlab_scenario_parse(text.as_ptr(), &mut scenario),
            EponStatus::Ok
        );
        let mut csv: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(
            eponlab_sweep_csv(scenario, false, &mut csv),
            EponStatus::Ok
        );
        assert!(!csv.is_null());
        let content = CStr::from_ptr(csv).to_str().unwrap();
        assert_eq!(content.lines().count(), 4);
        assert!(content.starts_with("load,lambda_pps,"));
        eponlab_string_free(csv);
        eponlab_scenario_free(scenario);
    }
}

#[test]
fn parse_errors_set_status_and_message() {
    unsafe {
        let text = CString::new("n_onus = 8\nwat = 1\n").unwrap();
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(
            eponlab_scenario_parse(text.as_ptr(), &mut scenario),
            EponStatus::ParseError
        );
        assert!(scenario.is_null());
        let message = last_error();
        assert!(message.contains("line 2"), "message: {message}");
        assert!(message.contains("wat"), "message: {message}");
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(
            eponlab_scenario_parse(ptr::null(), ptr::null_mut()),
            EponStatus::NullArgument
        );
        assert_eq!(eponlab_scenario_default(ptr::null_mut()), EponStatus::NullArgument);
        let mut result = zeroed_analytic();
        assert_eq!(
            eponlab_analytic_report(ptr::null(), 0.1, &mut result),
            EponStatus::NullArgument
        );
        eponlab_scenario_free(ptr::null_mut());
        eponlab_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_load_maps_to_config_error() {
    unsafe {
        let mut scenario: *mut EponScenario = ptr::null_mut();
        assert_eq!(eponlab_scenario_default(&mut scenario), EponStatus::Ok);
        let mut result = zeroed_analytic();
        assert_eq!(
            eponlab_analytic_report(scenario, 1.5, &mut result),
            EponStatus::ConfigError
        );
        assert!(!last_error().is_empty());
        eponlab_scenario_free(scenario);
    }
}

#[test]
fn validation_suite_passes_over_ffi() {
    unsafe {
        let mut report: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(eponlab_validate(&mut report), EponStatus::Ok);
        assert!(!report.is_null());
        let text = CStr::from_ptr(report).to_str().unwrap();
        assert!(text.lines().filter(|l| l.contains(": PASS")).count() >= 6);
        eponlab_string_free(report);
    }
}
