//! Built-in cross-validation suite: checks the closed forms, the CTMC
//! oracles, and the simulator against one another and reports one
//! pass/fail line per check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::analytic::{
    batch_metrics, batch_root, evaluate, joint_state_probability, mm1_metrics, StationParams,
};
use crate::ctmc::{ctmc_oracle_batch_auto, ctmc_oracle_mm1, distribution_mean};
use crate::dimensioning::{
    compute_guaranteed_bandwidth, compute_max_cycle, solve_wmax_for_cycle, SystemConfig,
};
use crate::error::Result;
use crate::scenario::Scenario;
use crate::sim::{little_check, run_queueing_sim, Fidelity, SimConfig};
use crate::traffic::TrafficClass;

/// Knobs for deliberate fault injection in tests. Zero values leave the
/// checks faithful.
#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    /// Added to the computed batch root before the CTMC comparison.
    pub root_perturbation: f64,
}

/// Result of one named check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(1e-300)
}

fn check_dimensioning_defaults() -> Result<CheckOutcome> {
    let config = SystemConfig::homogeneous(16, 1e9, 5e-6, 1500, 15000)?;
    let t_max = compute_max_cycle(&config);
    let bandwidth = compute_guaranteed_bandwidth(&config, t_max)?[0];
    let window = solve_wmax_for_cycle(16, 1e9, 5e-6, 2e-3)?;
    let cycle_err = rel_err(t_max, 2e-3);
    let bw_err = rel_err(bandwidth, 60e6);
    let passed = cycle_err < 1e-12 && bw_err < 1e-12 && window == 15000;
    Ok(outcome(
        "dimensioning-defaults",
        passed,
        format!("cycle err {cycle_err:.2e}, bandwidth err {bw_err:.2e}, window {window}"),
    ))
}

fn check_batch_k1_reduction() -> Result<CheckOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mu = rng.gen_range(0.1..100.0);
        let rho = rng.gen_range(0.01..0.99);
        let params = StationParams::new(rho * mu, mu, 1)?;
        let batch = batch_metrics(&params);
        let single = mm1_metrics(&params);
        worst = worst
            .max((batch.marginal_ratio - single.marginal_ratio).abs())
            .max(rel_err(batch.expected_count, single.expected_count));
    }
    Ok(outcome(
        "batch-k1-reduction",
        worst < 1e-10,
        format!("worst deviation {worst:.2e} over 200 random stations"),
    ))
}

fn check_ctmc_mm1_agreement() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for rho in [0.2, 0.5, 0.9] {
        let params = StationParams::new(rho * 3.0, 3.0, 1)?;
        let closed = mm1_metrics(&params).expected_count;
        let dist = ctmc_oracle_mm1(params.arrival_rate, params.service_rate, 2048)?;
        worst = worst.max(rel_err(distribution_mean(&dist), closed));
    }
    Ok(outcome(
        "ctmc-mm1-agreement",
        worst < 1e-6,
        format!("worst mean error {worst:.2e}"),
    ))
}

fn check_ctmc_batch_agreement(options: &ValidateOptions) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for k in [2u32, 5, 10] {
        for load in [0.3, 0.7] {
            let mu = 1.0;
            let params = StationParams::new(load * f64::from(k) * mu, mu, k)?;
            let root = batch_root(&params)? + options.root_perturbation;
            let closed = root / (1.0 - root);
            let dist = ctmc_oracle_batch_auto(
                params.arrival_rate,
                params.service_rate,
                params.batch_size,
            )?;
            worst = worst.max(rel_err(distribution_mean(&dist), closed));
        }
    }
    Ok(outcome(
        "ctmc-batch-agreement",
        worst < 1e-6,
        format!("worst mean error {worst:.2e} over the K x load grid"),
    ))
}

fn check_delay_decomposition() -> Result<CheckOutcome> {
    let scenario = Scenario::default_scenario();
    let mut worst = 0.0f64;
    for load in [0.005, 0.015, 0.03] {
        let profile = scenario.profile_at(load)?;
        let report = evaluate(&scenario.config, &profile, 0)?;
        let lambda = report.throughput;
        let r0 = report.stage2.marginal_ratio;
        let mut expansion = r0 / (lambda * (1.0 - r0));
        for class in TrafficClass::ALL {
            let rho = report.per_class.get(class).utilization;
            expansion += rho / ((1.0 - rho) * lambda);
        }
        worst = worst.max(rel_err(report.mean_delay, expansion));
    }
    Ok(outcome(
        "delay-decomposition",
        worst < 1e-9,
        format!("worst identity error {worst:.2e}"),
    ))
}

fn check_little_analytic() -> Result<CheckOutcome> {
    let scenario = Scenario::default_scenario();
    let mut worst = 0.0f64;
    for load in [0.01, 0.025] {
        let profile = scenario.profile_at(load)?;
        let report = evaluate(&scenario.config, &profile, 0)?;
        worst = worst.max(rel_err(
            report.expected_total,
            report.throughput * report.mean_delay,
        ));
    }
    Ok(outcome(
        "little-analytic",
        worst < 1e-12,
        format!("worst count-vs-rate-times-delay error {worst:.2e}"),
    ))
}

fn check_product_form_normalization() -> Result<CheckOutcome> {
    let scenario = Scenario::default_scenario();
    let profile = scenario.profile_at(0.02)?;
    let report = evaluate(&scenario.config, &profile, 0)?;
    let m = 18u64;
    let mut box_sum = 0.0;
    for n1 in 0..=m {
        for n2 in 0..=m {
            for n3 in 0..=m {
                for n4 in 0..=m {
                    box_sum += joint_state_probability([n1, n2, n3, n4], &report)?;
                }
            }
        }
    }
    let mut expected = 1.0;
    for class in TrafficClass::ALL {
        let q = report.per_class.get(class).marginal_ratio;
        expected *= 1.0 - q.powi(m as i32 + 1);
    }
    expected *= 1.0 - report.stage2.marginal_ratio.powi(m as i32 + 1);
    let err = rel_err(box_sum, expected);
    Ok(outcome(
        "product-form-normalization",
        err < 1e-9,
        format!("box sum error {err:.2e}"),
    ))
}

fn check_sim_determinism() -> Result<CheckOutcome> {
    let scenario = Scenario::default_scenario();
    let profile = scenario.profile_at(0.02)?;
    let report = evaluate(&scenario.config, &profile, 0)?;
    let sim = SimConfig::new(42, 2.0, 0.2, Fidelity::QueueingNetwork, 5)?;
    let a = run_queueing_sim(&report.stations, scenario.config.frame_length, &sim)?;
    let b = run_queueing_sim(&report.stations, scenario.config.frame_length, &sim)?;
    let other = SimConfig::new(43, 2.0, 0.2, Fidelity::QueueingNetwork, 5)?;
    let c = run_queueing_sim(&report.stations, scenario.config.frame_length, &other)?;
    let passed = a.same_results(&b) && !a.same_results(&c);
    Ok(outcome(
        "sim-determinism",
        passed,
        format!(
            "same-seed identical: {}, cross-seed distinct: {}",
            a.same_results(&b),
            !a.same_results(&c)
        ),
    ))
}

fn check_little_empirical() -> Result<CheckOutcome> {
    let scenario = Scenario::default_scenario();
    let profile = scenario.profile_at(0.02)?;
    let report = evaluate(&scenario.config, &profile, 0)?;
    let sim = SimConfig::new(7, 20.0, 2.0, Fidelity::QueueingNetwork, 10)?;
    let run = run_queueing_sim(&report.stations, scenario.config.frame_length, &sim)?;
    let gap = little_check(&run, report.throughput)?;
    Ok(outcome(
        "little-empirical",
        gap < 0.02,
        format!("relative discrepancy {gap:.4}"),
    ))
}

/// Runs every check; a failed comparison is a failed outcome, not an error.
/// Errors surface only for broken preconditions inside the suite itself.
pub fn run_checks(options: &ValidateOptions) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_dimensioning_defaults()?,
        check_batch_k1_reduction()?,
        check_ctmc_mm1_agreement()?,
        check_ctmc_batch_agreement(options)?,
        check_delay_decomposition()?,
        check_little_analytic()?,
        check_product_form_normalization()?,
        check_sim_determinism()?,
        check_little_empirical()?,
    ])
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

/// One line per check plus a summary line.
pub fn render_report(outcomes: &[CheckOutcome]) -> String {
    let mut out = String::new();
    for check in outcomes {
        let status = if check.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{}: {} ({})\n", check.name, status, check.detail));
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name)
        .collect();
    if failed.is_empty() {
        out.push_str(&format!("all {} checks passed\n", outcomes.len()));
    } else {
        out.push_str(&format!("failed checks: {}\n", failed.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_suite_passes() {
        let outcomes = run_checks(&ValidateOptions::default()).unwrap();
        assert!(outcomes.len() >= 6);
        for check in &outcomes {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
        let names: std::collections::HashSet<&str> =
            outcomes.iter().map(|o| o.name).collect();
        assert_eq!(names.len(), outcomes.len(), "check names must be distinct");
    }

    #[test]
    fn injected_root_error_fails_batch_agreement() {
        let outcomes = run_checks(&ValidateOptions {
            root_perturbation: 1e-2,
        })
        .unwrap();
        let batch = outcomes
            .iter()
            .find(|o| o.name == "ctmc-batch-agreement")
            .unwrap();
        assert!(!batch.passed);
        assert!(!all_passed(&outcomes));
        let report = render_report(&outcomes);
        assert!(report.contains("ctmc-batch-agreement: FAIL"));
        assert!(report.contains("failed checks: ctmc-batch-agreement"));
    }

    #[test]
    fn report_lists_every_check() {
        let outcomes = run_checks(&ValidateOptions::default()).unwrap();
        let report = render_report(&outcomes);
        for check in &outcomes {
            assert!(report.contains(check.name));
        }
        assert!(report.ends_with('\n'));
    }
}
