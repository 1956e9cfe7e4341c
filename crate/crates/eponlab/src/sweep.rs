//! Load sweeps: evaluates the closed-form model over a grid of offered
//! loads, optionally pairs each stable point with a simulation run, and
//! renders the results as CSV.

use rayon::prelude::*;

use crate::analytic::evaluate;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::sim::{run_protocol_sim, run_queueing_sim, Fidelity};
use crate::traffic::PerClass;

/// One evaluated grid point.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub load: f64,
    /// Total per-ONU arrival rate in packets/second.
    pub lambda_pps: f64,
    pub rho: PerClass<f64>,
    pub rho_stage2: f64,
    /// True when every station is stable at this load.
    pub stable: bool,
    /// Geometric parameter of the grant stage; NaN when it is unstable.
    pub r0: f64,
    pub en_pkts: PerClass<f64>,
    pub en_stage2_pkts: f64,
    pub en_total_bytes: f64,
    pub et_s: PerClass<f64>,
    pub et_total_s: f64,
    /// Simulated total mean delay; None when simulation was skipped.
    pub sim_et_total_s: Option<f64>,
    pub sim_ci_s: Option<f64>,
}

fn compute_row(
    scenario: &Scenario,
    index: usize,
    load: f64,
    with_simulation: bool,
) -> Result<SweepRow> {
    let profile = scenario.profile_at(load)?;
    let report = evaluate(&scenario.config, &profile, 0)?;

    let en_pkts = report.per_class.map(|_, m| m.expected_count);
    let en_stage2_pkts = report.stage2.expected_count;
    let total_pkts = en_pkts.ef + en_pkts.af + en_pkts.be + en_stage2_pkts;
    let en_total_bytes = total_pkts * f64::from(scenario.config.frame_length);

    let (sim_et_total_s, sim_ci_s) = if with_simulation && report.all_stable {
        let sim = scenario.sim_config(index)?;
        let sim_report = match scenario.fidelity {
            Fidelity::QueueingNetwork => {
                run_queueing_sim(&report.stations, scenario.config.frame_length, &sim)?
            }
            Fidelity::Protocol => run_protocol_sim(&scenario.config, &profile, &sim)?,
        };
        (
            Some(sim_report.total_delay.mean),
            Some(sim_report.total_delay.ci_half_width),
        )
    } else {
        (None, None)
    };

    Ok(SweepRow {
        load,
        lambda_pps: report.throughput,
        rho: report.per_class.map(|_, m| m.utilization),
        rho_stage2: report.stage2.utilization,
        stable: report.all_stable,
        r0: report.stage2.marginal_ratio,
        en_pkts,
        en_stage2_pkts,
        en_total_bytes,
        et_s: report.class_delay,
        et_total_s: report.mean_delay,
        sim_et_total_s,
        sim_ci_s,
    })
}

/// Evaluates every grid load, in parallel, rows ordered by load ascending.
/// Unstable points keep their analytic flags and skip simulation.
pub fn run_sweep(scenario: &Scenario, with_simulation: bool) -> Result<Vec<SweepRow>> {
    scenario
        .loads()
        .par_iter()
        .enumerate()
        .map(|(index, &load)| compute_row(scenario, index, load, with_simulation))
        .collect()
}

pub const CSV_HEADER: &str = "load,lambda_pps,rho_ef,rho_af,rho_be,rho_stage2,stable,r0,\
en_ef_pkts,en_af_pkts,en_be_pkts,en_stage2_pkts,en_total_bytes,\
et_ef_s,et_af_s,et_be_s,et_total_s,sim_et_total_s,sim_ci_s";

fn cell(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.17e}")
    } else {
        String::new()
    }
}

fn optional_cell(value: Option<f64>) -> String {
    value.map_or_else(String::new, cell)
}

/// Renders rows as CSV with the fixed header, 18 significant digits per
/// finite number, empty cells for undefined or unstable quantities, and a
/// trailing newline.
pub fn emit_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyOutput);
    }
    let mut out = String::with_capacity(256 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let fields = [
            cell(row.load),
            cell(row.lambda_pps),
            cell(row.rho.ef),
            cell(row.rho.af),
            cell(row.rho.be),
            cell(row.rho_stage2),
            if row.stable { "true" } else { "false" }.to_string(),
            cell(row.r0),
            cell(row.en_pkts.ef),
            cell(row.en_pkts.af),
            cell(row.en_pkts.be),
            cell(row.en_stage2_pkts),
            cell(row.en_total_bytes),
            cell(row.et_s.ef),
            cell(row.et_s.af),
            cell(row.et_s.be),
            cell(row.et_total_s),
            optional_cell(row.sim_et_total_s),
            optional_cell(row.sim_ci_s),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
