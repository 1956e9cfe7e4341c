use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eponlab::analytic::evaluate;
use eponlab::dimensioning::DimensioningReport;
use eponlab::error::Error;
use eponlab::scenario::{parse_scenario, Scenario};
use eponlab::sim::{little_check, run_protocol_sim, run_queueing_sim, Fidelity, SimReport};
use eponlab::sweep::{emit_csv, run_sweep};
use eponlab::traffic::Normalization;
use eponlab::validate::{all_passed, render_report, run_checks, ValidateOptions};

/// Performance laboratory for EPON upstream scheduling with adaptive-cycle
/// polling and load-weighted GPS service.
#[derive(Parser)]
#[command(name = "eponlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form model over the scenario's load grid.
    Analytic(CommonArgs),
    /// Simulate every grid load at the scenario's fidelity.
    Simulate(CommonArgs),
    /// Emit the load sweep as CSV.
    Sweep(SweepArgs),
    /// Run the built-in cross-validation suite.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file; reference defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also simulate each stable grid point.
    #[arg(long = "with-sim")]
    with_sim: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK: u8 = 2;

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig(_)
        | Error::InvalidArgument(_)
        | Error::InfeasibleCycle { .. }
        | Error::Parse { .. }
        | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_CHECK,
    }
}

fn load_scenario(config: Option<&Path>) -> Result<Scenario, Error> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_scenario(&text)
        }
        None => Ok(Scenario::default_scenario()),
    }
}

fn write_output(output: Option<&Path>, content: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn normalization_label(normalization: Normalization) -> &'static str {
    match normalization {
        Normalization::ChannelCapacity => "channel capacity",
        Normalization::GuaranteedBandwidth => "guaranteed bandwidth",
    }
}

fn fidelity_label(fidelity: Fidelity) -> &'static str {
    match fidelity {
        Fidelity::Protocol => "protocol",
        Fidelity::QueueingNetwork => "queueing",
    }
}

fn scenario_banner(scenario: &Scenario) -> Result<String, Error> {
    let dim = DimensioningReport::from_config(&scenario.config)?;
    let mut out = String::new();
    writeln!(
        out,
        "scenario: n_onus={} line_rate_bps={:e} guard_s={:e} frame_bytes={} w_max_bytes={}",
        scenario.config.n_onus,
        scenario.config.line_rate,
        scenario.config.guard,
        scenario.config.frame_length,
        scenario.config.w_max[0],
    )
    .unwrap();
    writeln!(
        out,
        "dimensioning: t_max_s={:e} lambda_min_bps={:e} batch_k={}",
        dim.t_max, dim.lambda_min[0], dim.batch_size[0],
    )
    .unwrap();
    writeln!(
        out,
        "mix: ef={:.6} af={:.6} be={:.6}  weights: ef={:.6} af={:.6} be={:.6}",
        scenario.mix.ef,
        scenario.mix.af,
        scenario.mix.be,
        scenario.weights.ef,
        scenario.weights.af,
        scenario.weights.be,
    )
    .unwrap();
    Ok(out)
}

fn number(value: f64) -> String {
    if value.is_nan() {
        "undefined".to_string()
    } else if value.is_infinite() {
        "inf".to_string()
    } else {
        format!("{value:.9e}")
    }
}

fn run_analytic(args: &CommonArgs) -> Result<(), Error> {
    let scenario = load_scenario(args.config.as_deref())?;
    let mut out = String::new();
    out.push_str("# closed-form steady-state report\n");
    writeln!(
        out,
        "# scope: one ONU; offered load normalized against {}",
        normalization_label(scenario.normalization)
    )
    .unwrap();
    out.push_str(
        "# note: per-class delay is a reconstruction (per-class stage-one count over \
class arrival rate, plus the shared grant-stage delay; the grant stage is \
class-blind), not part of the source model\n",
    );
    out.push_str(&scenario_banner(&scenario)?);
    for load in scenario.loads() {
        let profile = scenario.profile_at(load)?;
        let report = evaluate(&scenario.config, &profile, 0)?;
        writeln!(out, "\nload={load:.6}").unwrap();
        writeln!(out, "  lambda_pps={}", number(report.throughput)).unwrap();
        writeln!(
            out,
            "  rho: ef={} af={} be={} stage2={}",
            number(report.per_class.ef.utilization),
            number(report.per_class.af.utilization),
            number(report.per_class.be.utilization),
            number(report.stage2.utilization),
        )
        .unwrap();
        writeln!(
            out,
            "  stable: ef={} af={} be={} stage2={} system={}",
            report.per_class.ef.stable,
            report.per_class.af.stable,
            report.per_class.be.stable,
            report.stage2.stable,
            report.all_stable,
        )
        .unwrap();
        writeln!(out, "  r0={}", number(report.stage2.marginal_ratio)).unwrap();
        writeln!(
            out,
            "  en_pkts: ef={} af={} be={} stage2={} total={}",
            number(report.per_class.ef.expected_count),
            number(report.per_class.af.expected_count),
            number(report.per_class.be.expected_count),
            number(report.stage2.expected_count),
            number(report.expected_total),
        )
        .unwrap();
        writeln!(
            out,
            "  et_s: ef={} af={} be={} total={}",
            number(report.class_delay.ef),
            number(report.class_delay.af),
            number(report.class_delay.be),
            number(report.mean_delay),
        )
        .unwrap();
    }
    write_output(args.output.as_deref(), &out)
}

fn simulation_block(
    out: &mut String,
    scenario: &Scenario,
    report: &SimReport,
    lambda_effective: f64,
) {
    writeln!(
        out,
        "  generated={} delivered={}",
        report.total_generated(),
        report.total_delivered()
    )
    .unwrap();
    writeln!(
        out,
        "  et_s: ef={} (ci {}) af={} (ci {}) be={} (ci {}) total={} (ci {})",
        number(report.class_delay.ef.mean),
        number(report.class_delay.ef.ci_half_width),
        number(report.class_delay.af.mean),
        number(report.class_delay.af.ci_half_width),
        number(report.class_delay.be.mean),
        number(report.class_delay.be.ci_half_width),
        number(report.total_delay.mean),
        number(report.total_delay.ci_half_width),
    )
    .unwrap();
    let queue_bytes = report.class_queue_bytes.ef
        + report.class_queue_bytes.af
        + report.class_queue_bytes.be
        + report.stage2_queue_bytes;
    writeln!(out, "  en_total_bytes={}", number(queue_bytes)).unwrap();
    writeln!(out, "  utilization={}", number(report.utilization)).unwrap();
    if report.cycle_mean.is_finite() {
        writeln!(
            out,
            "  cycle_s: mean={} max={}",
            number(report.cycle_mean),
            number(report.cycle_max)
        )
        .unwrap();
    }
    match little_check(report, lambda_effective) {
        Ok(gap) => writeln!(out, "  little_gap={}", number(gap)).unwrap(),
        Err(_) => out.push_str("  little_gap=undefined\n"),
    }
    if scenario.fidelity == Fidelity::Protocol {
        out.push_str("  scope: whole network\n");
    } else {
        out.push_str("  scope: one ONU\n");
    }
}

fn run_simulate(args: &CommonArgs) -> Result<(), Error> {
    let scenario = load_scenario(args.config.as_deref())?;
    let mut out = String::new();
    writeln!(
        out,
        "# simulation report ({} fidelity)",
        fidelity_label(scenario.fidelity)
    )
    .unwrap();
    out.push_str(&scenario_banner(&scenario)?);
    for (index, load) in scenario.loads().into_iter().enumerate() {
        let profile = scenario.profile_at(load)?;
        let analytic = evaluate(&scenario.config, &profile, 0)?;
        let sim = scenario.sim_config(index)?;
        let report = match scenario.fidelity {
            Fidelity::QueueingNetwork => {
                run_queueing_sim(&analytic.stations, scenario.config.frame_length, &sim)?
            }
            Fidelity::Protocol => run_protocol_sim(&scenario.config, &profile, &sim)?,
        };
        let lambda_effective = match scenario.fidelity {
            Fidelity::QueueingNetwork => analytic.throughput,
            Fidelity::Protocol => analytic.throughput * scenario.config.n_onus as f64,
        };
        writeln!(out, "\nload={load:.6} seed={}", sim.rng_seed).unwrap();
        simulation_block(&mut out, &scenario, &report, lambda_effective);
    }
    write_output(args.output.as_deref(), &out)
}

fn run_sweep_command(args: &SweepArgs) -> Result<(), Error> {
    let scenario = load_scenario(args.common.config.as_deref())?;
    let rows = run_sweep(&scenario, args.with_sim)?;
    let csv = emit_csv(&rows)?;
    write_output(args.common.output.as_deref(), &csv)
}

fn run_validate(args: &CommonArgs) -> Result<u8, Error> {
    let outcomes = run_checks(&ValidateOptions::default())?;
    let report = render_report(&outcomes);
    write_output(args.output.as_deref(), &report)?;
    Ok(if all_passed(&outcomes) { 0 } else { EXIT_CHECK })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                let _ = err.print();
                return ExitCode::from(EXIT_CONFIG);
            }
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::Analytic(args) => run_analytic(args).map(|()| 0),
        Command::Simulate(args) => run_simulate(args).map(|()| 0),
        Command::Sweep(args) => run_sweep_command(args).map(|()| 0),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
