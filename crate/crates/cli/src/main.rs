//! Batch CLI for the cognitive handoff simulator.
//!
//! Exit codes: 0 success, 2 scenario load error, 3 usage error, 4 IO error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use handoff_core::metrics::SweepParameter;
use handoff_core::runner;
use handoff_core::scenario::{parse_scenario, ScenarioBundle};
use handoff_core::HandoffError;

const EXIT_LOAD: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "handoff", about = "Cognitive handoff simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; write events CSV, snapshots CSV, report and radar JSON
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep one parameter; write the tradeoff CSV and frontier JSON
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// hysteresis | decision_budget | context_size | user_provider_weight_mix
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Evaluate all candidates at one instant; write the Pareto dump JSON
    Pareto {
        #[command(flatten)]
        common: CommonArgs,
        /// Snapshot time in seconds
        #[arg(long)]
        time: f64,
    },
    /// Run one scenario and write only the report and radar JSON
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Radar boundary-circle radius in [0,1]
        #[arg(long)]
        boundary: Option<f64>,
    },
}

fn load(common: &CommonArgs) -> Result<ScenarioBundle, ExitCode> {
    match parse_scenario(&common.scenario) {
        Ok(mut bundle) => {
            if let Some(seed) = common.seed {
                bundle.scenario.seed = seed;
                bundle.config.seed = seed;
            }
            Ok(bundle)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_LOAD))
        }
    }
}

fn run_exit(err: HandoffError) -> ExitCode {
    eprintln!("error: {err}");
    let code = match &err {
        HandoffError::Input(msg) if msg.starts_with("cannot write") => EXIT_IO,
        HandoffError::Input(_) => EXIT_USAGE,
        HandoffError::Config(_) => EXIT_LOAD,
        _ => EXIT_USAGE,
    };
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common } => {
            let bundle = match load(&common) {
                Ok(b) => b,
                Err(code) => return code,
            };
            match runner::cmd_run(&bundle, &common.out) {
                Ok((outputs, trace)) => {
                    println!(
                        "run complete: {} steps, {} handoff events",
                        trace.steps.len(),
                        trace.events.len()
                    );
                    for p in [
                        &outputs.events_path,
                        &outputs.snapshots_path,
                        &outputs.report_path,
                        &outputs.radar_path,
                    ] {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => run_exit(e),
            }
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let bundle = match load(&common) {
                Ok(b) => b,
                Err(code) => return code,
            };
            let parameter: SweepParameter = match param.parse() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            if values.is_empty() {
                eprintln!("error: --values must list at least one value");
                return ExitCode::from(EXIT_USAGE);
            }
            match runner::cmd_sweep(&bundle, parameter, &values, &common.out) {
                Ok((csv, json, result)) => {
                    let frontier = result.points.iter().filter(|p| p.non_dominated).count();
                    println!(
                        "sweep complete: {} points, {frontier} non-dominated",
                        result.points.len()
                    );
                    println!("wrote {}", csv.display());
                    println!("wrote {}", json.display());
                    ExitCode::SUCCESS
                }
                Err(e) => run_exit(e),
            }
        }
        Command::Pareto { common, time } => {
            let bundle = match load(&common) {
                Ok(b) => b,
                Err(code) => return code,
            };
            match runner::cmd_pareto(&bundle, time, &common.out) {
                Ok((path, candidates)) => {
                    let front = candidates.iter().filter(|c| c.in_front).count();
                    println!(
                        "pareto dump at t={time}: {} candidates, {front} in front",
                        candidates.len()
                    );
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => run_exit(e),
            }
        }
        Command::Report { common, boundary } => {
            let bundle = match load(&common) {
                Ok(b) => b,
                Err(code) => return code,
            };
            if let Some(b) = boundary {
                if !(0.0..=1.0).contains(&b) {
                    eprintln!("error: --boundary must be in [0,1]");
                    return ExitCode::from(EXIT_USAGE);
                }
            }
            match runner::cmd_report(&bundle, boundary, &common.out) {
                Ok((report, radar)) => {
                    println!("wrote {}", report.display());
                    println!("wrote {}", radar.display());
                    ExitCode::SUCCESS
                }
                Err(e) => run_exit(e),
            }
        }
    }
}
