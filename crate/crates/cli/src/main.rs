//! Command-line front end: scenario runs, experiment sweeps, conflict-graph
//! inspection and exact solving.
//!
//! Exit codes: 0 success, 2 configuration error, 3 size guard exceeded,
//! 4 internal invariant violation.

mod config;
mod report;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idnc_core::graph::GraphError;
use idnc_core::mdp::{backward_induction, MdpError};
use idnc_core::sim::{
    self, monte_carlo, run_episode, Scenario, ScenarioConfig, SimError,
};
use idnc_core::video::GopModel;
use idnc_core::{ConnectivityMatrix, StatusMatrix};

use config::{format_sweep_value, ExperimentSpec};
use report::{csv_row, render_graph_dump, render_mdp_report, CSV_HEADER};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: String) -> Self {
        CliError { code, message }
    }

    pub fn config(message: String) -> Self {
        CliError::new(EXIT_CONFIG, message)
    }

    pub fn guard(message: String) -> Self {
        CliError::new(EXIT_GUARD, message)
    }

    pub fn invariant(message: String) -> Self {
        CliError::new(EXIT_INVARIANT, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::Graph(GraphError::VertexCountExceeded { .. }) => {
                CliError::guard(e.to_string())
            }
            SimError::Scheduler { source, .. } if source.is_guard() => {
                CliError::guard(e.to_string())
            }
            SimError::ConflictViolation { .. } => CliError::invariant(e.to_string()),
            SimError::Scheduler { .. } => CliError::invariant(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        match &e {
            MdpError::TooManyStates { .. }
            | MdpError::TooManyActions { .. }
            | MdpError::Graph(GraphError::VertexCountExceeded { .. }) => {
                CliError::guard(e.to_string())
            }
            MdpError::Graph(_) => CliError::config(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match &e {
            GraphError::VertexCountExceeded { .. } => CliError::guard(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "idnc",
    about = "Simulator for deadline-constrained cooperative packet repair with \
             instantly decodable network coding",
    after_help = "CSV schema (run/sweep): sweep_variable,scheduler,runs,mean_psnr,\
                  std_psnr,mean_distortion\nSchedulers: tsmis, pcb, fcd, mdp.\n\
                  Exit codes: 0 ok, 2 config error, 3 size guard exceeded, \
                  4 invariant violation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the conflict graph (vertices, tagged edges, maximal
    /// independent sets) of a scenario or an explicit SCM/GSM pair.
    GraphDump {
        /// Experiment config; its scenario supplies the topology and the
        /// episode-0 initial holdings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Connectivity matrix JSON ({"m":..,"y":[..]}), row-major.
        #[arg(long, requires = "gsm")]
        scm: Option<PathBuf>,
        /// Status matrix JSON ({"m":..,"n":..,"f":[..]}), 1 = missing.
        #[arg(long, requires = "scm")]
        gsm: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo evaluation of the configured schedulers on one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated scheduler list, overriding the config.
        #[arg(long)]
        scheduler: Option<String>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path (the summary always prints to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Log every slot decision of episode 0 per scheduler.
        #[arg(long)]
        dump_transcripts: bool,
    },
    /// Sweep one axis (theta, connectivity or devices), one CSV row per
    /// (value, scheduler) cell with common random numbers across schedulers.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis expression like theta=7,9,11; overrides the config sweep.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        scheduler: Option<String>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a small instance exactly and print the optimal value, the
    /// first action and the table size.
    MdpSolve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, requires = "gsm")]
        scm: Option<PathBuf>,
        #[arg(long, requires = "scm")]
        gsm: Option<PathBuf>,
        /// Slot budget when solving from explicit matrices.
        #[arg(long)]
        theta: Option<u32>,
        /// GOP model JSON supplying importance weights (uniform otherwise).
        #[arg(long)]
        gop: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GraphDump {
            config,
            scm,
            gsm,
            out,
        } => graph_dump(config, scm, gsm, out),
        Command::Run {
            config,
            scheduler,
            runs,
            seed,
            out,
            dump_transcripts,
        } => run_command(config, scheduler, runs, seed, out, dump_transcripts),
        Command::Sweep {
            config,
            sweep,
            scheduler,
            runs,
            seed,
            out,
        } => sweep_command(config, sweep, scheduler, runs, seed, out),
        Command::MdpSolve {
            config,
            scm,
            gsm,
            theta,
            gop,
        } => mdp_solve(config, scm, gsm, theta, gop),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid {}: {e}", path.display())))
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

/// Scenario state for inspection commands: generated topology plus the
/// episode-0 initial holdings.
fn scenario_initial_state(
    cfg: &ScenarioConfig,
) -> Result<(Scenario, StatusMatrix), CliError> {
    let scenario = Scenario::prepare(cfg.clone())?;
    let f = sim::initial_gsm_for_episode(&scenario.cfg, 0);
    Ok((scenario, f))
}

fn graph_dump(
    config: Option<PathBuf>,
    scm: Option<PathBuf>,
    gsm: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (y, f) = match (scm, gsm, config) {
        (Some(scm), Some(gsm), _) => {
            let y: ConnectivityMatrix = read_json(&scm)?;
            let f: StatusMatrix = read_json(&gsm)?;
            (y, f)
        }
        (_, _, Some(config)) => {
            let spec = ExperimentSpec::load(&config)?;
            let (scenario, f) = scenario_initial_state(&spec.scenario)?;
            (scenario.y, f)
        }
        _ => {
            return Err(CliError::config(
                "graph-dump needs either --config or --scm/--gsm".into(),
            ))
        }
    };
    let text = render_graph_dump(&y, &f)?;
    write_output(out.as_ref(), &text)
}

fn run_command(
    config: PathBuf,
    scheduler: Option<String>,
    runs: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dump_transcripts: bool,
) -> Result<(), CliError> {
    let spec = ExperimentSpec::load(&config)?.with_overrides(
        scheduler.as_deref(),
        None,
        runs,
        seed,
        out,
    )?;
    let scenario = Scenario::prepare(spec.scenario.clone())?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let theta_label = format!("{}", spec.scenario.theta);
    for name in &spec.schedulers {
        let sched = sim::build_scheduler(name, &scenario, spec.selection, spec.mdp_guards)?;
        let agg = monte_carlo(&scenario, sched.as_ref(), spec.runs)?;
        println!(
            "{name}: mean_psnr {:.3} dB (std {:.3}), mean_distortion {:.3} over {} runs",
            agg.mean_psnr, agg.std_psnr, agg.mean_distortion, agg.runs
        );
        csv.push_str(&csv_row(&theta_label, name, &agg));
        csv.push('\n');
        if dump_transcripts {
            let t = run_episode(&scenario, sched.as_ref(), 0)?;
            for slot in &t.slots {
                let decision: Vec<String> =
                    slot.decision.iter().map(|v| v.to_string()).collect();
                let received: Vec<String> = slot
                    .outcomes
                    .iter()
                    .map(|o| format!("{}:{}", o.vertex.rx, u8::from(o.received)))
                    .collect();
                println!(
                    "  [{name} episode 0 slot {}] {} -> {}",
                    slot.slot,
                    decision.join(" "),
                    received.join(" ")
                );
            }
        }
    }
    if let Some(path) = &spec.out {
        std::fs::write(path, &csv)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn sweep_command(
    config: PathBuf,
    sweep: Option<String>,
    scheduler: Option<String>,
    runs: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let spec = ExperimentSpec::load(&config)?.with_overrides(
        scheduler.as_deref(),
        sweep.as_deref(),
        runs,
        seed,
        out,
    )?;
    let sweep = spec
        .sweep
        .clone()
        .ok_or_else(|| CliError::config("sweep command needs a sweep axis".into()))?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for &value in &sweep.values {
        let cfg = spec.scenario_for(sweep.axis, value)?;
        let scenario = Scenario::prepare(cfg)?;
        let label = format_sweep_value(sweep.axis, value);
        for name in &spec.schedulers {
            let sched = sim::build_scheduler(name, &scenario, spec.selection, spec.mdp_guards)?;
            let agg = monte_carlo(&scenario, sched.as_ref(), spec.runs)?;
            csv.push_str(&csv_row(&label, name, &agg));
            csv.push('\n');
        }
    }
    write_output(spec.out.as_ref(), &csv)
}

fn mdp_solve(
    config: Option<PathBuf>,
    scm: Option<PathBuf>,
    gsm: Option<PathBuf>,
    theta: Option<u32>,
    gop: Option<PathBuf>,
) -> Result<(), CliError> {
    let (y, f, theta, delta, guards) = match (scm, gsm, config) {
        (Some(scm), Some(gsm), _) => {
            let y: ConnectivityMatrix = read_json(&scm)?;
            let f: StatusMatrix = read_json(&gsm)?;
            let theta = theta
                .ok_or_else(|| CliError::config("--theta is required with --scm/--gsm".into()))?;
            let delta = match gop {
                Some(path) => {
                    let model: GopModel = read_json(&path)?;
                    if model.packet_count() != f.packet_count() {
                        return Err(CliError::config(format!(
                            "GOP model has {} packets, status matrix {}",
                            model.packet_count(),
                            f.packet_count()
                        )));
                    }
                    model.importance_matrix(f.device_count())
                }
                None => idnc_core::ImportanceMatrix::uniform(
                    f.device_count(),
                    f.packet_count(),
                    1.0,
                ),
            };
            (y, f, theta, delta, Default::default())
        }
        (_, _, Some(config)) => {
            let spec = ExperimentSpec::load(&config)?;
            let (scenario, f) = scenario_initial_state(&spec.scenario)?;
            let theta = theta.unwrap_or(spec.scenario.theta);
            (scenario.y, f, theta, scenario.delta, spec.mdp_guards)
        }
        _ => {
            return Err(CliError::config(
                "mdp-solve needs either --config or --scm/--gsm".into(),
            ))
        }
    };
    let table = backward_induction(&f, theta, &y, &delta, &guards)?;
    print!("{}", render_mdp_report(&table));
    Ok(())
}
