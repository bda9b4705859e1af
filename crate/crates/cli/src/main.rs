//! `nhexp`: batch driver for nonholonomic exponential maps, Gauss-condition
//! sweeps, pullbacks, end-to-end verification and length minimization.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "nhexp",
    version,
    about = "Nonholonomic exponential maps and Gauss metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one nonholonomic trajectory and write trajectory.csv.
    Simulate(Flags),
    /// Evaluate the exponential map on a grid against its closed form.
    ExpmapGrid(Flags),
    /// Sweep the Gauss condition of a metric over its domain.
    GaussCheck(Flags),
    /// Tabulate a pullback metric and its oracle comparisons.
    Pullback(Flags),
    /// Run the five-stage verification pipeline.
    VerifyTheorem(Flags),
    /// Minimize curve length between two points of the fiber.
    Minimize(Flags),
    /// Merge earlier artifacts in the output directory into report.json.
    Report(Flags),
}

/// Flags shared by every subcommand. Each flag overrides the key of the same
/// name in the `--config` file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// System id: particle or disk.
    #[arg(long)]
    system: Option<String>,
    /// Metric id or verification metric choice.
    #[arg(long)]
    metric: Option<String>,
    /// Disk moment of inertia about the rolling axis.
    #[arg(long = "I", allow_hyphen_values = true)]
    inertia_i: Option<String>,
    /// Disk moment of inertia about the vertical axis.
    #[arg(long = "J", allow_hyphen_values = true)]
    inertia_j: Option<String>,
    /// Initial point (comma-separated ambient coordinates).
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<String>,
    /// Initial velocity: fiber coordinates or ambient components.
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<String>,
    /// Integration time.
    #[arg(long = "T", allow_hyphen_values = true)]
    duration: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Points per grid axis.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Domain radius in fiber coordinates.
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<String>,
    /// Per-axis half-widths of a box grid.
    #[arg(long, allow_hyphen_values = true)]
    extent: Option<String>,
    /// Start point of a minimization.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    /// End point of a minimization.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    /// Nodes of a discrete curve.
    #[arg(long)]
    nodes: Option<String>,
    /// Amplitude of the sinusoidal perturbation of the initial curve.
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<String>,
    /// Mode of the sinusoidal perturbation.
    #[arg(long)]
    mode: Option<String>,
    /// Seeded random jitter of interior nodes.
    #[arg(long, allow_hyphen_values = true)]
    jitter: Option<String>,
    /// length or energy.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    probe_points: Option<String>,
    #[arg(long)]
    geodesic_steps: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let all = [
            ("out", &self.out),
            ("system", &self.system),
            ("metric", &self.metric),
            ("I", &self.inertia_i),
            ("J", &self.inertia_j),
            ("q0", &self.q0),
            ("v0", &self.v0),
            ("T", &self.duration),
            ("steps", &self.steps),
            ("grid", &self.grid),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("radius", &self.radius),
            ("extent", &self.extent),
            ("from", &self.from),
            ("to", &self.to),
            ("nodes", &self.nodes),
            ("amplitude", &self.amplitude),
            ("mode", &self.mode),
            ("jitter", &self.jitter),
            ("objective", &self.objective),
            ("max_iters", &self.max_iters),
            ("probe_points", &self.probe_points),
            ("geodesic_steps", &self.geodesic_steps),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

type Handler = fn(&RunConfig) -> Result<commands::Outcome, CliError>;

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let (name, flags, cmd): (&str, &Flags, Handler) = match &cli.command {
        Command::Simulate(f) => ("simulate", f, commands::simulate),
        Command::ExpmapGrid(f) => ("expmap-grid", f, commands::expmap_grid),
        Command::GaussCheck(f) => ("gauss-check", f, commands::gauss_check),
        Command::Pullback(f) => ("pullback", f, commands::pullback),
        Command::VerifyTheorem(f) => ("verify-theorem", f, commands::verify),
        Command::Minimize(f) => ("minimize", f, commands::minimize),
        Command::Report(f) => ("report", f, commands::report),
    };
    let cfg = RunConfig::resolve(name, flags.config.as_deref(), &flags.pairs())?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nhexp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
