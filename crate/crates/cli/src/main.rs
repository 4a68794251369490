//! `mosum`: change point detection in the loadings of large factor models.
//!
//! Exit status is 0 on success, 1 for invalid input or usage and 2 when the
//! numerics fail on otherwise valid input. Failures print a JSON object on
//! stderr.

mod commands;
mod volatility;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mosum_core::{DgpKind, Layout, StandardizationMode};
use mosum_core::mosum::RStrategy;

#[derive(Debug, Parser)]
#[command(name = "mosum", version, about = "MOSUM change point detection for factor-model loadings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect change points in a panel CSV and print the report as JSON.
    Detect(DetectArgs),
    /// Monte Carlo evaluation on a simulation design; prints a CSV table.
    Simulate(SimulateArgs),
    /// Eigenvalues and factor-number diagnostics of a panel CSV.
    Spectrum(SpectrumArgs),
    /// Turn daily high/low prices into a log-range volatility panel CSV.
    Volatility(VolatilityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    /// One column per series, one row per time point.
    Columns,
    /// One row per series, one column per time point.
    Rows,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Columns => Layout::SeriesInColumns,
            LayoutArg::Rows => Layout::SeriesInRows,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Diagonal,
}

impl From<ModeArg> for StandardizationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => StandardizationMode::Full,
            ModeArg::Diagonal => StandardizationMode::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Fixed,
    IcStable,
    EigenRatio,
}

impl From<StrategyArg> for RStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Fixed => RStrategy::Fixed,
            StrategyArg::IcStable => RStrategy::IcStable,
            StrategyArg::EigenRatio => RStrategy::EigenRatio,
        }
    }
}

#[derive(Debug, Args)]
struct PanelInput {
    /// Panel CSV: a header row of series names and a leading column of time labels.
    panel: PathBuf,
    #[arg(long, value_enum, default_value = "columns")]
    layout: LayoutArg,
    /// Keep the series means instead of centring each series.
    #[arg(long)]
    no_demean: bool,
}

/// Detector tuning; every flag overrides the matching field of `--config`.
#[derive(Debug, Args, Default)]
struct TuningArgs {
    /// JSON file with detector settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_enum)]
    r_strategy: Option<StrategyArg>,
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long)]
    gamma: Option<usize>,
    #[arg(long)]
    varrho: Option<f64>,
    /// HAC bandwidth.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Replicates per subsample fraction for the stabilized factor count.
    #[arg(long)]
    stable_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    input: PanelInput,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Run once per factor count in the inclusive range `a..b`.
    #[arg(long, value_name = "A..B", value_parser = commands::parse_range, requires = "out_dir",
          conflicts_with_all = ["r", "r_strategy"])]
    r_sweep: Option<(usize, usize)>,
    /// Directory for the report JSON and the profile CSV.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation design: M1, M2 or M3.
    #[arg(value_parser = commands::parse_model, required_unless_present = "paper_table")]
    model: Option<DgpKind>,
    #[arg(long = "T", value_name = "T")]
    t: Option<usize>,
    #[arg(long = "N", value_name = "N")]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho_f: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho_e: f64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Worker threads (0 = all cores); does not change the results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run a preset grid (1: M1; 2, 3: M2 without and with serial dependence; 4: M3).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), conflicts_with_all = ["model", "t", "n"])]
    paper_table: Option<u8>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: PanelInput,
    /// Largest factor count considered; defaults to min(8, min(N, T) - 1).
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long, default_value_t = 30)]
    stable_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VolatilityArgs {
    /// Long CSV with columns date, series, high, low.
    input: PathBuf,
    /// Keep the series means instead of centring each series.
    #[arg(long)]
    no_demean: bool,
    #[arg(long, value_enum, default_value = "columns")]
    layout: LayoutArg,
    /// Write the panel here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Volatility(a) => commands::volatility(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let numerical = e
                .chain()
                .any(|c| c.downcast_ref::<mosum_core::Error>().is_some_and(|e| e.is_numerical()));
            let (code, kind) = if numerical { (2, "numerical") } else { (1, "validation") };
            let body = serde_json::json!({
                "error": {
                    "kind": kind,
                    "message": format!("{e:#}"),
                    "exit_code": code,
                }
            });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
