use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "afterpulse",
    version,
    about = "Afterpulse and dark-count characterization from inter-arrival histograms"
)]
pub struct Cli {
    /// Print diagnostics to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    /// Seed for the simulator.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the command's text output here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a detection stream and write it as a tag file.
    Simulate(SimulateArgs),
    /// Histogram a tag file, fit the tail and bound the afterpulsing.
    Analyze(AnalyzeArgs),
    /// Smallest dead time that brings the total afterpulse probability below a target.
    OptimizeDeadtime(OptimizeArgs),
    /// Emit plot-ready CSV columns from a report and its histogram.
    PlotData(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApModel {
    None,
    Exponential,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10_000.0)]
    pub rate_source_hz: f64,
    #[arg(long, default_value_t = 5_000.0)]
    pub rate_dark_hz: f64,
    #[arg(long, default_value_t = 100)]
    pub slot_ns: u64,
    #[arg(long, value_enum, default_value_t = ApModel::None)]
    pub ap_model: ApModel,
    /// Amplitude at zero elapsed time.
    #[arg(long)]
    pub ap_p0: Option<f64>,
    #[arg(long)]
    pub ap_tau0_us: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub dead_us: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub events: u64,
    /// Tag resolution; must divide the slot width.
    #[arg(long, default_value_t = 1)]
    pub tick_ps: u64,
    /// JSON simulation config; replaces the rate, model and dead-time flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth cause of every event, as CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub bin_ns: u64,
    #[arg(long, default_value_t = 20.0)]
    pub range_us: f64,
    /// Start of the tail fit window.
    #[arg(long, default_value_t = 5.0)]
    pub tau_us: f64,
    /// Candidate window starts as start:stop:step in microseconds.
    #[arg(long)]
    pub sweep_tau: Option<String>,
    /// Fit the single-exponential model to the region before tau.
    #[arg(long)]
    pub fit_exp: bool,
    /// Refit the Poissonian rate jointly with the exponential model over the whole range.
    #[arg(long, requires = "fit_exp")]
    pub fit_exp_joint: bool,
    /// Dead time of the measurement; defaults to the first occupied bin.
    #[arg(long)]
    pub dead_ns: Option<u64>,
    /// Count-weighted tail regression.
    #[arg(long)]
    pub weighted: bool,
    /// Histogram bin that holds waiting slot 1; defaults to the first occupied bin.
    #[arg(long)]
    pub origin_bin: Option<u64>,
    /// Dark-only per-slot mean from a separate measurement.
    #[arg(long)]
    pub dark_mu: Option<f64>,
    /// Independently measured photon rate at the detector, for the efficiency.
    #[arg(long, requires = "dark_mu")]
    pub source_rate_hz: Option<f64>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub hist: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Amplitude at zero elapsed time.
    #[arg(long, conflicts_with = "ap_total")]
    pub ap_p0: Option<f64>,
    /// Measured total afterpulse probability, used with --at-dead-us to calibrate the amplitude.
    #[arg(long, requires = "at_dead_us")]
    pub ap_total: Option<f64>,
    #[arg(long)]
    pub at_dead_us: Option<f64>,
    #[arg(long)]
    pub ap_tau0_us: f64,
    #[arg(long, default_value_t = 100)]
    pub slot_ns: u64,
    #[arg(long, default_value_t = 0.01)]
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    WaitingPmf,
    TailFit,
    Excess,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub hist: PathBuf,
    #[arg(long, value_enum)]
    pub emit: Emit,
}
