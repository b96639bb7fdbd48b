use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "nlbox",
    version,
    about = "Correlation boxes, CHSH nonlocality and XOR distillation"
)]
pub struct Cli {
    /// Output format for printed results.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Output file (eval/distill: box JSON; optimize: report JSON;
    /// simulate: path stem for `.json`, `.csv` and `-estimates.csv`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for every random draw.
    #[arg(long, default_value_t = 1, global = true)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print CHSH value, class, correlators, marginals and feasibility slack.
    Eval(EvalArgs),
    /// Wire two boxes with the XOR protocol and report the change.
    Distill(DistillArgs),
    /// Search for the largest distillation gain among attainable boxes.
    Optimize(OptimizeArgs),
    /// Emulate the two-source experiment with finite statistics.
    Simulate(SimulateArgs),
}

/// Exactly one way of naming a box.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).multiple(false)
    .args(["box_file", "eta", "phi", "pr", "white_noise"])))]
pub struct BoxSource {
    /// Box JSON file (`{"p": [[...] x4]}`); `distill` accepts it twice.
    #[arg(long = "box", value_name = "FILE", action = clap::ArgAction::Append)]
    pub box_file: Vec<PathBuf>,

    /// η of the symmetric family (requires --gamma).
    #[arg(long, requires = "gamma", allow_negative_numbers = true)]
    pub eta: Option<f64>,

    /// γ of the symmetric family (requires --eta).
    #[arg(long, requires = "eta", allow_negative_numbers = true)]
    pub gamma: Option<f64>,

    /// Planar measurement angle in degrees (singlet realization).
    #[arg(long, value_name = "DEGREES", allow_negative_numbers = true)]
    pub phi: Option<f64>,

    /// Singlet visibility used with --phi.
    #[arg(long, requires = "phi", default_value_t = 1.0)]
    pub visibility: f64,

    /// The PR box.
    #[arg(long)]
    pub pr: bool,

    /// The white-noise box.
    #[arg(long)]
    pub white_noise: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: BoxSource,

    /// Tolerance for normalization, non-signalling and classification.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub source: BoxSource,

    /// Also print this many iterations of the family map.
    #[arg(long)]
    pub iterations: Option<usize>,

    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Grid,
    Boundary,
    Both,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,

    /// Grid points per axis.
    #[arg(long, default_value_t = 2000)]
    pub resolution: usize,

    /// Feasibility tolerance on the arcsine criterion.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    /// Lower end of the boundary bracket, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub phi_lo: f64,

    /// Upper end of the boundary bracket, degrees.
    #[arg(long, default_value_t = 25.0)]
    pub phi_hi: f64,

    /// Golden-section stopping width, radians.
    #[arg(long, default_value_t = 1e-9)]
    pub golden_tol: f64,

    /// Write every grid node as CSV.
    #[arg(long, value_name = "FILE")]
    pub grid_csv: Option<PathBuf>,

    /// Write an SVG heatmap of the gain with the attainable region outlined.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("vis").multiple(false).args(["visibility", "target_chsh"])))]
pub struct SimulateArgs {
    /// Planar measurement angle, degrees.
    #[arg(long, default_value_t = 15.95)]
    pub phi: f64,

    /// Singlet visibility.
    #[arg(long)]
    pub visibility: Option<f64>,

    /// Pick the visibility so the ideal single box reaches this CHSH value.
    #[arg(long)]
    pub target_chsh: Option<f64>,

    /// Standard deviation of the angle miscalibration, degrees.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,

    /// Fraction of four-fold events from double-pair emission.
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,

    /// Pair shots per setting for each single box.
    #[arg(long, default_value_t = 1_000_000)]
    pub shots_pair: u64,

    /// Four-fold shots per setting (also used for the background run).
    #[arg(long, default_value_t = 100_000)]
    pub shots_fourfold: u64,
}
