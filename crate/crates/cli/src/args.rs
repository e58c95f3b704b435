use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "szt", version, about = "Signed-zero ternary quantization toolkit", args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Directory for outputs and run manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON file whose keys mirror the long flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a threshold to a dense weight file.
    Calibrate(CalibrateArgs),
    /// Quantize a dense weight file to `.szt`.
    Quantize(QuantizeArgs),
    /// Describe a `.szt` file.
    Inspect(InspectArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// Tabulate closed forms against numerical oracles.
    Analyze(AnalyzeArgs),
    /// Monte Carlo first-passage and renewal experiments.
    Simulate(SimulateArgs),
    /// Quantization-aware training of the toy network.
    Train(TrainArgs),
    /// Merge manifests and tables from earlier runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Sigma,
    FixedK,
    PriorOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorArg {
    Laplace,
    Gaussian,
    HalfLaplace,
    HalfGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GranularityArg {
    PerLayer,
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleArg {
    Unit,
    Threshold,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuantOptions {
    /// Dense little-endian f32 weights with a `<input>.json` sidecar.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "sigma")]
    pub rule: RuleArg,
    /// Multiplier for `fixed-k`.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Prior family for `prior-optimal`.
    #[arg(long, value_enum, default_value = "laplace")]
    pub prior: PriorArg,
    /// Prior scale (b or sigma); fitted from the weights when omitted.
    #[arg(long)]
    pub prior_scale: Option<f64>,
    #[arg(long, value_enum, default_value = "per-layer")]
    pub granularity: GranularityArg,
    /// Channel axis for `per-channel`.
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub quant: QuantOptions,
    /// Calibration JSON; defaults to `<out-dir>/calibration.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub quant: QuantOptions,
    #[arg(long, value_enum, default_value = "threshold")]
    pub scale: ScaleArg,
    /// Output tensor; defaults to `<out-dir>/<input stem>.szt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Also list every code.
    #[arg(long)]
    pub codes: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// sensitivity, entropy, mse, pacbayes, mfpt, snr, repro or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Paths per first-passage grid point.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Samples for counting and identity checks.
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long)]
    pub renewal_trials: Option<u64>,
    #[arg(long)]
    pub noise_trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Sensitivity,
    Entropy,
    Mse,
    DeadZone,
    Kl,
    Mfpt,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub quantity: Quantity,
    /// Laplace scale for the sensitivity table.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Threshold for the sensitivity table; defaults to `√2·b`.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Ou,
    Renewal,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "ou")]
    pub mode: SimMode,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Barrier; renewal mode defaults to `√2·b`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Step size; defaults to `1e-4·Δ²/σ²`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Laplace scale of the renewal prior.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Deterministic step size of the renewal model.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteArg {
    Bt,
    Szt,
    Sr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    Regression,
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshArg {
    Never,
    PerEpoch,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "szt")]
    pub ste: SteArg,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Learning-rate schedule; the last value repeats.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub lr: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    /// Number of examples.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Regression input width.
    #[arg(long, default_value_t = 8)]
    pub inputs: usize,
    /// Regression output width.
    #[arg(long, default_value_t = 2)]
    pub outputs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Parity input width.
    #[arg(long, default_value_t = 4)]
    pub bits: usize,
    #[arg(long, value_enum, default_value = "never")]
    pub delta_refresh: RefreshArg,
    #[arg(long, default_value_t = 3)]
    pub sr_stream: u64,
    /// Report path; defaults to `<out-dir>/report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Files or directories holding manifests and CSV tables.
    #[arg(long, num_args = 0..)]
    pub inputs: Vec<PathBuf>,
}
