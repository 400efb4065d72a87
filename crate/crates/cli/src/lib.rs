//! `pcc`: dataset generation, corruption, training, completion, evaluation
//! and trace plotting.

pub mod commands;
pub mod config;
pub mod data;
pub mod eval;
pub mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcc_core::corrupt::CorruptionSpec;
use pcc_core::ldo::{LdoError, LdoPreset};
use pcc_core::pipeline::TrainError;
use pcc_core::shapes_io::{IoError, ShapeClass};
use pcc_core::transport::EmdSolver;
use thiserror::Error;

use config::{CompleteConfig, CorruptConfig, GenConfig, TrainCommandConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn data(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Diverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LdoError> for CliError {
    fn from(e: LdoError) -> Self {
        match e {
            LdoError::Config(_) => CliError::Usage(e.to_string()),
            LdoError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pcc", version, about = "Point-cloud shape completion by latent denoising optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a train/val/test split.
    Gen(GenArgs),
    /// Mask or downsample clouds.
    Corrupt(CorruptArgs),
    /// Train the autoencoder, then the GAN and initializing encoder.
    Train(TrainArgs),
    /// Complete (or upsample) clouds with a trained bundle.
    Complete(CompleteArgs),
    /// Score completed clouds against ground truth.
    Eval(EvalArgs),
    /// Render an optimization trace as SVG.
    TracePlot(TracePlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shape class; repeat for several.
    #[arg(long = "class")]
    pub classes: Vec<ShapeClass>,
    /// Clouds per class.
    #[arg(long)]
    pub count: Option<usize>,
    /// Points per cloud.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remove this fraction as a nearest-neighbour ball.
    #[arg(long, conflicts_with = "keep")]
    pub mask: Option<f64>,
    /// Keep this fraction, chosen uniformly.
    #[arg(long)]
    pub keep: Option<f64>,
    /// Replicate-pad outputs to this many points.
    #[arg(long)]
    pub pad_to: Option<usize>,
    /// Only corrupt the ids listed in this file.
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolverArg {
    Auto,
    Exact,
    Approx,
}

impl From<SolverArg> for EmdSolver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => EmdSolver::Auto,
            SolverArg::Exact => EmdSolver::Exact,
            SolverArg::Approx => EmdSolver::Approx,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for loss logs, feature vectors and the effective config.
    #[arg(long)]
    pub out: PathBuf,
    /// Bundle path; defaults to `<out>/model.pccb`.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training ids; defaults to `<input>/train.txt` when present.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    #[arg(long)]
    pub n_out: Option<usize>,
    /// Train a denoising autoencoder on inputs masked by this fraction.
    #[arg(long)]
    pub dae_mask: Option<f64>,
    #[arg(long)]
    pub ae_epochs: Option<usize>,
    #[arg(long)]
    pub gan_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub ae_lr: Option<f64>,
    #[arg(long)]
    pub gan_lr: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// A cloud file or a directory of clouds.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<LdoPreset>,
    /// Emit the plain autoencoder reconstruction.
    #[arg(long)]
    pub no_ldo: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Ground-truth directory; adds EMD-GT to every trace record.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<LdoPreset, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `[MODEL[@LEVEL]=]DIR` of completed clouds; repeat for several.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Directory for `report.tsv` and `summary.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TracePlotArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn file_table(path: Option<&Path>) -> Result<Option<toml::Table>, CliError> {
    path.map(config::load_table).transpose()
}

fn positive_fraction(name: &str, v: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must lie in [0, 1], got {v}")))
    }
}

pub fn gen_config(a: &GenArgs) -> Result<GenConfig, CliError> {
    let mut c = config::overlay(&GenConfig::default(), file_table(a.config.as_deref())?.as_ref())?;
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if !a.classes.is_empty() {
        c.classes = a.classes.clone();
    }
    if let Some(n) = a.count {
        c.count = n;
    }
    if let Some(n) = a.points {
        c.points_per_cloud = n;
    }
    c.validate()?;
    config::to_text(&c)?;
    Ok(c)
}

pub fn corrupt_config(a: &CorruptArgs) -> Result<CorruptConfig, CliError> {
    let mut c = config::overlay(&CorruptConfig::default(), file_table(a.config.as_deref())?.as_ref())?;
    let seed = a.seed.unwrap_or(c.corruption.seed);
    if let Some(x) = a.mask {
        c.corruption = CorruptionSpec::mask(positive_fraction("mask", x)?, seed);
    } else if let Some(x) = a.keep {
        c.corruption = CorruptionSpec { pad_to: c.corruption.pad_to, ..CorruptionSpec::downsample(positive_fraction("keep", x)?, seed) };
    }
    c.corruption.seed = seed;
    if a.pad_to.is_some() {
        c.corruption.pad_to = a.pad_to;
    }
    c.validate()?;
    config::to_text(&c)?;
    Ok(c)
}

pub fn train_config(a: &TrainArgs) -> Result<TrainCommandConfig, CliError> {
    let mut c = config::overlay(&TrainCommandConfig::default(), file_table(a.config.as_deref())?.as_ref())?;
    let t = &mut c.train;
    if let Some(s) = a.seed {
        t.seed = s;
    }
    if let Some(n) = a.n_out {
        t.n_out = n;
    }
    if let Some(x) = a.dae_mask {
        t.dae_corruption = Some(CorruptionSpec::mask(positive_fraction("dae-mask", x)?, t.seed));
    }
    if let Some(n) = a.ae_epochs {
        t.ae_epochs = n;
    }
    if let Some(n) = a.gan_epochs {
        t.gan_epochs = n;
    }
    if let Some(n) = a.batch_size {
        t.batch_size = n;
    }
    if let Some(x) = a.ae_lr {
        t.ae_learning_rate = x;
    }
    if let Some(x) = a.gan_lr {
        t.gan_learning_rate = x;
    }
    if let Some(s) = a.solver {
        t.emd_solver = s.into();
    }
    c.validate()?;
    config::to_text(&c)?;
    Ok(c)
}

pub fn complete_config(a: &CompleteArgs) -> Result<CompleteConfig, CliError> {
    let mut c = CompleteConfig::resolve(a.preset, file_table(a.config.as_deref())?.as_ref())?;
    if let Some(s) = a.seed {
        c.ldo.seed = s;
    }
    if a.no_ldo {
        c.no_ldo = true;
    }
    if let Some(n) = a.max_iters {
        c.ldo.max_iters = n;
    }
    if let Some(x) = a.learning_rate {
        c.ldo.learning_rate = x;
    }
    if a.no_early_stop {
        c.ldo.early_stop = false;
    }
    if let Some(n) = a.patience {
        c.ldo.patience = n;
    }
    if let Some(s) = a.solver {
        c.ldo.emd_solver = s.into();
    }
    c.validate()?;
    config::to_text(&c)?;
    Ok(c)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => {
            let c = gen_config(&a)?;
            let entries = commands::cmd_gen(&c, &a.out)?;
            println!("wrote {} clouds to {}", entries.len(), a.out.display());
        }
        Command::Corrupt(a) => {
            let c = corrupt_config(&a)?;
            let entries = commands::cmd_corrupt(&a.input, a.ids.as_deref(), &c, &a.out)?;
            println!("wrote {} corrupted clouds to {}", entries.len(), a.out.display());
        }
        Command::Train(a) => {
            let c = train_config(&a)?;
            let bundle = a.bundle.clone().unwrap_or_else(|| a.out.join("model.pccb"));
            let ids = a.ids.clone().or_else(|| Some(a.input.join("train.txt")).filter(|p| p.is_file()));
            let trained = commands::cmd_train(&a.input, ids.as_deref(), &c, &a.out, &bundle)?;
            println!(
                "trained on {} clouds; final AE loss {:.6}; bundle {}",
                trained.gfvs.len(),
                trained.ae_history.last().copied().unwrap_or(f64::NAN),
                bundle.display()
            );
        }
        Command::Complete(a) => {
            let c = complete_config(&a)?;
            let done = commands::cmd_complete(&a.input, &a.bundle, &c, &a.out, a.ground_truth.as_deref())?;
            println!("completed {} clouds into {}", done.len(), a.out.display());
        }
        Command::Eval(a) => {
            let runs = a.runs.iter().map(|s| eval::RunSpec::parse(s)).collect::<Result<Vec<_>, _>>()?;
            let report = eval::cmd_eval(&runs, &a.ground_truth, a.out.as_deref())?;
            print!("{}", report.summary());
        }
        Command::TracePlot(a) => plot::cmd_trace_plot(&a.trace, &a.out)?,
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
