use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Contrastive dimensionality reduction and splice localization.
#[derive(Debug, Parser)]
#[command(name = "cpcapp", version, about)]
pub struct Cli {
    /// Worker threads for data-parallel stages (results do not depend on it).
    #[arg(long, global = true, env = "CPCAPP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to a directory.
    Generate(GenerateArgs),
    /// Fit a PCA, cPCA or cPCA++ model from CSV data.
    Fit(FitArgs),
    /// Project samples onto a model's filters.
    Transform(TransformArgs),
    /// Per-sample output power normalized to [0, 1].
    Score(ScoreArgs),
    /// Denoise a PGM image with a model's W·Fᵀ projector.
    Denoise(DenoiseArgs),
    /// Probability map of spliced edges in one image.
    Localize(LocalizeArgs),
    /// Train a splice localizer from generated probe/mask pairs.
    TrainSplice(TrainSpliceArgs),
    /// Score a probability map against an edge ground-truth mask.
    Eval(EvalArgs),
    /// Time the reducers on a synthetic dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// four-class, haystack, textured-digits or spliced-image.
    pub kind: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_fg: Option<usize>,
    #[arg(long)]
    pub n_bg: Option<usize>,
    /// Number of spliced images.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Generator parameter as KEY=VALUE (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub fg: PathBuf,
    /// Background data; required by cpca and cpca++.
    #[arg(long)]
    pub bg: Option<PathBuf>,
    /// pca, cpca or cpca++.
    #[arg(long)]
    pub method: String,
    #[arg(short, long, default_value_t = 2)]
    pub k: usize,
    /// Single cPCA contrast.
    #[arg(long, conflicts_with = "alpha_grid")]
    pub alpha: Option<f64>,
    /// cPCA contrast grid: `default`, `log:LO:HI:N` or a comma list.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// CSV rows are features instead of samples.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub transpose: bool,
    /// Center with the training foreground mean instead of the batch mean.
    #[arg(long)]
    pub train_mean: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub transpose: bool,
    #[arg(long)]
    pub train_mean: bool,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of leading atoms to keep (default: all).
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Feature value = (pixel − offset) / gain.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    #[arg(long)]
    pub train_mean: bool,
}

#[derive(Debug, Args)]
pub struct TrainSpliceArgs {
    /// Directory holding probe_NNN.ppm and mask_NNN.pgm pairs.
    #[arg(long)]
    pub train_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    #[arg(short, long, default_value_t = 6)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub fg_lo: f64,
    #[arg(long, default_value_t = 0.7)]
    pub fg_hi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub bg_edge_min: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "four-class")]
    pub kind: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub n_fg: Option<usize>,
    #[arg(long)]
    pub n_bg: Option<usize>,
    #[arg(long, default_value = "pca,cpca,cpca++")]
    pub methods: String,
    #[arg(long, default_value = "default")]
    pub alpha_grid: String,
    #[arg(short, long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(u8::from(usage));
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        // Fails only if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
