//! The `camlink` command line: `synth`, `extract`, `match` and `eval`.
//!
//! Each command reads only files written by earlier commands and writes a
//! `run.json` record next to its outputs.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, CliError};
pub use config::{ConfigError, Crop, Settings};

#[derive(Debug, Parser)]
#[command(name = "camlink", version, about = "Link accounts by camera sensor-noise fingerprints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat TOML file with default values for any flag.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Seeding and merging threshold.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Assignment threshold.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Minimum group size kept by UCI.
    #[arg(long, global = true)]
    pub lambda: Option<usize>,
    /// Minimum group size kept by MCF.
    #[arg(long, global = true)]
    pub gamma: Option<usize>,
    /// scf, mcf, uci, a comma list, or all.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Center-crop size, e.g. 256x256.
    #[arg(long, global = true, value_name = "WxH")]
    pub crop: Option<Crop>,
    #[arg(long, global = true)]
    pub wavelet_levels: Option<usize>,
    #[arg(long, global = true)]
    pub noise_variance: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark dataset.
    Synth(SynthArgs),
    /// Estimate per-account fingerprints from a directory of accounts.
    Extract(ExtractArgs),
    /// Score every account pair from a fingerprint store.
    Match(MatchArgs),
    /// Evaluate scores (and clusterings) against a dataset manifest.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// offline1, offline2, offline3 or online.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub cameras: Option<usize>,
    #[arg(long)]
    pub images_per_camera: Option<usize>,
    /// Cap on offline individuals (sampled combinations).
    #[arg(long)]
    pub max_individuals: Option<usize>,
    /// Number of online individuals.
    #[arg(long)]
    pub individuals: Option<usize>,
    #[arg(long)]
    pub album_min: Option<usize>,
    #[arg(long)]
    pub album_max: Option<usize>,
    /// Reposted images per account.
    #[arg(long)]
    pub reposts: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub sigma_k: Option<f64>,
    #[arg(long)]
    pub sigma_eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExtractArgs {
    /// Dataset directory: `manifest.json` plus images, or one subdirectory
    /// of images per account, or a single directory of images.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Record failing accounts as fingerprint-less instead of aborting.
    #[arg(long)]
    pub keep_going: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MatchArgs {
    /// One scheme directory written by `extract`.
    #[arg(long, value_name = "DIR")]
    pub fingerprints: Option<PathBuf>,
    /// Pairs scoring strictly above this are reported as linked.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Dataset directory or manifest file.
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// `scores.json` or `scores.csv` written by `match`.
    #[arg(long, value_name = "PATH")]
    pub scores: Option<PathBuf>,
    /// Scheme directory from `extract`; enables clustering and repost metrics.
    #[arg(long, value_name = "DIR")]
    pub fingerprints: Option<PathBuf>,
}

impl CommonArgs {
    pub fn settings(&self) -> Settings {
        Settings {
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            gamma: self.gamma,
            scheme: self.scheme.clone(),
            crop: self.crop.map(|c| c.to_string()),
            wavelet_levels: self.wavelet_levels,
            noise_variance: self.noise_variance,
            workers: self.workers,
            out: self.out.clone(),
            ..Settings::default()
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::Match(_) => "match",
            Command::Eval(_) => "eval",
        }
    }

    /// Flag values specific to this command, in settings form.
    pub fn settings(&self) -> Settings {
        match self {
            Command::Synth(a) => Settings {
                protocol: a.protocol.clone(),
                cameras: a.cameras,
                images_per_camera: a.images_per_camera,
                max_individuals: a.max_individuals,
                individuals: a.individuals,
                album_min: a.album_min,
                album_max: a.album_max,
                reposts: a.reposts,
                width: a.width,
                height: a.height,
                sigma_k: a.sigma_k,
                sigma_eta: a.sigma_eta,
                ..Settings::default()
            },
            Command::Extract(a) => Settings {
                dataset: a.dataset.clone(),
                ..Settings::default()
            },
            Command::Match(a) => Settings {
                fingerprints: a.fingerprints.clone(),
                tau: a.tau,
                ..Settings::default()
            },
            Command::Eval(a) => Settings {
                dataset: a.dataset.clone(),
                scores: a.scores.clone(),
                fingerprints: a.fingerprints.clone(),
                ..Settings::default()
            },
        }
    }
}
