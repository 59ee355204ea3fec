use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointmask::{Connectivity, EvalConfig, PmgConfig, UpdateConfig};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pointmask", version, about = "Pseudo masks for infrared small targets from point labels")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Cropping extent along each scan direction.
    #[arg(long, global = true)]
    pub l_ep: Option<usize>,
    /// Half-width of the profile band across each scan direction.
    #[arg(long, global = true)]
    pub l_dp: Option<usize>,
    /// Weight of the labelled pixel in the box threshold.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// False-alarm radius (L1, pixels).
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Centroid distance for a detection hit.
    #[arg(long, global = true)]
    pub d_match: Option<f64>,
    /// Fraction of full scale above which soft predictions count as foreground.
    #[arg(long, global = true)]
    pub binarize_threshold: Option<f64>,
    /// Component connectivity used by the update stage.
    #[arg(long, global = true, value_parser = ["4", "8"])]
    pub connectivity: Option<String>,
    /// Treat targets as darker than their surroundings.
    #[arg(long, global = true)]
    pub invert: bool,
    /// Seed for stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Where to write the run log (defaults next to the outputs).
    #[arg(long, global = true)]
    pub run_log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with exact ground truth.
    Synth(SynthArgs),
    /// Derive point labels from ground-truth mask centroids.
    Centroids(CentroidsArgs),
    /// Generate initial masks from point labels.
    Pmg(PmgArgs),
    /// Merge filtered predictions into the current masks.
    Update(UpdateArgs),
    /// Score masks against ground truth.
    Eval(EvalArgs),
    /// Re-run generation or filtering over a range of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec JSON: one scene, an array of scenes, or `{"random": {...}}`.
    #[arg(long)]
    pub spec: PathBuf,
    /// Optional corruption spec JSON; writes degraded copies of the ground
    /// truth as predictions.
    #[arg(long)]
    pub corrupt: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CentroidsArgs {
    /// Take ground-truth masks from this manifest.
    #[arg(long, conflicts_with = "masks_dir", required_unless_present = "masks_dir")]
    pub manifest: Option<PathBuf>,
    /// Or from every PNG in this directory (ids are file stems).
    #[arg(long)]
    pub masks_dir: Option<PathBuf>,
    /// Output points file.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-axis standard deviation of the displacement, as a fraction of each
    /// target's longer side.
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PmgArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for masks and the updated manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Stop at the first failing image.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the current mask for images without a prediction.
    #[arg(long)]
    pub allow_missing_pred: bool,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    /// The `initial_mask` of each entry (pseudo masks).
    Initial,
    /// The `prediction_mask` of each entry.
    Prediction,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "initial")]
    pub source: MaskSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SweepParam {
    #[value(name = "l_ep", alias = "l-ep")]
    #[serde(rename = "l_ep")]
    LEp,
    #[value(name = "l_dp", alias = "l-dp")]
    #[serde(rename = "l_dp")]
    LDp,
    #[value(name = "alpha")]
    #[serde(rename = "alpha")]
    Alpha,
    #[value(name = "r")]
    #[serde(rename = "r")]
    R,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<f64>,
    /// Output directory for `sweep.csv` and the run log.
    #[arg(long)]
    pub out: PathBuf,
}

/// Validated configuration after applying overrides.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub pmg: PmgConfig,
    pub update: UpdateConfig,
    pub eval: EvalConfig,
    pub seed: Option<u64>,
}

impl Common {
    pub fn effective(&self) -> Result<Effective, CliError> {
        let mut pmg = PmgConfig::default();
        let mut update = UpdateConfig::default();
        let mut eval = EvalConfig::default();
        if let Some(v) = self.l_ep {
            pmg.l_ep = v;
        }
        if let Some(v) = self.l_dp {
            pmg.l_dp = v;
        }
        if let Some(v) = self.alpha {
            pmg.alpha = v;
        }
        pmg.invert = self.invert;
        if let Some(v) = self.r {
            update.r = v;
        }
        if let Some(c) = &self.connectivity {
            update.connectivity = if c == "4" {
                Connectivity::Four
            } else {
                Connectivity::Eight
            };
        }
        if let Some(v) = self.d_match {
            eval.d_match = v;
        }
        if let Some(v) = self.binarize_threshold {
            eval.binarize_threshold = v;
        }
        pmg.validate()?;
        update.validate()?;
        eval.validate()?;
        if self.jobs == Some(0) {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok(Effective {
            pmg,
            update,
            eval,
            seed: self.seed,
        })
    }
}
