//! `petseg` command-line tool.

mod argfile;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use petseg::components::Connectivity;
use petseg::ensemble::BlendMode;
use petseg::ranking::TieRule;

#[derive(Debug, Parser)]
#[command(name = "petseg", version, about = "PET/CT lesion segmentation toolkit")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// JSON file with default flag values per subcommand; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SUV conversion, body crop, CT normalisation and resampling.
    Preprocess(PreprocessArgs),
    /// Write seeded augmented patches and a manifest of drawn parameters.
    Augment(AugmentArgs),
    /// Generalized Dice, focal and combined loss for logit or probability patches.
    Loss(LossArgs),
    /// Label connected components of a mask.
    Components(ComponentsArgs),
    /// Per-case DSC / FPV / FNV with aggregate report.
    Evaluate(EvaluateArgs),
    /// Lesion MTV / SUV statistics and patient burden.
    Measures(MeasuresArgs),
    /// Sliding-window planning, blending, averaging and thresholding.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
    /// Rank submissions by the weighted rank score.
    Rank(RankArgs),
    /// Aggregate tables and histograms from a metrics file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Manifest with case_id, gt_path, pet_path, ct_path and SUV columns.
    #[arg(long, conflicts_with_all = ["pet", "ct"])]
    pub manifest: Option<PathBuf>,
    /// PET activity image in Bq/ml (single-case mode).
    #[arg(long, requires = "ct")]
    pub pet: Option<PathBuf>,
    #[arg(long, requires = "pet")]
    pub ct: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value = "case")]
    pub case_id: String,
    /// Injected activity, Bq.
    #[arg(long)]
    pub dose: Option<f64>,
    /// Minutes from injection to scan start.
    #[arg(long, default_value_t = 0.0)]
    pub decay_min: f64,
    #[arg(long, default_value_t = petseg::preprocess::F18_HALF_LIFE_MIN)]
    pub half_life_min: f64,
    #[arg(long)]
    pub weight_kg: Option<f64>,
    /// Output voxel size, mm.
    #[arg(long, default_value_t = 2.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = -800.0, allow_negative_numbers = true)]
    pub body_ct_hu: f64,
    #[arg(long, default_value_t = 0.1)]
    pub body_suv: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Folder of `{case}_pet`, `{case}_ct`, `{case}_mask` NIfTI files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Augmented samples per case.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, default_value_t = 128)]
    pub patch_size: usize,
    /// Draw translations in ±range instead of [0, range).
    #[arg(long)]
    pub signed_translation: bool,
    #[arg(long, default_value_t = 8)]
    pub elastic_pitch: usize,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Logit patches (2-channel, or 1-channel foreground); one per patch.
    #[arg(long, num_args = 1.., required = true)]
    pub logits: Vec<PathBuf>,
    /// Target masks, one per logit patch.
    #[arg(long, num_args = 1.., required = true)]
    pub target: Vec<PathBuf>,
    /// Inputs are class probabilities rather than logits.
    #[arg(long)]
    pub probabilities: bool,
    #[arg(long, default_value_t = 1.0)]
    pub dice_numerator_factor: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bg_weight: f64,
    #[arg(long, default_value_t = 100.0)]
    pub fg_weight: f64,
    /// Write per-patch gradients as `grad_{k}.nii.gz` (logit inputs only).
    #[arg(long)]
    pub gradient_dir: Option<PathBuf>,
    /// JSON output (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComponentsArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Label map output (int32 NIfTI).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "6")]
    pub connectivity: Connectivity,
    /// CSV of label, n_voxels, volume_ml.
    #[arg(long)]
    pub sizes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, conflicts_with_all = ["gt_dir", "pred_dir"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "pred_dir")]
    pub gt_dir: Option<PathBuf>,
    #[arg(long, requires = "gt_dir")]
    pub pred_dir: Option<PathBuf>,
    /// Output folder for metrics.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "6")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 1.0)]
    pub both_empty_dsc: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct MeasuresArgs {
    #[arg(long, requires = "pet", conflicts_with = "manifest")]
    pub mask: Option<PathBuf>,
    /// SUV image.
    #[arg(long, requires = "mask")]
    pub pet: Option<PathBuf>,
    /// Cohort mode: manifest with gt_path, pet_path, tracer (and optional SUV columns).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// lesions.csv (single case) or cohort JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "6")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCommand {
    /// Write windows.json for a volume (optionally cut PET/CT windows).
    Plan(PlanArgs),
    /// Blend window logits into a probability map.
    Blend(BlendArgs),
    /// Average probability (or logit) maps of several models.
    Average(AverageArgs),
    /// Threshold a probability map (strict >) and optionally resample back.
    Binarize(BinarizeArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Any image on the grid to be tiled.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = petseg::ensemble::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = petseg::ensemble::DEFAULT_OVERLAP)]
    pub overlap: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `w_{x}_{y}_{z}_pet.nii.gz` / `_ct.nii.gz` inputs here.
    #[arg(long, requires_all = ["pet", "ct"])]
    pub extract_dir: Option<PathBuf>,
    #[arg(long)]
    pub pet: Option<PathBuf>,
    #[arg(long)]
    pub ct: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Folder holding `w_{x}_{y}_{z}.nii.gz` logits.
    #[arg(long)]
    pub windows: PathBuf,
    /// Foreground probability output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "uniform")]
    pub blend_mode: BlendMode,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(long = "in", num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Inputs are logit files; average logits before the softmax.
    #[arg(long)]
    pub logits: bool,
}

#[derive(Debug, Args)]
pub struct BinarizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Resample the mask onto this image's grid (nearest neighbour).
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "average")]
    pub ties: TieRule,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Also write the per-tracer histograms alone.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match argfile::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let jobs = cli.jobs;
    match petseg::par::with_jobs(jobs, || commands::run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
