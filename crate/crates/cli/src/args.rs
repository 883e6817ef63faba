use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reverb_forge::analysis::RirKind;
use reverb_forge::config::ConfigOverlay;

#[derive(Debug, Parser)]
#[command(name = "reverb-forge", version, about = "Room impulse response analysis, synthesis and reverberant evaluation")]
pub struct Cli {
    /// Flat key = value config file (TOML); flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,

    /// Run seed (overrides the config file and REVERB_FORGE_SEED).
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate T60, DRR and band T60s for every RIR in a directory.
    Analyze(AnalyzeArgs),
    /// Filter an RIR directory by T60/DRR and split it into train and test.
    Partition(PartitionArgs),
    /// Derive synthetic RIRs with random T60/DRR targets from parent RIRs.
    Synthesize(SynthesizeArgs),
    /// Generate RIRs for random shoebox rooms with the image method.
    Simulate(SimulateArgs),
    /// Build a reverberant evaluation condition (spoofed trials only).
    BuildEval(BuildEvalArgs),
    /// Export one epoch of the reverberation augmentation stream.
    Augment(AugmentArgs),
    /// Score a detector: pooled/per-condition EER and the T60 x DRR FAR grid.
    EvalScores(EvalScoresArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Recorded,
    Synthetic,
    Simulated,
}

impl From<KindArg> for RirKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Recorded => RirKind::Recorded,
            KindArg::Synthetic => RirKind::Synthetic,
            KindArg::Simulated => RirKind::Simulated,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "DIR")]
    pub rirs: PathBuf,
    /// Report CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "recorded")]
    pub kind: KindArg,
    /// Skip the octave-band T60 columns.
    #[arg(long)]
    pub no_bands: bool,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long, value_name = "DIR")]
    pub rirs: PathBuf,
    #[arg(long, value_name = "S")]
    pub t60_max: Option<f64>,
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pub drr_min: Option<f64>,
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pub drr_max: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub n_test: usize,
    #[arg(long, value_name = "DIR", default_value = "partition")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long, value_name = "DIR")]
    pub parents: PathBuf,
    /// Accepted outputs per parent.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Reshape the decay broadband instead of per octave band.
    #[arg(long)]
    pub broadband: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "M")]
    pub length_min: Option<f64>,
    #[arg(long, value_name = "M")]
    pub length_max: Option<f64>,
    #[arg(long, value_name = "M")]
    pub width_min: Option<f64>,
    #[arg(long, value_name = "M")]
    pub width_max: Option<f64>,
    #[arg(long, value_name = "M")]
    pub height_min: Option<f64>,
    #[arg(long, value_name = "M")]
    pub height_max: Option<f64>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long, value_name = "HZ")]
    pub sample_rate: Option<u32>,
    /// Fixed reflection order instead of the adaptive one.
    #[arg(long)]
    pub max_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildEvalArgs {
    /// Source manifest (clean condition).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub rirs: PathBuf,
    #[arg(long, value_name = "NAME")]
    pub condition_name: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "recorded")]
    pub kind: KindArg,
    /// Apply the random amplitude scaling (off by default for evaluation).
    #[arg(long)]
    pub random_scale: bool,
    /// Cut outputs to the clean length instead of keeping the tail.
    #[arg(long)]
    pub trim: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub rirs: PathBuf,
    /// Probability of reverberating an item.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "recorded")]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct EvalScoresArgs {
    /// `utt_id score` per line.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// Key manifest.
    #[arg(long, value_name = "FILE")]
    pub key: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Scores are higher for spoofed trials.
    #[arg(long)]
    pub invert: bool,
    /// Grid threshold; defaults to the pooled EER threshold.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub t60_bins: Option<usize>,
    #[arg(long)]
    pub drr_bins: Option<usize>,
}

impl Cli {
    /// Config values given as flags, the highest-precedence layer.
    pub fn overlay(&self) -> ConfigOverlay {
        let mut o = ConfigOverlay { seed: self.seed, ..Default::default() };
        match &self.command {
            Command::Partition(a) => {
                o.t60_max = a.t60_max;
                o.drr_min = a.drr_min;
                o.drr_max = a.drr_max;
            }
            Command::Synthesize(a) if a.broadband => o.per_band = Some(false),
            Command::Augment(a) => o.p_apply = a.p,
            Command::EvalScores(a) => {
                o.grid_t60_bins = a.t60_bins;
                o.grid_drr_bins = a.drr_bins;
            }
            _ => {}
        }
        o
    }
}
