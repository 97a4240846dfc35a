//! Command-line surface of the relative-pose toolkit: single-correspondence
//! solving, robust estimation over correspondence files, the synthetic study
//! runners, and closed-form iteration tables.
//!
//! Results go to stdout (or `--out`) with stable bytes for fixed inputs and
//! seeds; diagnostics and timings go to stderr. Exit codes: 0 on success,
//! 1 on domain errors (bad files, failed estimation), 2 on usage errors.

pub mod error;
pub mod io;
pub mod output;

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relpose_core::SolverVariant;

#[derive(Debug, Parser)]
#[command(
    name = "relpose",
    version,
    about = "Relative pose (rotation, translation, depth scale) from a single affine correspondence with monocular depth"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every randomized procedure.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the bench runners (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Input files shared by the per-dataset commands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Correspondence file, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Intrinsics JSON of view 1.
    #[arg(long)]
    pub intrinsics1: PathBuf,
    /// Intrinsics JSON of view 2 (defaults to view 1's).
    #[arg(long)]
    pub intrinsics2: Option<PathBuf>,
    /// Depth map of view 1 (PFM or raw f32), used when records carry no
    /// depth fields.
    #[arg(long)]
    pub depth1: Option<PathBuf>,
    /// Depth map of view 2.
    #[arg(long)]
    pub depth2: Option<PathBuf>,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    /// Frame-wise orthonormalization.
    Orthonorm,
    /// Joint SVD alignment of both tangents.
    Umeyama,
}

impl From<SolverArg> for SolverVariant {
    fn from(arg: SolverArg) -> Self {
        match arg {
            SolverArg::Orthonorm => SolverVariant::Orthonorm,
            SolverArg::Umeyama => SolverVariant::Umeyama,
        }
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one correspondence for rotation, translation, and depth scale.
    Solve {
        #[command(flatten)]
        data: DataArgs,
        /// Record index to solve.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, value_enum, default_value_t = SolverArg::Orthonorm)]
        solver: SolverArg,
    },
    /// Robust pose estimation over all correspondences of a file.
    Ransac {
        #[command(flatten)]
        data: DataArgs,
        /// Probability that the returned model is outlier-free.
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        /// Inlier threshold as a fraction of the image diagonal.
        #[arg(long, default_value_t = 0.0005)]
        threshold_fraction: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iterations: u64,
        /// Consensus size that triggers local optimization.
        #[arg(long, default_value_t = 6)]
        min_inliers_lo: usize,
        #[arg(long, value_enum, default_value_t = SolverArg::Orthonorm)]
        solver: SolverArg,
    },
    /// Synthetic studies over the built-in scene generator.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Closed-form analyses.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Dump the lifted constraint quantities of one correspondence.
    Lift {
        #[command(flatten)]
        data: DataArgs,
        /// Record index to lift.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Noise-free solver error distributions.
    Stability {
        #[arg(long, default_value_t = 30_000)]
        instances: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
        /// Emit the log10 error histogram instead of the quantile summary
        /// (CSV only).
        #[arg(long)]
        histogram: bool,
    },
    /// Error growth along the per-source noise sweeps, against a multi-point
    /// epipolar baseline.
    Noise {
        #[arg(long, default_value_t = 1000)]
        instances_per_cell: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
    /// How often a single-correspondence hypothesis explains its scene.
    Applicability {
        #[arg(long, default_value_t = 100)]
        pairs: u64,
        /// Correspondences per scene pair.
        #[arg(long, default_value_t = 100)]
        correspondences: usize,
        /// Fraction of matches replaced by gross outliers.
        #[arg(long, default_value_t = 0.0)]
        outlier_fraction: f64,
        /// Pixel noise level.
        #[arg(long, default_value_t = 0.0)]
        sigma_px: f64,
        /// Affine-frame noise level.
        #[arg(long, default_value_t = 0.0)]
        sigma_frame: f64,
        /// Depth and depth-gradient noise level.
        #[arg(long, default_value_t = 0.0)]
        sigma_depth: f64,
        /// Emit per-pair usable fractions instead of the error CDF
        /// (CSV only).
        #[arg(long)]
        per_pair: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Iterations needed to draw one outlier-free sample at a confidence
    /// level, tabulated over inlier ratios and sample sizes.
    Iters {
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        /// Comma-separated inlier ratios.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.1")]
        inlier_ratios: Vec<f64>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
        sample_sizes: Vec<u32>,
    },
}

/// Parses `std::env::args` and runs the selected command; returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap reports usage errors itself and exits with code 2
        // (0 for --help/--version).
        Err(e) => e.exit(),
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
