//! Error type of the command-line tools. Every variant maps to exit code 1;
//! argument mistakes are reported by the parser with exit code 2.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A correspondence line that is not valid JSON.
    #[error("{path}:{line}: invalid JSON: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// A correspondence line that parses but violates the record schema.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// A depth map or intrinsics file that cannot be decoded.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    /// A depth sample outside the central-difference margin.
    #[error(
        "sample at ({x}, {y}) is outside the interior margin [1, {}] x [1, {}] of a {width}x{height} map",
        width.saturating_sub(2),
        height.saturating_sub(2)
    )]
    OutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    /// A non-positive interpolated depth.
    #[error("non-positive depth {0} at the sampled point")]
    InvalidDepth(f64),
    #[error(transparent)]
    Camera(#[from] relpose_core::CameraError),
    #[error(transparent)]
    Lift(#[from] relpose_core::LiftError),
    #[error(transparent)]
    Solve(#[from] relpose_core::SolveError),
    #[error(transparent)]
    Ransac(#[from] relpose_core::RansacError),
    #[error(transparent)]
    Synth(#[from] relpose_core::SynthError),
    /// Everything else: missing depth sources, bad indices, singular frames.
    #[error("{0}")]
    Invalid(String),
}
