//! Error types shared across the crate.

use thiserror::Error;

/// Camera construction and projection failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    /// Intrinsics must be upper-triangular with a strictly positive diagonal.
    #[error("intrinsic matrix is not upper-triangular with positive diagonal")]
    InvalidIntrinsics,
    /// Projection of a point at or behind the camera plane.
    #[error("point has non-positive depth {0}")]
    BehindCamera(f64),
}

/// Failures when lifting an affine correspondence with depths.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LiftError {
    /// Depths must be strictly positive.
    #[error("non-positive depth {0} in view {1}")]
    InvalidDepth(f64, usize),
}

/// Rotation / pose validation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    /// The matrix is not orthonormal with determinant +1 within tolerance.
    #[error("matrix is not a rotation (orthonormality defect {defect:.3e}, det {det:.6})")]
    NotARotation { defect: f64, det: f64 },
    /// A direction metric was requested for a (near-)zero vector.
    #[error("translation is (near) zero; direction undefined")]
    DegenerateTranslation,
}

/// Minimal-solver failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    /// Tangent frame columns are (near-)parallel or vanish; no orthonormal
    /// basis can be extracted.
    #[error("degenerate tangent frame (norm {0:.3e})")]
    DegenerateFrame(f64),
    /// An iterative decomposition failed to converge.
    #[error("numerical decomposition failure")]
    NumericalFailure,
}

/// Eight-point / decomposition / triangulation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpipolarError {
    /// Fewer correspondences than the solver minimum.
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientData { needed: usize, got: usize },
    /// Design matrix rank below 8 (e.g. pure rotation or coplanar degeneracy).
    #[error("degenerate correspondence configuration (rank-deficient design matrix)")]
    DegenerateConfiguration,
    /// No candidate pose passed the positive-depth vote.
    #[error("cheirality check failed: no candidate pose places a majority of points in front of both cameras")]
    CheiralityFailure,
    /// Triangulation rays are (near-)parallel.
    #[error("triangulation rays are (near-)parallel")]
    DegenerateRays,
    /// Essential matrix construction from a zero-translation pose.
    #[error("translation is (near) zero; essential matrix undefined")]
    DegenerateTranslation,
    /// An iterative decomposition failed to converge.
    #[error("numerical decomposition failure")]
    NumericalFailure,
}

/// Robust-estimator failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RansacError {
    /// No hypothesis ever reached two inliers.
    #[error("no model found: no hypothesis reached 2 inliers in {iterations} iterations")]
    NoModelFound { iterations: u64 },
    /// The input set was empty.
    #[error("empty correspondence set")]
    EmptyData,
    /// A correspondence could not be lifted (invalid depth).
    #[error("correspondence {index} could not be lifted: {source}")]
    InvalidData {
        index: usize,
        source: LiftError,
    },
}

/// Synthetic-generator failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    /// No sample fell inside both frusta within the attempt budget.
    #[error("no in-frustum sample found after {0} attempts")]
    GenerationFailure(usize),
    /// Surface normals must be unit length.
    #[error("surface normal must be unit length (norm {0})")]
    InvalidNormal(f64),
}
