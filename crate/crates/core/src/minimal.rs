//! Closed-form relative pose + depth scale from one lifted correspondence.
//!
//! A correct lifted correspondence satisfies `point1 = s*R*point2 + t` and
//! `tangent1 = s*R*tangent2`, so the tangent pair determines `(R, s)` alone
//! and the point pair then pins `t`. Two solvers are provided:
//!
//! - [`solve_orthonorm`]: orthonormalizes each tangent frame into a rotation
//!   and composes them; SVD-free and cheap, but not a least-squares fit.
//! - [`solve_umeyama`]: orthogonal-Procrustes alignment of the tangents via
//!   an SVD of the rank-completed 3x3 covariance; jointly optimal in `(R, s)`
//!   for the Frobenius residual `|tangent1 - s*R*tangent2|`.

use nalgebra::{Matrix3, Matrix3x2, Vector3};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::correspondence::LiftedCorrespondence;
use crate::error::SolveError;
use crate::pose::{PoseWithScale, Rotation};

/// Norm threshold under which a tangent frame is considered degenerate.
const FRAME_TOLERANCE: f64 = 1e-12;

/// Which minimal solver backs a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SolverVariant {
    /// Frame-orthonormalization solver.
    Orthonorm,
    /// Procrustes (Umeyama) solver.
    Umeyama,
}

impl SolverVariant {
    pub const ALL: [SolverVariant; 2] = [SolverVariant::Orthonorm, SolverVariant::Umeyama];

    pub fn name(self) -> &'static str {
        match self {
            SolverVariant::Orthonorm => "orthonorm",
            SolverVariant::Umeyama => "umeyama",
        }
    }

    pub fn solve(self, lifted: &LiftedCorrespondence) -> Result<PoseWithScale, SolveError> {
        match self {
            SolverVariant::Orthonorm => solve_orthonorm(lifted),
            SolverVariant::Umeyama => solve_umeyama(lifted),
        }
    }
}

/// Builds the rotation whose columns orthonormalize a rank-2 3x2 frame.
///
/// The third column is the direction of the frame's second column, the first
/// is the (oriented) normal of the frame's span, and the middle column
/// completes the right-handed basis. Two frames related by a rotation
/// (`Y1 = s*Q*Y2`, `s > 0`) therefore map to rotations related by the same
/// `Q`, which is what the composition in [`solve_orthonorm`] relies on.
pub fn orthonormalize_frame(y: &Matrix3x2<f64>) -> Result<Rotation, SolveError> {
    let c1: Vector3<f64> = y.column(0).into_owned();
    let c2: Vector3<f64> = y.column(1).into_owned();
    let normal = c1.cross(&c2);
    let normal_norm = normal.norm();
    if normal_norm < FRAME_TOLERANCE {
        return Err(SolveError::DegenerateFrame(normal_norm));
    }
    let c2_norm = c2.norm();
    if c2_norm < FRAME_TOLERANCE {
        return Err(SolveError::DegenerateFrame(c2_norm));
    }
    let r_x = normal / normal_norm;
    let r_z = c2 / c2_norm;
    Ok(Rotation::from_columns(r_x, r_z.cross(&r_x), r_z))
}

/// Scale that best maps `tangent2` onto `tangent1` under a fixed rotation:
/// `tr(tangent1^T R tangent2) / tr(tangent2^T tangent2)`.
pub fn recover_scale(
    rotation: &Rotation,
    tangent1: &Matrix3x2<f64>,
    tangent2: &Matrix3x2<f64>,
) -> Result<f64, SolveError> {
    let denom = tangent2.norm_squared();
    if denom <= 1e-20 {
        return Err(SolveError::DegenerateFrame(denom));
    }
    let num = (tangent1.transpose() * (rotation.matrix() * tangent2)).trace();
    Ok(num / denom)
}

/// Translation closing the point constraint: `point1 - s*R*point2`.
pub fn recover_translation(
    rotation: &Rotation,
    scale: f64,
    point1: &Vector3<f64>,
    point2: &Vector3<f64>,
) -> Vector3<f64> {
    point1 - scale * (rotation.matrix() * point2)
}

/// Closed-form solver composing per-view frame orthonormalizations.
///
/// `R = R1 * R2^T` where `Ri = orthonormalize_frame(tangenti)`; the scale and
/// translation then follow from [`recover_scale`] / [`recover_translation`].
/// Exact on consistent input; on noisy input it is not a least-squares fit
/// (see [`solve_umeyama`]).
pub fn solve_orthonorm(lifted: &LiftedCorrespondence) -> Result<PoseWithScale, SolveError> {
    let r1 = orthonormalize_frame(&lifted.tangent1)?;
    let r2 = orthonormalize_frame(&lifted.tangent2)?;
    let rotation = r1 * r2.transpose();
    let scale = recover_scale(&rotation, &lifted.tangent1, &lifted.tangent2)?;
    let translation = recover_translation(&rotation, scale, &lifted.point1, &lifted.point2);
    Ok(PoseWithScale::new(rotation, translation, scale))
}

/// Oriented unit normal of a 3x2 frame's span: `c1 x c2`, normalized.
fn oriented_span_normal(y: &Matrix3x2<f64>) -> Result<Vector3<f64>, SolveError> {
    let c1: Vector3<f64> = y.column(0).into_owned();
    let c2: Vector3<f64> = y.column(1).into_owned();
    let normal = c1.cross(&c2);
    let norm = normal.norm();
    if norm < FRAME_TOLERANCE {
        return Err(SolveError::DegenerateFrame(norm));
    }
    Ok(normal / norm)
}

/// Procrustes solver: SVD of the rank-completed 3x3 tangent covariance.
///
/// The covariance `C = T1 * T2^T` has rank <= 2 by construction, so the
/// singular pair spanning its null directions is arbitrarily ill-conditioned
/// and can cost the extracted rotation many digits even on exact input. Those
/// null directions are known in closed form: the oriented unit normals `n1`,
/// `n2` of the two tangent spans. Any proper rotation taking span(`T2`) onto
/// span(`T1`) maps `n2` to `n1` (rotations preserve cross products), so
/// augmenting to `C + k*n1*n2^T` with `k > 0` leaves the optimal rotation
/// unchanged while giving the third singular value the magnitude `k`. The
/// orientation pairing then forces `det(U V^T) = +1` for the SVD
/// `U S V^T = C + k*n1*n2^T` whenever the middle singular value is resolved
/// above the noise floor, so the rotation is `R = U * V^T`; the reflection
/// guard (flip the pair with the smallest singular value) only engages when
/// extreme conditioning has reduced that pair's relative sign to roundoff.
/// The scale follows as `tr(R^T C) / tr(T2^T T2)`, and the resulting `(R, s)`
/// minimizes `|T1 - s R T2|_F` jointly over rotations and scales.
pub fn solve_umeyama(lifted: &LiftedCorrespondence) -> Result<PoseWithScale, SolveError> {
    let normal1 = oriented_span_normal(&lifted.tangent1)?;
    let normal2 = oriented_span_normal(&lifted.tangent2)?;
    let covariance: Matrix3<f64> = lifted.tangent1 * lifted.tangent2.transpose();
    // Any positive weight preserves the optimum; the norm product keeps the
    // completed direction on the scale of the leading singular value.
    let weight = lifted.tangent1.norm() * lifted.tangent2.norm();
    let augmented = covariance + weight * normal1 * normal2.transpose();
    let svd = augmented
        .try_svd(true, true, f64::EPSILON, 250)
        .ok_or(SolveError::NumericalFailure)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(SolveError::NumericalFailure),
    };
    let mut flip = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        flip[svd.singular_values.imin()] = -1.0;
    }
    let rotation = Rotation::from_matrix_unchecked(u * Matrix3::from_diagonal(&flip) * v_t);
    let scale = recover_scale(&rotation, &lifted.tangent1, &lifted.tangent2)?;
    let translation = recover_translation(&rotation, scale, &lifted.point1, &lifted.point2);
    Ok(PoseWithScale::new(rotation, translation, scale))
}
