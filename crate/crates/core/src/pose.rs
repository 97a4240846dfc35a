//! Validated rotations, scaled relative poses, and angular error metrics.

use nalgebra::{Matrix3, Unit, Vector3};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::error::PoseError;

/// Tolerance for accepting a matrix as a rotation (per-entry defect of
/// `R^T R - I` and `|det - 1|`).
pub const ROTATION_TOLERANCE: f64 = 1e-10;

/// A 3x3 rotation matrix, validated on checked construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`ROTATION_TOLERANCE`].
    pub fn try_new(m: Matrix3<f64>) -> Result<Self, PoseError> {
        let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !defect.is_finite() || defect > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE
        {
            return Err(PoseError::NotARotation { defect, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is a rotation by construction (e.g. a product of
    /// validated rotations or an orthonormal column basis).
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Builds the rotation with the given (orthonormal) columns.
    pub fn from_columns(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> Self {
        Self(Matrix3::from_columns(&[x, y, z]))
    }

    pub fn from_axis_angle(axis: Unit<Vector3<f64>>, angle: f64) -> Self {
        Self(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn from_euler_angles(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(*nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Largest absolute entry of `R^T R - I`; 0 for an exact rotation.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    /// Geodesic angle to `other` in radians, in `[0, pi]`.
    ///
    /// Evaluated as `atan2(sin, cos)` of the relative rotation rather than
    /// `acos((tr - 1)/2)`: the arccosine form quantizes near-zero angles at
    /// ~2e-8 rad (one trace ulp), which is far above the error floor of the
    /// closed-form solvers this crate measures.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let rel = self.0 * other.0.transpose();
        let skew = rel - rel.transpose();
        let sin = skew.norm() / (2.0 * core::f64::consts::SQRT_2);
        let cos = (rel.trace() - 1.0) / 2.0;
        sin.atan2(cos)
    }

    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

impl core::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl core::ops::Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Relative pose between two views with a global depth scale.
///
/// Maps view-2 camera coordinates to view-1 camera coordinates:
/// `x1 = scale * R * x2 + t`. The scale multiplies view-2 depths so that both
/// views share view-1's metric; a unit scale means the two depth sources
/// already agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseWithScale {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl PoseWithScale {
    pub fn new(rotation: Rotation, translation: Vector3<f64>, scale: f64) -> Self {
        Self {
            rotation,
            translation,
            scale,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros(), 1.0)
    }

    /// Maps a view-2 camera-frame point into view 1.
    pub fn transform(&self, x2: Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation.0 * x2) + self.translation
    }
}

/// Angle between two rotations in degrees, in `[0, 180]`.
pub fn rotation_error_deg(estimate: &Rotation, truth: &Rotation) -> f64 {
    estimate.angle_to(truth).to_degrees()
}

/// Angle between two translation directions in degrees, in `[0, 180]`.
///
/// Scale-invariant. Near-zero vectors have no direction and are rejected.
pub fn translation_error_deg(
    estimate: &Vector3<f64>,
    truth: &Vector3<f64>,
) -> Result<f64, PoseError> {
    if estimate.norm() < 1e-12 || truth.norm() < 1e-12 {
        return Err(PoseError::DegenerateTranslation);
    }
    let cross = estimate.cross(truth).norm();
    let dot = estimate.dot(truth);
    Ok(cross.atan2(dot).to_degrees())
}
