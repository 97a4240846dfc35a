//! Central camera models: pixel -> bearing maps and their Jacobians.

use nalgebra::{Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::error::CameraError;

/// A central-projective view: maps pixels to bearing directions.
///
/// The constraint derivation only consumes the bearing and its Jacobian with
/// respect to the pixel, so any central camera (fisheye, omnidirectional, ...)
/// can back the solvers by implementing this trait. [`PinholeCamera`] is the
/// shipped implementation.
pub trait CentralCamera {
    /// Bearing of a pixel. Not unit-normalized: for the pinhole model the
    /// third component is 1, so depth along the bearing is projective depth.
    fn bearing(&self, pixel: Vector2<f64>) -> Vector3<f64>;

    /// Jacobian of [`CentralCamera::bearing`] with respect to the pixel (3x2).
    fn bearing_jacobian(&self, pixel: Vector2<f64>) -> Matrix3x2<f64>;
}

/// Calibrated pinhole camera with image bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    intrinsics: Matrix3<f64>,
    inverse_intrinsics: Matrix3<f64>,
    width: u32,
    height: u32,
}

impl PinholeCamera {
    /// Builds a camera from an intrinsic matrix and image size.
    ///
    /// `k` must be upper-triangular with a strictly positive diagonal. A
    /// matrix with `k[(2,2)] != 1` is homogeneous-normalized so bearings keep
    /// a unit third component.
    pub fn new(k: Matrix3<f64>, width: u32, height: u32) -> Result<Self, CameraError> {
        let lower_ok = k[(1, 0)] == 0.0 && k[(2, 0)] == 0.0 && k[(2, 1)] == 0.0;
        let diag_ok = k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0;
        if !lower_ok || !diag_ok || !k.iter().all(|v| v.is_finite()) {
            return Err(CameraError::InvalidIntrinsics);
        }
        let k = k / k[(2, 2)];
        // Upper-triangular with positive diagonal: invertible in closed form.
        let inverse_intrinsics = k.try_inverse().ok_or(CameraError::InvalidIntrinsics)?;
        Ok(Self {
            intrinsics: k,
            inverse_intrinsics,
            width,
            height,
        })
    }

    /// Convenience constructor for a square-pixel, zero-skew camera.
    pub fn from_focal(
        focal: f64,
        principal: Vector2<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let k = Matrix3::new(
            focal, 0.0, principal.x, //
            0.0, focal, principal.y, //
            0.0, 0.0, 1.0,
        );
        Self::new(k, width, height)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn inverse_intrinsics(&self) -> &Matrix3<f64> {
        &self.inverse_intrinsics
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Image diagonal in pixels; inlier thresholds are quoted as a fraction
    /// of this.
    pub fn diagonal(&self) -> f64 {
        let w = f64::from(self.width);
        let h = f64::from(self.height);
        (w * w + h * h).sqrt()
    }

    /// Projects a camera-frame point to a pixel. Fails on non-positive depth.
    pub fn project(&self, point: Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
        if point.z <= 0.0 {
            return Err(CameraError::BehindCamera(point.z));
        }
        let h = self.intrinsics * point;
        Ok(Vector2::new(h.x / h.z, h.y / h.z))
    }

    /// Jacobian of [`PinholeCamera::project`] with respect to the camera-frame
    /// point (2x3), evaluated at `point`.
    pub fn projection_jacobian(&self, point: Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
        if point.z <= 0.0 {
            return Err(CameraError::BehindCamera(point.z));
        }
        let k = &self.intrinsics;
        let (x, y, z) = (point.x, point.y, point.z);
        // Rows of K enter linearly; d(u)/dp = (k1 * z - k3 * (k1 . p)) / z^2
        // with k3 = e3 for a normalized K.
        let fx = k[(0, 0)];
        let s = k[(0, 1)];
        let fy = k[(1, 1)];
        Ok(Matrix2x3::new(
            fx / z,
            s / z,
            -(fx * x + s * y) / (z * z),
            0.0,
            fy / z,
            -fy * y / (z * z),
        ))
    }

    /// True when the pixel lies inside `[0, w] x [0, h]`.
    pub fn contains(&self, pixel: Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.x <= f64::from(self.width)
            && pixel.y >= 0.0
            && pixel.y <= f64::from(self.height)
    }
}

impl CentralCamera for PinholeCamera {
    fn bearing(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        self.inverse_intrinsics * Vector3::new(pixel.x, pixel.y, 1.0)
    }

    fn bearing_jacobian(&self, _pixel: Vector2<f64>) -> Matrix3x2<f64> {
        // d(K^-1 [x; 1])/dx: the first two columns of K^-1, independent of x.
        self.inverse_intrinsics.fixed_columns::<2>(0).into_owned()
    }
}
