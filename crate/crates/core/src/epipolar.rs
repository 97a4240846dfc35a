//! Essential matrices, the induced fundamental matrix, and Sampson error.

use nalgebra::{Matrix3, Vector2, Vector3};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::camera::PinholeCamera;
use crate::error::EpipolarError;
use crate::pose::PoseWithScale;

/// `[v]_x`, the matrix form of the cross product `v x .`.
pub fn skew_symmetric(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// An essential matrix, Frobenius-normalized to `sqrt(2)` (the norm of an
/// exact essential matrix with unit translation). Defined up to sign.
///
/// Convention: for bearings `q1`, `q2` of a correct match under a pose
/// mapping view 2 to view 1, `q2^T E q1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(Matrix3<f64>);

impl EssentialMatrix {
    /// Wraps a matrix after Frobenius-normalizing it to `sqrt(2)`.
    pub(crate) fn new_normalized(m: Matrix3<f64>) -> Self {
        Self(m * (core::f64::consts::SQRT_2 / m.norm()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Essential matrix of a pose (view-2 -> view-1 convention), satisfying
/// `q2^T E q1 = 0`.
///
/// Built as `skew(t') * R'` of the inverse pose (`R' = R^T`,
/// `t' = -R^T t`); the depth scale does not affect the epipolar constraint.
pub fn essential_from_pose(pose: &PoseWithScale) -> Result<EssentialMatrix, EpipolarError> {
    if pose.translation.norm() < 1e-12 {
        return Err(EpipolarError::DegenerateTranslation);
    }
    let r_inv = pose.rotation.matrix().transpose();
    let t_inv = -(r_inv * pose.translation);
    Ok(EssentialMatrix::new_normalized(skew_symmetric(&t_inv) * r_inv))
}

/// Fundamental matrix acting on pixel coordinates: `K2^-T * E * K1^-1`,
/// satisfying `x2^T F x1 = 0` for pixel correspondences.
pub fn fundamental_from_essential(
    e: &EssentialMatrix,
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
) -> Matrix3<f64> {
    camera2.inverse_intrinsics().transpose() * e.matrix() * camera1.inverse_intrinsics()
}

/// First-order geometric distance of a correspondence to the epipolar
/// constraint `x2^T F x1 = 0`, in the units of the input coordinates
/// (pixels when `F` is a fundamental matrix on pixels).
///
/// Returns `+inf` when both constraint gradients vanish (both points at the
/// epipoles), where the first-order distance is undefined.
pub fn sampson_error(f: &Matrix3<f64>, x1: Vector2<f64>, x2: Vector2<f64>) -> f64 {
    let h1 = Vector3::new(x1.x, x1.y, 1.0);
    let h2 = Vector3::new(x2.x, x2.y, 1.0);
    let fx1 = f * h1;
    let ftx2 = f.transpose() * h2;
    let residual = h2.dot(&fx1);
    let denom = fx1.x * fx1.x + fx1.y * fx1.y + ftx2.x * ftx2.x + ftx2.y * ftx2.y;
    if denom == 0.0 {
        return f64::INFINITY;
    }
    (residual * residual / denom).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Rotation;
    use approx::assert_relative_eq;

    fn example_pose() -> PoseWithScale {
        PoseWithScale::new(
            Rotation::from_euler_angles(0.1, -0.3, 0.2),
            Vector3::new(0.4, -0.1, 0.25),
            1.0,
        )
    }

    #[test]
    fn pure_translation_along_z_gives_normalized_skew() {
        let pose = PoseWithScale::new(Rotation::identity(), Vector3::new(0.0, 0.0, 2.0), 1.0);
        let e = essential_from_pose(&pose).unwrap();
        let s = skew_symmetric(&Vector3::new(0.0, 0.0, 1.0));
        // E is defined up to sign.
        let d = ((e.matrix() - s).norm()).min((e.matrix() + s).norm());
        assert!(d < 1e-14, "difference {d}");
    }

    #[test]
    fn essential_properties() {
        let e = essential_from_pose(&example_pose()).unwrap();
        assert_relative_eq!(e.matrix().norm(), core::f64::consts::SQRT_2, epsilon = 1e-14);
        assert!(e.matrix().determinant().abs() < 1e-14);
        let svd = e.matrix().svd(false, false);
        let mut sv: [f64; 3] = svd.singular_values.into();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(sv[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sv[1], 1.0, epsilon = 1e-12);
        assert!(sv[2] < 1e-14);
    }

    #[test]
    fn epipolar_constraint_on_constructed_match() {
        let pose = example_pose();
        let e = essential_from_pose(&pose).unwrap();
        // A point in front of both cameras, expressed in each frame.
        let x2 = Vector3::new(0.3, -0.2, 4.0);
        let x1 = pose.transform(x2);
        let residual = x2.dot(&(e.matrix() * x1));
        assert!(residual.abs() < 1e-12, "residual {residual}");
    }

    #[test]
    fn zero_translation_is_degenerate() {
        let pose = PoseWithScale::new(Rotation::identity(), Vector3::zeros(), 1.0);
        assert_eq!(
            essential_from_pose(&pose),
            Err(EpipolarError::DegenerateTranslation)
        );
    }

    #[test]
    fn sampson_zero_on_exact_match() {
        let pose = example_pose();
        let cam = PinholeCamera::from_focal(600.0, Vector2::new(300.0, 300.0), 600, 600).unwrap();
        let e = essential_from_pose(&pose).unwrap();
        let f = fundamental_from_essential(&e, &cam, &cam);
        let x2 = Vector3::new(0.1, 0.05, 3.0);
        let x1 = pose.transform(x2);
        let p1 = cam.project(x1).unwrap();
        let p2 = cam.project(x2).unwrap();
        assert!(sampson_error(&f, p1, p2) < 1e-9);
    }

    #[test]
    fn sampson_epipole_sentinel() {
        // F = skew(e_z): both gradients vanish at the origin-pixel pair.
        let f = skew_symmetric(&Vector3::new(0.0, 0.0, 1.0));
        let err = sampson_error(&f, Vector2::zeros(), Vector2::zeros());
        assert!(err.is_infinite());
    }

    #[test]
    fn sampson_perturbation_is_first_order() {
        let pose = example_pose();
        let cam = PinholeCamera::from_focal(600.0, Vector2::new(300.0, 300.0), 600, 600).unwrap();
        let e = essential_from_pose(&pose).unwrap();
        let f = fundamental_from_essential(&e, &cam, &cam);
        let x2 = Vector3::new(0.1, 0.05, 3.0);
        let x1 = pose.transform(x2);
        let p1 = cam.project(x1).unwrap();
        let p2 = cam.project(x2).unwrap();

        // Direction perpendicular to the epipolar line of p1 in image 2.
        let line = f * Vector3::new(p1.x, p1.y, 1.0);
        let normal = Vector2::new(line.x, line.y).normalize();
        let ft_x2 = f.transpose() * Vector3::new(p2.x, p2.y, 1.0);
        let g_line = (line.x * line.x + line.y * line.y).sqrt();
        let g_both = (g_line * g_line + ft_x2.x * ft_x2.x + ft_x2.y * ft_x2.y).sqrt();
        let slope = g_line / g_both;

        let delta = 0.01;
        let err = sampson_error(&f, p1, p2 + delta * normal);
        assert_relative_eq!(err / delta, slope, max_relative = 1e-2);
        assert!(err / delta > 0.3 && err / delta <= 1.0);
    }
}
