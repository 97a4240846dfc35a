//! Affine correspondences with depth, and their lifting into the
//! camera-frame constraint quantities.

use nalgebra::{Matrix2, Matrix3x2, RowVector2, Vector2, Vector3};

use crate::camera::CentralCamera;
use crate::error::LiftError;

/// An oriented image patch: a pixel location plus the 2x2 linear map from the
/// patch's canonical coordinates to pixel offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAffineFrame {
    pub point: Vector2<f64>,
    pub frame: Matrix2<f64>,
}

/// A pair of local affine frames depicting the same surface patch; the
/// first-order map between pixel vicinities is `frame2 * frame1^-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCorrespondence {
    pub view1: LocalAffineFrame,
    pub view2: LocalAffineFrame,
}

/// Depth at a patch center plus its gradient along the patch's canonical
/// coordinates (the same parameterization the affine frame maps to pixels).
///
/// Per-pixel depth gradients `g_px` (e.g. finite differences on a depth map)
/// convert as `gradient = g_px * frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthObservation {
    pub depth: f64,
    pub gradient: RowVector2<f64>,
}

impl DepthObservation {
    pub fn new(depth: f64, gradient: RowVector2<f64>) -> Self {
        Self { depth, gradient }
    }
}

/// One robust-estimation datum: an affine correspondence with a depth
/// observation per view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub correspondence: AffineCorrespondence,
    pub depth1: DepthObservation,
    pub depth2: DepthObservation,
}

impl Observation {
    /// Lifts this observation under the given cameras; see [`lift`].
    pub fn lift(
        &self,
        camera1: &impl CentralCamera,
        camera2: &impl CentralCamera,
    ) -> Result<LiftedCorrespondence, LiftError> {
        lift(&self.correspondence, &self.depth1, &self.depth2, camera1, camera2)
    }
}

/// The lifted form of a correspondence: the patch center as a camera-frame
/// point per view, and the 3x2 derivative of that point along the patch
/// coordinates (a scaled tangent basis of the surface).
///
/// For a correct correspondence with relative pose `(R, t)` and depth scale
/// `Lambda`: `point1 = Lambda * R * point2 + t` and
/// `tangent1 = Lambda * R * tangent2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedCorrespondence {
    pub point1: Vector3<f64>,
    pub point2: Vector3<f64>,
    pub tangent1: Matrix3x2<f64>,
    pub tangent2: Matrix3x2<f64>,
}

/// Lifts an affine correspondence with depths into camera-frame constraint
/// quantities.
///
/// Per view: `point = depth * bearing(x)` and
/// `tangent = bearing(x) * gradient + depth * bearing_jacobian(x) * frame`.
pub fn lift(
    correspondence: &AffineCorrespondence,
    depth1: &DepthObservation,
    depth2: &DepthObservation,
    camera1: &impl CentralCamera,
    camera2: &impl CentralCamera,
) -> Result<LiftedCorrespondence, LiftError> {
    let (point1, tangent1) = lift_view(&correspondence.view1, depth1, camera1, 1)?;
    let (point2, tangent2) = lift_view(&correspondence.view2, depth2, camera2, 2)?;
    Ok(LiftedCorrespondence {
        point1,
        point2,
        tangent1,
        tangent2,
    })
}

fn lift_view(
    laf: &LocalAffineFrame,
    depth: &DepthObservation,
    camera: &impl CentralCamera,
    view: usize,
) -> Result<(Vector3<f64>, Matrix3x2<f64>), LiftError> {
    if depth.depth <= 0.0 || !depth.depth.is_finite() {
        return Err(LiftError::InvalidDepth(depth.depth, view));
    }
    let q = camera.bearing(laf.point);
    let point = depth.depth * q;
    let tangent = q * depth.gradient + depth.depth * (camera.bearing_jacobian(laf.point) * laf.frame);
    Ok((point, tangent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::PinholeCamera;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn identity_cam() -> PinholeCamera {
        PinholeCamera::new(Matrix3::identity(), 4, 4).unwrap()
    }

    fn canonical_obs(depth: f64) -> (AffineCorrespondence, DepthObservation) {
        let laf = LocalAffineFrame {
            point: Vector2::new(0.0, 0.0),
            frame: Matrix2::identity(),
        };
        (
            AffineCorrespondence {
                view1: laf,
                view2: laf,
            },
            DepthObservation::new(depth, RowVector2::zeros()),
        )
    }

    #[test]
    fn canonical_lift() {
        let cam = identity_cam();
        let (corr, d) = canonical_obs(1.0);
        let lifted = lift(&corr, &d, &d, &cam, &cam).unwrap();
        assert_relative_eq!(lifted.point1, Vector3::new(0.0, 0.0, 1.0));
        let expected = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(lifted.tangent1, expected);
    }

    #[test]
    fn lift_scales_linearly_with_depth() {
        let cam = identity_cam();
        let (corr, d1) = canonical_obs(1.0);
        let (_, d2) = canonical_obs(2.0);
        let a = lift(&corr, &d1, &d1, &cam, &cam).unwrap();
        let b = lift(&corr, &d2, &d2, &cam, &cam).unwrap();
        assert_relative_eq!(b.point1, 2.0 * a.point1);
        assert_relative_eq!(b.tangent1, 2.0 * a.tangent1);
    }

    #[test]
    fn gradient_term_adds_bearing_outer_product() {
        let cam = identity_cam();
        let (corr, _) = canonical_obs(1.0);
        let d = DepthObservation::new(1.0, RowVector2::new(0.5, -0.25));
        let lifted = lift(&corr, &d, &d, &cam, &cam).unwrap();
        // bearing is e3, so the gradient lands in the third row.
        let expected = Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.5, -0.25);
        assert_relative_eq!(lifted.tangent1, expected);
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let cam = identity_cam();
        let (corr, good) = canonical_obs(1.0);
        for bad in [0.0, -1.0, f64::NAN] {
            let d = DepthObservation::new(bad, RowVector2::zeros());
            let err = lift(&corr, &d, &good, &cam, &cam).unwrap_err();
            assert!(matches!(err, LiftError::InvalidDepth(_, 1)));
            let err = lift(&corr, &good, &d, &cam, &cam).unwrap_err();
            assert!(matches!(err, LiftError::InvalidDepth(_, 2)));
        }
    }
}
