//! Non-minimal epipolar machinery used by local optimization: normalized
//! eight-point fit, essential-matrix decomposition with a positive-depth
//! vote, and linear two-ray triangulation.

use alloc::vec::Vec;

use nalgebra::{Matrix3, RowSVector, SMatrix, Vector2, Vector3};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::epipolar::EssentialMatrix;
use crate::error::EpipolarError;
use crate::pose::{PoseWithScale, Rotation};

/// Relative eigenvalue ratio of the 9x9 normal matrix under which the design
/// matrix is declared rank-deficient (squared singular-value ratio ~1e-9).
const RANK_TOLERANCE: f64 = 1e-18;

/// A pair of bearing vectors (view 1, view 2) for one correspondence.
pub type BearingPair = (Vector3<f64>, Vector3<f64>);

/// Normalized eight-point fit of the essential matrix over bearing pairs.
///
/// Bearings are reduced to normalized image coordinates, conditioned with an
/// isotropic rescaling per view (centroid to origin, mean distance sqrt(2)),
/// and the constraint `q2^T E q1 = 0` is solved in least squares via the
/// smallest eigenvector of the 9x9 normal matrix. The result is projected to
/// the essential manifold by averaging the two largest singular values and
/// zeroing the third.
pub fn eight_point(matches: &[BearingPair]) -> Result<EssentialMatrix, EpipolarError> {
    if matches.len() < 8 {
        return Err(EpipolarError::InsufficientData {
            needed: 8,
            got: matches.len(),
        });
    }
    let plane1: Vec<Vector2<f64>> = matches.iter().map(|(q1, _)| normalized_plane(q1)).collect();
    let plane2: Vec<Vector2<f64>> = matches.iter().map(|(_, q2)| normalized_plane(q2)).collect();
    let t1 = conditioning_transform(&plane1)?;
    let t2 = conditioning_transform(&plane2)?;

    let mut normal = SMatrix::<f64, 9, 9>::zeros();
    for (p1, p2) in plane1.iter().zip(&plane2) {
        let c1 = apply_conditioning(&t1, p1);
        let c2 = apply_conditioning(&t2, p2);
        // Row of the design matrix for vec(E) (row-major), from q2^T E q1.
        let row = RowSVector::<f64, 9>::from_row_slice(&[
            c2.x * c1.x,
            c2.x * c1.y,
            c2.x,
            c2.y * c1.x,
            c2.y * c1.y,
            c2.y,
            c1.x,
            c1.y,
            1.0,
        ]);
        normal += row.transpose() * row;
    }

    let eigen = normal.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| {
        eigen.eigenvalues[i]
            .partial_cmp(&eigen.eigenvalues[j])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let smallest = order[0];
    let second = order[1];
    let largest = order[8];
    if eigen.eigenvalues[second] < RANK_TOLERANCE * eigen.eigenvalues[largest].max(f64::MIN_POSITIVE)
    {
        // Rank < 8: the solution space is not one-dimensional (e.g. pure
        // rotation, where every skew(t)*R fits).
        return Err(EpipolarError::DegenerateConfiguration);
    }
    let e = eigen.eigenvectors.column(smallest);
    let conditioned = Matrix3::new(e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8]);

    // Undo conditioning: q2^T (T2^T E' T1) q1 = (T2 q2)^T E' (T1 q1).
    let denormalized = t2.transpose() * conditioned * t1;
    project_to_essential(&denormalized)
}

fn normalized_plane(q: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Hartley conditioning: translate the centroid to the origin and scale the
/// mean distance to sqrt(2).
fn conditioning_transform(points: &[Vector2<f64>]) -> Result<Matrix3<f64>, EpipolarError> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if mean_dist < 1e-15 {
        return Err(EpipolarError::DegenerateConfiguration);
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s, 0.0, -s * centroid.x, //
        0.0, s, -s * centroid.y, //
        0.0, 0.0, 1.0,
    ))
}

fn apply_conditioning(t: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

/// Projects onto the essential manifold: singular values become
/// `(s, s, 0)` with `s` the mean of the two largest, then the wrapper
/// Frobenius-normalizes.
fn project_to_essential(m: &Matrix3<f64>) -> Result<EssentialMatrix, EpipolarError> {
    let svd = m
        .try_svd(true, true, 1e-14, 250)
        .ok_or(EpipolarError::NumericalFailure)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(EpipolarError::NumericalFailure),
    };
    let mut order = [0usize, 1, 2];
    let s = svd.singular_values;
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(core::cmp::Ordering::Equal));
    let sigma = (s[order[0]] + s[order[1]]) / 2.0;
    if sigma <= 0.0 {
        return Err(EpipolarError::DegenerateConfiguration);
    }
    let u = Matrix3::from_columns(&[
        u.column(order[0]).into_owned(),
        u.column(order[1]).into_owned(),
        u.column(order[2]).into_owned(),
    ]);
    let v_t = Matrix3::from_rows(&[
        v_t.row(order[0]).into_owned(),
        v_t.row(order[1]).into_owned(),
        v_t.row(order[2]).into_owned(),
    ]);
    let projected = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)) * v_t;
    Ok(EssentialMatrix::new_normalized(&projected * 1.0))
}

/// Decomposes an essential matrix into the pose (view-2 -> view-1, unit
/// translation, unit scale) that triangulates the most matches with positive
/// depth in both views.
///
/// Fails with [`EpipolarError::CheiralityFailure`] when no candidate wins a
/// strict majority of the positive-depth vote.
pub fn decompose_essential(
    e: &EssentialMatrix,
    matches: &[BearingPair],
) -> Result<PoseWithScale, EpipolarError> {
    if matches.is_empty() {
        return Err(EpipolarError::InsufficientData { needed: 1, got: 0 });
    }
    let svd = e
        .matrix()
        .try_svd(true, true, 1e-14, 250)
        .ok_or(EpipolarError::NumericalFailure)?;
    let (mut u, mut v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(EpipolarError::NumericalFailure),
    };
    // Work in SO(3): E is sign-ambiguous, so flipping the zero-singular-value
    // axes changes nothing.
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if v_t.determinant() < 0.0 {
        v_t.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    // E = skew(t') R' for the inverse pose (view-1 -> view-2); invert each
    // candidate back into this crate's view-2 -> view-1 convention.
    let rotations = [u * w * v_t, u * w.transpose() * v_t];
    let translation = u.column(2).into_owned();

    let mut best: Option<(usize, PoseWithScale)> = None;
    for r_fwd in rotations {
        for sign in [1.0, -1.0] {
            let t_fwd = sign * translation;
            let rotation = Rotation::from_matrix_unchecked(r_fwd.transpose());
            let pose = PoseWithScale::new(rotation, -(r_fwd.transpose() * t_fwd), 1.0);
            let mut votes = 0usize;
            for pair in matches {
                if let Ok((_, d1, d2)) = triangulate_linear(&pose, pair.0, pair.1) {
                    if d1 > 0.0 && d2 > 0.0 {
                        votes += 1;
                    }
                }
            }
            if best.as_ref().is_none_or(|(v, _)| votes > *v) {
                best = Some((votes, pose));
            }
        }
    }
    let (votes, pose) = best.expect("four candidates were evaluated");
    if 2 * votes <= matches.len() {
        return Err(EpipolarError::CheiralityFailure);
    }
    Ok(pose)
}

/// Linear (closest-point) triangulation of a bearing pair under a pose.
///
/// Returns the midpoint of the shortest segment between the two rays in the
/// view-1 frame, plus the signed ray parameters (projective depths for
/// z-normalized bearings) along each bearing.
pub fn triangulate_linear(
    pose: &PoseWithScale,
    bearing1: Vector3<f64>,
    bearing2: Vector3<f64>,
) -> Result<(Vector3<f64>, f64, f64), EpipolarError> {
    // Ray 1: s1 * q1 from the origin. Ray 2: t + s2 * (R q2) from the
    // view-2 center expressed in view 1.
    let d2 = pose.rotation.matrix() * bearing2;
    let t = pose.translation;
    let g11 = bearing1.norm_squared();
    let g22 = d2.norm_squared();
    let g12 = bearing1.dot(&d2);
    let det = g11 * g22 - g12 * g12;
    // sin^2 of the ray angle; parallel rays leave the segment unconstrained.
    if det < 1e-24 * g11 * g22 {
        return Err(EpipolarError::DegenerateRays);
    }
    let b1 = bearing1.dot(&t);
    let b2 = d2.dot(&t);
    let s1 = (g22 * b1 - g12 * b2) / det;
    let s2 = (g12 * b1 - g11 * b2) / det;
    let point = ((s1 * bearing1) + (t + s2 * d2)) / 2.0;
    Ok((point, s1, s2))
}
