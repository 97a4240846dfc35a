//! Synthetic two-view scenes: randomized camera pairs observing oriented
//! surface patches, with controllable Gaussian corruption of every observed
//! quantity. This is the data source for the stability, noise and
//! applicability studies in [`crate::study`].

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::camera::PinholeCamera;
use crate::correspondence::{AffineCorrespondence, DepthObservation, LocalAffineFrame, Observation};
use crate::error::SynthError;
use crate::pose::{PoseWithScale, Rotation};

/// Rejection-sampling attempt budget before reporting failure. Per-attempt
/// acceptance under the default scene is roughly 10%, so the budget must be
/// large enough that no stream of a multi-thousand-instance study ever
/// exhausts it by bad luck; it only trips on configurations whose acceptance
/// is genuinely (near-)zero.
const GENERATION_ATTEMPTS: usize = 10_000;

/// Patch draws granted to one camera pair per requested point before the
/// pair is deemed to share too little frustum and redrawn. Deliberately
/// small: redrawing the cameras is cheap, and the overall failure guard is
/// [`GENERATION_ATTEMPTS`] camera redraws.
const PATCH_ATTEMPTS_PER_PAIR: usize = 100;

/// Geometry of the randomized two-view scenes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneConfig {
    /// Focal length in pixels (square pixels, zero skew).
    pub focal: f64,
    /// Principal point in pixels.
    pub principal_point: [f64; 2],
    /// Image width and height in pixels.
    pub image_size: (u32, u32),
    /// Camera centers lie on a shell whose radius is uniform in this range.
    pub distance_range: (f64, f64),
    /// Cameras look at a uniform point in the origin-centered cube with this
    /// half-width.
    pub look_at_half_width: f64,
    /// Base seed. Study runners derive an independent stream per instance
    /// with [`instance_rng`], so results do not depend on scheduling.
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            focal: 600.0,
            principal_point: [300.0, 300.0],
            image_size: (600, 600),
            distance_range: (1.0, 2.0),
            look_at_half_width: 0.5,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// The pinhole camera shared by both views.
    pub fn camera(&self) -> PinholeCamera {
        PinholeCamera::from_focal(
            self.focal,
            Vector2::new(self.principal_point[0], self.principal_point[1]),
            self.image_size.0,
            self.image_size.1,
        )
        .expect("scene config holds valid intrinsics")
    }
}

/// Standard deviations of the zero-mean Gaussian corruption applied to each
/// observed quantity (per coordinate / matrix entry, both views).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseConfig {
    /// Pixel coordinates of the patch centers.
    pub sigma_px: f64,
    /// Entries of the 2x2 affine frames.
    pub sigma_frame: f64,
    /// Depths.
    pub sigma_depth: f64,
    /// Depth-gradient components.
    pub sigma_gradient: f64,
}

impl NoiseConfig {
    /// No corruption.
    pub const NONE: NoiseConfig = NoiseConfig {
        sigma_px: 0.0,
        sigma_frame: 0.0,
        sigma_depth: 0.0,
        sigma_gradient: 0.0,
    };
}

/// World -> camera rigid transform of one view: `x_cam = R * x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsolutePose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl AbsolutePose {
    pub fn transform(&self, x: Vector3<f64>) -> Vector3<f64> {
        self.rotation.matrix() * x + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.matrix().transpose() * self.translation)
    }
}

/// Relative pose mapping view-2 camera coordinates into view 1
/// (`R = R1 R2^T`, `t = t1 - R t2`), with unit depth scale.
pub fn relative_pose(pose1: &AbsolutePose, pose2: &AbsolutePose) -> PoseWithScale {
    let rotation = pose1.rotation * pose2.rotation.transpose();
    let translation = pose1.translation - rotation.matrix() * pose2.translation;
    PoseWithScale::new(rotation, translation, 1.0)
}

/// One synthetic instance: a camera pair observing a single oriented surface
/// patch, plus everything a detector and a monocular depth network would
/// report about it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub pose1: AbsolutePose,
    pub pose2: AbsolutePose,
    /// Ground-truth relative pose (view 2 -> view 1) including depth scale.
    pub relative: PoseWithScale,
    /// Surface point in world coordinates.
    pub point: Vector3<f64>,
    /// Unit surface normal at `point`.
    pub normal: Vector3<f64>,
    /// The simulated measurements.
    pub observation: Observation,
}

/// A camera pair observing many independent surface patches, for the robust
/// estimation and applicability studies.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub pose1: AbsolutePose,
    pub pose2: AbsolutePose,
    /// Ground-truth relative pose (view 2 -> view 1).
    pub relative: PoseWithScale,
    pub observations: Vec<Observation>,
}

/// An orthonormal basis of the plane orthogonal to a unit normal, as a 3x2
/// matrix. The basis parameterizes the local surface patch around a point.
///
/// Deterministic: the first column is `n x e` (normalized) with `e` the
/// coordinate axis of smallest magnitude in `n`, the second is `n x c1`.
pub fn nullspace_of_normal(n: &Vector3<f64>) -> Result<Matrix3x2<f64>, SynthError> {
    let norm = n.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidNormal(norm));
    }
    let abs = n.abs();
    let axis = if abs.x <= abs.y && abs.x <= abs.z {
        Vector3::x()
    } else if abs.y <= abs.z {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let c1 = n.cross(&axis).normalize();
    let c2 = n.cross(&c1);
    Ok(Matrix3x2::from_columns(&[c1, c2]))
}

/// Draws one camera: center uniform on a spherical shell, looking at a
/// uniform point near the origin, with world-up (0, 1, 0). Redrawn while the
/// view direction is within 1e-6 of +/- up, where the look-at frame is
/// undefined.
pub fn sample_camera(cfg: &SceneConfig, rng: &mut impl Rng) -> AbsolutePose {
    let h = cfg.look_at_half_width;
    loop {
        let dir: [f64; 3] = UnitSphere.sample(rng);
        let distance = rng.random_range(cfg.distance_range.0..=cfg.distance_range.1);
        let center = distance * Vector3::from(dir);
        let target = Vector3::new(
            rng.random_range(-h..=h),
            rng.random_range(-h..=h),
            rng.random_range(-h..=h),
        );
        let forward = (target - center).normalize();
        let up = Vector3::y();
        if forward.dot(&up).abs() > 1.0 - 1e-6 {
            continue;
        }
        let right = up.cross(&forward).normalize();
        let down = forward.cross(&right);
        let rotation = Rotation::from_matrix_unchecked(Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]));
        let translation = -(rotation.matrix() * center);
        return AbsolutePose {
            rotation,
            translation,
        };
    }
}

/// Draws a full instance: two cameras and one surface patch visible in both
/// views. Every rejected attempt redraws the entire instance, so acceptance
/// does not bias the camera distribution.
pub fn generate_scene(cfg: &SceneConfig, rng: &mut impl Rng) -> Result<SceneSample, SynthError> {
    let camera = cfg.camera();
    for _ in 0..GENERATION_ATTEMPTS {
        let pose1 = sample_camera(cfg, rng);
        let pose2 = sample_camera(cfg, rng);
        if let Some(sample) = sample_surface_patch(&camera, &pose1, &pose2, rng)? {
            return Ok(sample);
        }
    }
    Err(SynthError::GenerationFailure(GENERATION_ATTEMPTS))
}

/// Like [`generate_scene`] with the camera pair held fixed; only the surface
/// patch is redrawn on rejection.
pub fn generate_scene_with_cameras(
    cfg: &SceneConfig,
    pose1: &AbsolutePose,
    pose2: &AbsolutePose,
    rng: &mut impl Rng,
) -> Result<SceneSample, SynthError> {
    let camera = cfg.camera();
    for _ in 0..GENERATION_ATTEMPTS {
        if let Some(sample) = sample_surface_patch(&camera, pose1, pose2, rng)? {
            return Ok(sample);
        }
    }
    Err(SynthError::GenerationFailure(GENERATION_ATTEMPTS))
}

/// Draws one camera pair and `count` independent surface patches visible in
/// both of its views.
pub fn generate_scene_pair(
    cfg: &SceneConfig,
    count: usize,
    rng: &mut impl Rng,
) -> Result<ScenePair, SynthError> {
    let camera = cfg.camera();
    'cameras: for _ in 0..GENERATION_ATTEMPTS {
        let pose1 = sample_camera(cfg, rng);
        let pose2 = sample_camera(cfg, rng);
        let mut observations = Vec::with_capacity(count);
        for _ in 0..count {
            let mut accepted = false;
            for _ in 0..PATCH_ATTEMPTS_PER_PAIR {
                if let Some(sample) = sample_surface_patch(&camera, &pose1, &pose2, rng)? {
                    observations.push(sample.observation);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                // This camera pair barely shares a frustum; redraw it.
                continue 'cameras;
            }
        }
        let relative = relative_pose(&pose1, &pose2);
        return Ok(ScenePair {
            pose1,
            pose2,
            relative,
            observations,
        });
    }
    Err(SynthError::GenerationFailure(GENERATION_ATTEMPTS))
}

/// One rejection-sampling attempt: a standard-normal 3D point with a uniform
/// unit normal, accepted if it projects inside both images.
fn sample_surface_patch(
    camera: &PinholeCamera,
    pose1: &AbsolutePose,
    pose2: &AbsolutePose,
    rng: &mut impl Rng,
) -> Result<Option<SceneSample>, SynthError> {
    let point = Vector3::new(gauss(rng), gauss(rng), gauss(rng));
    let normal = Vector3::from(<UnitSphere as Distribution<[f64; 3]>>::sample(&UnitSphere, rng));
    let basis = nullspace_of_normal(&normal)?;
    let Some((view1, depth1)) = observe(camera, pose1, &point, &basis) else {
        return Ok(None);
    };
    let Some((view2, depth2)) = observe(camera, pose2, &point, &basis) else {
        return Ok(None);
    };
    Ok(Some(SceneSample {
        pose1: *pose1,
        pose2: *pose2,
        relative: relative_pose(pose1, pose2),
        point,
        normal,
        observation: Observation {
            correspondence: AffineCorrespondence { view1, view2 },
            depth1,
            depth2,
        },
    }))
}

/// Projects a surface patch into one view: patch center pixel, the 2x2 frame
/// (pixel derivative along the patch basis), the depth and its gradient
/// along the same basis.
fn observe(
    camera: &PinholeCamera,
    pose: &AbsolutePose,
    point: &Vector3<f64>,
    basis: &Matrix3x2<f64>,
) -> Option<(LocalAffineFrame, DepthObservation)> {
    let x_cam = pose.transform(*point);
    let pixel = camera.project(x_cam).ok()?;
    if !camera.contains(pixel) {
        return None;
    }
    let rotated = pose.rotation.matrix() * basis;
    let frame = camera.projection_jacobian(x_cam).ok()? * rotated;
    let depth = DepthObservation::new(x_cam.z, rotated.row(2).into_owned());
    Some((LocalAffineFrame { point: pixel, frame }, depth))
}

/// Multiplies the view-2 depth and depth gradient by `scale`, simulating a
/// depth source in a different unit; the ground-truth depth scale becomes
/// `1 / scale` so the lifted constraints keep holding exactly.
pub fn apply_depth_scale(sample: &SceneSample, scale: f64) -> SceneSample {
    let mut out = sample.clone();
    out.observation.depth2.depth *= scale;
    out.observation.depth2.gradient *= scale;
    out.relative.scale /= scale;
    out
}

/// Adds the configured zero-mean Gaussian noise to one observation.
///
/// A fixed number of variates is drawn regardless of which sigmas are zero,
/// so sweeping one noise source never shifts the stream feeding the others
/// (a zero-pixel-noise cell and a noisy-pixel cell see the same depth
/// perturbations, and vice versa). Depths are clamped to at least 1e-6 to
/// stay liftable.
pub fn add_observation_noise(
    observation: &Observation,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Observation {
    let mut out = *observation;
    out.correspondence.view1.point.x += noise.sigma_px * gauss(rng);
    out.correspondence.view1.point.y += noise.sigma_px * gauss(rng);
    out.correspondence.view2.point.x += noise.sigma_px * gauss(rng);
    out.correspondence.view2.point.y += noise.sigma_px * gauss(rng);
    for frame in [
        &mut out.correspondence.view1.frame,
        &mut out.correspondence.view2.frame,
    ] {
        for entry in frame.iter_mut() {
            *entry += noise.sigma_frame * gauss(rng);
        }
    }
    for depth in [&mut out.depth1, &mut out.depth2] {
        depth.depth = (depth.depth + noise.sigma_depth * gauss(rng)).max(1e-6);
    }
    for depth in [&mut out.depth1, &mut out.depth2] {
        depth.gradient[0] += noise.sigma_gradient * gauss(rng);
        depth.gradient[1] += noise.sigma_gradient * gauss(rng);
    }
    out
}

/// [`add_observation_noise`] applied to a scene sample; the ground truth is
/// left untouched.
pub fn add_noise(sample: &SceneSample, noise: &NoiseConfig, rng: &mut impl Rng) -> SceneSample {
    let mut out = sample.clone();
    out.observation = add_observation_noise(&sample.observation, noise, rng);
    out
}

/// Turns `count` randomly chosen observations into gross outliers by
/// replacing their view-2 patch center with a uniform pixel. Returns the
/// corrupted indices, sorted.
pub fn corrupt_with_outliers(
    observations: &mut [Observation],
    count: usize,
    cfg: &SceneConfig,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let count = count.min(observations.len());
    let mut indices: Vec<usize> = (0..observations.len()).collect();
    for i in 0..count {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(count);
    indices.sort_unstable();
    let (w, h) = cfg.image_size;
    for &i in &indices {
        observations[i].correspondence.view2.point = Vector2::new(
            rng.random_range(0.0..=f64::from(w)),
            rng.random_range(0.0..=f64::from(h)),
        );
    }
    indices
}

/// The RNG for instance `index` of a run seeded with `seed`: stream `index`
/// of the seeded cipher, so instances are independent and a parallel runner
/// produces identical results in any schedule.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gauss(rng: &mut impl Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}
