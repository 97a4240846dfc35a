//! 1-point RANSAC around the single-correspondence solvers, with Sampson
//! inlier classification in pixels and a local-optimization step that refits
//! the consensus set with the eight-point algorithm.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::camera::{CentralCamera, PinholeCamera};
use crate::correspondence::{LiftedCorrespondence, Observation};
use crate::epipolar::{essential_from_pose, fundamental_from_essential, sampson_error};
use crate::error::RansacError;
use crate::minimal::{recover_scale, recover_translation, SolverVariant};
use crate::nonminimal::{decompose_essential, eight_point, BearingPair};
use crate::pose::PoseWithScale;

/// Knobs of [`ransac_1ac_d`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RansacConfig {
    /// Probability that the returned model is outlier-free, in (0, 1).
    pub confidence: f64,
    /// Inlier threshold as a fraction of the image diagonal (mean of the two
    /// views' diagonals when they differ).
    pub threshold_fraction: f64,
    /// Hard iteration cap.
    pub max_iterations: u64,
    /// Minimum consensus size before local optimization is attempted.
    pub min_inliers_for_lo: usize,
    /// Seed of the hypothesis stream; fixes the result bit-for-bit.
    pub seed: u64,
    /// Minimal solver generating hypotheses.
    pub solver: SolverVariant,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            threshold_fraction: 0.0005,
            max_iterations: 10_000,
            min_inliers_for_lo: 6,
            seed: 0,
            solver: SolverVariant::Orthonorm,
        }
    }
}

impl RansacConfig {
    /// Inlier threshold in pixels for a camera pair.
    pub fn threshold_px(&self, camera1: &PinholeCamera, camera2: &PinholeCamera) -> f64 {
        self.threshold_fraction * (camera1.diagonal() + camera2.diagonal()) / 2.0
    }
}

/// Outcome of a robust estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustResult {
    pub pose: PoseWithScale,
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
    pub iterations_run: u64,
    /// Local-optimization refit rounds executed over the whole run.
    pub lo_steps: u32,
    /// Sum of threshold-truncated Sampson errors over all data (lower is
    /// better); the tie-breaker between equal consensus sizes.
    pub score: f64,
}

/// Iterations needed to draw one all-inlier sample of size `sample_size`
/// with probability `confidence`, i.e. `log(1-c) / log(1-r^m)` rounded to
/// the nearest integer, at least 1.
///
/// Saturates at `u64::MAX` when the inlier ratio is non-positive (or so
/// small the success probability underflows); callers clamp with their own
/// iteration cap.
pub fn required_iterations(confidence: f64, inlier_ratio: f64, sample_size: u32) -> u64 {
    if inlier_ratio.is_nan() || inlier_ratio <= 0.0 {
        return u64::MAX;
    }
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let success = inlier_ratio.powi(sample_size as i32);
    // ln(1 - success) computed as ln_1p(-success): exact for the tiny
    // success probabilities of large samples.
    let denominator = (-success).ln_1p();
    if denominator == 0.0 {
        return u64::MAX;
    }
    let needed = ((1.0 - confidence).ln() / denominator).round();
    if !needed.is_finite() {
        return u64::MAX;
    }
    (needed as u64).max(1)
}

/// An inlier mask plus a flag marking poses that cannot classify at all.
#[derive(Debug, Clone, PartialEq)]
pub struct InlierClassification {
    pub mask: Vec<bool>,
    /// True when the pose has (near-)zero translation, so no epipolar
    /// geometry exists; the mask is then all-false.
    pub degenerate: bool,
}

impl InlierClassification {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Classifies each correspondence by its pixel-domain Sampson distance to
/// the pose's epipolar geometry: inlier iff `error < threshold_px`.
pub fn classify_inliers(
    pose: &PoseWithScale,
    data: &[Observation],
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
    threshold_px: f64,
) -> InlierClassification {
    let Ok(essential) = essential_from_pose(pose) else {
        return InlierClassification {
            mask: alloc::vec![false; data.len()],
            degenerate: true,
        };
    };
    let f = fundamental_from_essential(&essential, camera1, camera2);
    let mask = data
        .iter()
        .map(|obs| {
            sampson_error(&f, obs.correspondence.view1.point, obs.correspondence.view2.point)
                < threshold_px
        })
        .collect();
    InlierClassification {
        mask,
        degenerate: false,
    }
}

/// Threshold-truncated Sampson sum of a pose over all data; the secondary
/// (lower-is-better) model score.
fn truncated_score(
    pose: &PoseWithScale,
    data: &[Observation],
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
    threshold_px: f64,
) -> f64 {
    let Ok(essential) = essential_from_pose(pose) else {
        return threshold_px * data.len() as f64;
    };
    let f = fundamental_from_essential(&essential, camera1, camera2);
    data.iter()
        .map(|obs| {
            sampson_error(&f, obs.correspondence.view1.point, obs.correspondence.view2.point)
                .min(threshold_px)
        })
        .sum()
}

/// Robust relative pose from affine correspondences with depths.
///
/// Every hypothesis comes from a single correspondence (drawn uniformly,
/// never the same index twice in a row), solved by `config.solver`;
/// hypotheses with non-positive depth scale are discarded. Models compete on
/// inlier count, then on truncated Sampson score, then the earlier one is
/// kept. A new best with enough inliers triggers [`local_optimize`]. The
/// loop stops once the iteration count covers the best inlier ratio at the
/// configured confidence, or at `max_iterations`.
pub fn ransac_1ac_d(
    data: &[Observation],
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
    config: &RansacConfig,
) -> Result<RobustResult, RansacError> {
    if data.is_empty() {
        return Err(RansacError::EmptyData);
    }
    let lifted = lift_all(data, camera1, camera2)?;
    let threshold_px = config.threshold_px(camera1, camera2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = data.len();

    let mut best: Option<RobustResult> = None;
    let mut lo_steps = 0u32;
    let mut iterations = 0u64;
    let mut previous_index = usize::MAX;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut index = rng.random_range(0..n);
        if n > 1 {
            while index == previous_index {
                index = rng.random_range(0..n);
            }
        }
        previous_index = index;

        if let Some(candidate) = hypothesis(&lifted[index], config.solver) {
            let classification = classify_inliers(&candidate, data, camera1, camera2, threshold_px);
            let count = classification.count();
            if count >= 2 {
                let score = truncated_score(&candidate, data, camera1, camera2, threshold_px);
                if is_better(count, score, best.as_ref()) {
                    let mut result = RobustResult {
                        pose: candidate,
                        inlier_mask: classification.mask,
                        inlier_count: count,
                        iterations_run: iterations,
                        lo_steps,
                        score,
                    };
                    if count >= config.min_inliers_for_lo {
                        result = local_optimize(&result, data, camera1, camera2, config);
                        lo_steps = result.lo_steps;
                    }
                    best = Some(result);
                }
            }
        }

        let needed = match &best {
            Some(b) => required_iterations(config.confidence, b.inlier_count as f64 / n as f64, 1),
            None => u64::MAX,
        };
        if iterations >= needed {
            break;
        }
    }

    match best {
        Some(mut result) => {
            result.iterations_run = iterations;
            result.lo_steps = lo_steps;
            Ok(result)
        }
        None => Err(RansacError::NoModelFound {
            iterations,
        }),
    }
}

/// Refits the model to its consensus set: eight-point on the inlier
/// bearings, cheirality-checked decomposition, depth scale as the inlier
/// median of per-correspondence scale estimates, translation as the
/// component-wise inlier median of the point-constraint residuals, then
/// re-classification. Repeats while the consensus strictly grows, at most 5
/// rounds.
///
/// Skipped (input returned unchanged) below `max(8, min_inliers_for_lo)`
/// inliers — the refit itself needs 8 — and on any refit degeneracy. The
/// result never has fewer inliers than the input.
pub fn local_optimize(
    current: &RobustResult,
    data: &[Observation],
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
    config: &RansacConfig,
) -> RobustResult {
    let minimum = config.min_inliers_for_lo.max(8);
    if current.inlier_count < minimum {
        return current.clone();
    }
    let Ok(lifted) = lift_all(data, camera1, camera2) else {
        return current.clone();
    };
    let threshold_px = config.threshold_px(camera1, camera2);
    let bearings: Vec<BearingPair> = data
        .iter()
        .map(|obs| {
            (
                camera1.bearing(obs.correspondence.view1.point),
                camera2.bearing(obs.correspondence.view2.point),
            )
        })
        .collect();

    let mut best = current.clone();
    let mut mask = current.inlier_mask.clone();
    let mut count = current.inlier_count;
    for _ in 0..5 {
        let Some(refined) = refit(&mask, &bearings, &lifted) else {
            break;
        };
        let classification = classify_inliers(&refined, data, camera1, camera2, threshold_px);
        let new_count = classification.count();
        best.lo_steps += 1;
        if new_count <= count {
            break;
        }
        count = new_count;
        mask = classification.mask;
        if count > best.inlier_count {
            best.pose = refined;
            best.inlier_mask = mask.clone();
            best.inlier_count = count;
            best.score = truncated_score(&refined, data, camera1, camera2, threshold_px);
        }
    }
    best
}

/// One non-minimal refit over the masked subset; `None` on any degeneracy.
fn refit(
    mask: &[bool],
    bearings: &[BearingPair],
    lifted: &[LiftedCorrespondence],
) -> Option<PoseWithScale> {
    let inlier_bearings: Vec<BearingPair> = mask
        .iter()
        .zip(bearings)
        .filter_map(|(&m, b)| m.then_some(*b))
        .collect();
    let essential = eight_point(&inlier_bearings).ok()?;
    let base = decompose_essential(&essential, &inlier_bearings).ok()?;

    let mut scales: Vec<f64> = mask
        .iter()
        .zip(lifted)
        .filter(|(&m, _)| m)
        .filter_map(|(_, l)| recover_scale(&base.rotation, &l.tangent1, &l.tangent2).ok())
        .collect();
    let scale = median(&mut scales)?;
    if scale <= 0.0 {
        return None;
    }

    let mut tx = Vec::with_capacity(inlier_bearings.len());
    let mut ty = Vec::with_capacity(inlier_bearings.len());
    let mut tz = Vec::with_capacity(inlier_bearings.len());
    for (_, l) in mask.iter().zip(lifted).filter(|(&m, _)| m) {
        let t = recover_translation(&base.rotation, scale, &l.point1, &l.point2);
        tx.push(t.x);
        ty.push(t.y);
        tz.push(t.z);
    }
    let translation = nalgebra::Vector3::new(median(&mut tx)?, median(&mut ty)?, median(&mut tz)?);
    Some(PoseWithScale::new(base.rotation, translation, scale))
}

fn lift_all(
    data: &[Observation],
    camera1: &PinholeCamera,
    camera2: &PinholeCamera,
) -> Result<Vec<LiftedCorrespondence>, RansacError> {
    data.iter()
        .enumerate()
        .map(|(index, obs)| {
            obs.lift(camera1, camera2)
                .map_err(|source| RansacError::InvalidData { index, source })
        })
        .collect()
}

fn hypothesis(lifted: &LiftedCorrespondence, solver: SolverVariant) -> Option<PoseWithScale> {
    let pose = solver.solve(lifted).ok()?;
    (pose.scale > 0.0).then_some(pose)
}

fn is_better(count: usize, score: f64, best: Option<&RobustResult>) -> bool {
    match best {
        None => true,
        Some(b) => count > b.inlier_count || (count == b.inlier_count && score < b.score),
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{rotation_error_deg, translation_error_deg, Rotation};
    use crate::synth::{
        add_observation_noise, corrupt_with_outliers, generate_scene_pair, instance_rng,
        NoiseConfig, SceneConfig, ScenePair,
    };
    use nalgebra::Vector3;

    #[test]
    fn required_iterations_reference_values() {
        assert_eq!(required_iterations(0.99, 0.50, 1), 7);
        assert_eq!(required_iterations(0.99, 0.25, 1), 16);
        assert_eq!(required_iterations(0.99, 0.10, 1), 44);
        assert_eq!(required_iterations(0.99, 0.25, 2), 71);
        assert_eq!(required_iterations(0.99, 0.10, 2), 458);
        assert_eq!(required_iterations(0.99, 0.50, 5), 145);
        assert_eq!(required_iterations(0.99, 0.25, 5), 4713);
        assert_eq!(required_iterations(0.99, 0.04, 1), 113);
    }

    #[test]
    fn required_iterations_edge_cases() {
        assert_eq!(required_iterations(0.99, 1.0, 1), 1);
        assert_eq!(required_iterations(0.99, 1.0, 9), 1);
        assert_eq!(required_iterations(0.99, 0.0, 1), u64::MAX);
        assert_eq!(required_iterations(0.99, -0.5, 1), u64::MAX);
        assert_eq!(required_iterations(0.99, f64::NAN, 1), u64::MAX);
        // High confidence with an all-but-certain sample still needs 1.
        assert_eq!(required_iterations(0.5, 0.999, 1), 1);
    }

    #[test]
    fn required_iterations_is_monotone() {
        let ratios = [0.99, 0.9, 0.75, 0.5, 0.25, 0.1, 0.05];
        for m in [1u32, 2, 3, 5] {
            for pair in ratios.windows(2) {
                assert!(
                    required_iterations(0.99, pair[0], m)
                        <= required_iterations(0.99, pair[1], m)
                );
            }
        }
        for ratio in ratios {
            for m in [1u32, 2, 3, 4] {
                assert!(
                    required_iterations(0.99, ratio, m) <= required_iterations(0.99, ratio, m + 1)
                );
            }
        }
    }

    fn test_pair(seed: u64, count: usize) -> (ScenePair, SceneConfig) {
        let cfg = SceneConfig::default();
        let mut rng = instance_rng(seed, 0);
        (generate_scene_pair(&cfg, count, &mut rng).unwrap(), cfg)
    }

    #[test]
    fn ground_truth_pose_classifies_clean_data_as_inliers() {
        let (pair, cfg) = test_pair(100, 50);
        let camera = cfg.camera();
        let classification =
            classify_inliers(&pair.relative, &pair.observations, &camera, &camera, 0.5);
        assert!(!classification.degenerate);
        assert_eq!(classification.count(), 50);
    }

    #[test]
    fn contaminated_matches_are_rejected() {
        let (pair, cfg) = test_pair(101, 200);
        let camera = cfg.camera();
        let mut observations = pair.observations.clone();
        let mut rng = instance_rng(102, 0);
        let corrupted = corrupt_with_outliers(&mut observations, 60, &cfg, &mut rng);
        let classification =
            classify_inliers(&pair.relative, &observations, &camera, &camera, 0.5);
        let surviving_corrupted = corrupted
            .iter()
            .filter(|&&i| classification.mask[i])
            .count();
        for (i, &inlier) in classification.mask.iter().enumerate() {
            if !corrupted.contains(&i) {
                assert!(inlier, "clean match {i} rejected");
            }
        }
        // A uniform point lands within half a pixel of the epipolar line
        // with probability well under 1%.
        assert!(surviving_corrupted <= 2, "{surviving_corrupted} outliers survived");
    }

    #[test]
    fn zero_threshold_classifies_nothing() {
        let (pair, cfg) = test_pair(103, 10);
        let camera = cfg.camera();
        let classification =
            classify_inliers(&pair.relative, &pair.observations, &camera, &camera, 0.0);
        assert_eq!(classification.count(), 0);
    }

    #[test]
    fn zero_translation_pose_is_flagged_degenerate() {
        let (pair, cfg) = test_pair(104, 10);
        let camera = cfg.camera();
        let pose = PoseWithScale::identity();
        let classification = classify_inliers(&pose, &pair.observations, &camera, &camera, 0.5);
        assert!(classification.degenerate);
        assert_eq!(classification.count(), 0);
    }

    #[test]
    fn recovers_pose_from_half_outliers() {
        let (pair, cfg) = test_pair(105, 200);
        let camera = cfg.camera();
        let mut observations = pair.observations.clone();
        let mut rng = instance_rng(106, 0);
        let corrupted = corrupt_with_outliers(&mut observations, 100, &cfg, &mut rng);
        let config = RansacConfig {
            seed: 9000,
            ..RansacConfig::default()
        };
        let result = ransac_1ac_d(&observations, &camera, &camera, &config).unwrap();
        assert!(
            rotation_error_deg(&result.pose.rotation, &pair.relative.rotation) < 0.1,
            "rotation error {}",
            rotation_error_deg(&result.pose.rotation, &pair.relative.rotation)
        );
        assert!(
            translation_error_deg(&result.pose.translation, &pair.relative.translation).unwrap()
                < 0.1
        );
        assert!(result.inlier_count >= 100);
        // All clean matches recovered; corrupted ones rejected almost surely.
        for (i, &inlier) in result.inlier_mask.iter().enumerate() {
            if !corrupted.contains(&i) {
                assert!(inlier, "clean match {i} missing from consensus");
            }
        }
        assert!(result.iterations_run <= 44, "{} iterations", result.iterations_run);
    }

    #[test]
    fn recovers_pose_under_moderate_noise() {
        let (pair, cfg) = test_pair(107, 200);
        let camera = cfg.camera();
        let noise = NoiseConfig {
            sigma_px: 0.5,
            ..NoiseConfig::NONE
        };
        let mut rng = instance_rng(108, 0);
        let observations: Vec<_> = pair
            .observations
            .iter()
            .map(|obs| add_observation_noise(obs, &noise, &mut rng))
            .collect();
        // ~2.5 sigma classification band so true matches stay inliers.
        let config = RansacConfig {
            threshold_fraction: 1.25 / camera.diagonal(),
            seed: 11,
            ..RansacConfig::default()
        };
        let result = ransac_1ac_d(&observations, &camera, &camera, &config).unwrap();
        assert!(
            rotation_error_deg(&result.pose.rotation, &pair.relative.rotation) < 2.0,
            "rotation error {}",
            rotation_error_deg(&result.pose.rotation, &pair.relative.rotation)
        );
        assert!(
            result.inlier_count >= 190,
            "only {} of 200 inliers recovered",
            result.inlier_count
        );
    }

    #[test]
    fn all_outlier_data_yields_no_usable_model() {
        let (pair, cfg) = test_pair(109, 20);
        let camera = cfg.camera();
        let mut observations = pair.observations.clone();
        let mut rng = instance_rng(110, 0);
        corrupt_with_outliers(&mut observations, 20, &cfg, &mut rng);
        let config = RansacConfig {
            max_iterations: 500,
            seed: 7,
            ..RansacConfig::default()
        };
        match ransac_1ac_d(&observations, &camera, &camera, &config) {
            Err(RansacError::NoModelFound { iterations }) => assert_eq!(iterations, 500),
            Ok(result) => assert!(
                result.inlier_count < config.min_inliers_for_lo,
                "found {} inliers in pure noise",
                result.inlier_count
            ),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn result_is_deterministic_and_mask_matches_threshold() {
        let (pair, cfg) = test_pair(111, 120);
        let camera = cfg.camera();
        let mut observations = pair.observations.clone();
        let mut rng = instance_rng(112, 0);
        corrupt_with_outliers(&mut observations, 40, &cfg, &mut rng);
        let config = RansacConfig {
            seed: 42,
            ..RansacConfig::default()
        };
        let a = ransac_1ac_d(&observations, &camera, &camera, &config).unwrap();
        let b = ransac_1ac_d(&observations, &camera, &camera, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.iterations_run <= config.max_iterations);
        assert_eq!(a.inlier_count, a.inlier_mask.iter().filter(|&&m| m).count());
        // Every reported inlier re-validates against the returned pose.
        let threshold_px = config.threshold_px(&camera, &camera);
        let check = classify_inliers(&a.pose, &observations, &camera, &camera, threshold_px);
        assert_eq!(a.inlier_mask, check.mask);
    }

    #[test]
    fn empty_and_invalid_data_are_reported() {
        let cfg = SceneConfig::default();
        let camera = cfg.camera();
        assert_eq!(
            ransac_1ac_d(&[], &camera, &camera, &RansacConfig::default()),
            Err(RansacError::EmptyData)
        );
        let (pair, _) = test_pair(113, 5);
        let mut observations = pair.observations.clone();
        observations[3].depth2.depth = -2.0;
        match ransac_1ac_d(&observations, &camera, &camera, &RansacConfig::default()) {
            Err(RansacError::InvalidData { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected InvalidData, got {other:?}"),
        }
    }

    /// Build a RobustResult for a given pose by classifying with it.
    fn result_for_pose(
        pose: PoseWithScale,
        mask: Vec<bool>,
        data: &[Observation],
        camera: &PinholeCamera,
        config: &RansacConfig,
    ) -> RobustResult {
        let threshold = config.threshold_px(camera, camera);
        let count = mask.iter().filter(|&&m| m).count();
        RobustResult {
            score: truncated_score(&pose, data, camera, camera, threshold),
            pose,
            inlier_count: count,
            inlier_mask: mask,
            iterations_run: 0,
            lo_steps: 0,
        }
    }

    #[test]
    fn local_optimization_recovers_from_a_perturbed_pose() {
        let (pair, cfg) = test_pair(114, 100);
        let camera = cfg.camera();
        let config = RansacConfig::default();
        // 2-degree rotation perturbation and a 60%-correct inlier mask.
        let perturbation = Rotation::from_axis_angle(Vector3::y_axis(), 2.0f64.to_radians());
        let perturbed = PoseWithScale::new(
            perturbation * pair.relative.rotation,
            pair.relative.translation,
            pair.relative.scale,
        );
        let mut rng = instance_rng(115, 0);
        let mask: Vec<bool> = (0..100).map(|_| rng.random_range(0.0..1.0) < 0.6).collect();
        let start = result_for_pose(perturbed, mask, &pair.observations, &camera, &config);
        assert!(start.inlier_count >= 8, "test premise: enough seeds for a refit");

        let refined = local_optimize(&start, &pair.observations, &camera, &camera, &config);
        assert_eq!(refined.inlier_count, 100, "full consensus not recovered");
        assert!(
            rotation_error_deg(&refined.pose.rotation, &pair.relative.rotation) < 1e-4,
            "rotation error {}",
            rotation_error_deg(&refined.pose.rotation, &pair.relative.rotation)
        );
        assert!(refined.lo_steps >= 1);
    }

    #[test]
    fn local_optimization_skips_small_consensus_sets() {
        let (pair, cfg) = test_pair(116, 40);
        let camera = cfg.camera();
        let config = RansacConfig::default();
        let mut mask = alloc::vec![false; 40];
        for m in mask.iter_mut().take(7) {
            *m = true;
        }
        let start = result_for_pose(pair.relative, mask, &pair.observations, &camera, &config);
        assert_eq!(start.inlier_count, 7);
        let out = local_optimize(&start, &pair.observations, &camera, &camera, &config);
        assert_eq!(out, start);
    }

    #[test]
    fn local_optimization_is_a_fixed_point_on_an_optimal_result() {
        let (pair, cfg) = test_pair(117, 60);
        let camera = cfg.camera();
        let config = RansacConfig::default();
        let start = result_for_pose(
            pair.relative,
            alloc::vec![true; 60],
            &pair.observations,
            &camera,
            &config,
        );
        let out = local_optimize(&start, &pair.observations, &camera, &camera, &config);
        assert_eq!(out.inlier_count, start.inlier_count);
        assert_eq!(out.pose, start.pose);
    }

    #[test]
    fn local_optimization_never_loses_inliers() {
        let (pair, cfg) = test_pair(118, 80);
        let camera = cfg.camera();
        let config = RansacConfig::default();
        let mut rng = instance_rng(119, 0);
        for trial in 0..10 {
            let mask: Vec<bool> = (0..80).map(|_| rng.random_range(0.0..1.0) < 0.5).collect();
            let start =
                result_for_pose(pair.relative, mask, &pair.observations, &camera, &config);
            let out = local_optimize(&start, &pair.observations, &camera, &camera, &config);
            assert!(
                out.inlier_count >= start.inlier_count,
                "trial {trial}: lost inliers"
            );
        }
    }
}
