//! Study runners over the synthetic generator: numerical stability of the
//! single-correspondence solvers on noise-free instances, error growth along
//! per-source noise axes (against a multi-point epipolar baseline), and how
//! often a single-correspondence hypothesis already explains most of a
//! scene's matches.
//!
//! Every runner derives one RNG stream per instance index
//! ([`crate::synth::instance_rng`]), so a parallel driver that aggregates in
//! index order reproduces the serial run byte for byte. The `run_*`
//! functions are the serial drivers; the `*_instance` / `*_pair` functions
//! plus the `aggregate_*` functions are the pieces a parallel driver needs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use nalgebra::Vector2;
use rand::Rng;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::{ComplexField, RealField};

use crate::camera::CentralCamera;
use crate::correspondence::Observation;
use crate::epipolar::{essential_from_pose, sampson_error};
use crate::error::{SolveError, SynthError};
use crate::minimal::SolverVariant;
use crate::nonminimal::{decompose_essential, eight_point, BearingPair};
use crate::pose::{rotation_error_deg, translation_error_deg, PoseWithScale};
use crate::ransac::classify_inliers;
use crate::synth::{
    add_observation_noise, apply_depth_scale, corrupt_with_outliers, generate_scene,
    generate_scene_pair, instance_rng, NoiseConfig, SceneConfig,
};

/// Error level (degrees / degrees / normalized units) under which a
/// noise-free instance counts as solved exactly.
pub const STABILITY_TOLERANCE: f64 = 1e-6;

/// Quantile levels reported in the summary tables.
pub const QUANTILE_LEVELS: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];

/// Histogram domain: log10 errors from `LOG10_LOW` in `LOG10_STEP` steps.
pub const LOG10_LOW: f64 = -16.0;
pub const LOG10_STEP: f64 = 0.5;
pub const LOG10_BINS: usize = 38;

// ---------------------------------------------------------------------------
// Stability study
// ---------------------------------------------------------------------------

/// Configuration of the noise-free stability study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityConfig {
    pub scene: SceneConfig,
    pub instances: u64,
    pub solvers: Vec<SolverVariant>,
    /// Multiply view-2 depths by a random unit in [0.5, 2] per instance so
    /// the scale estimate is exercised; the ground truth adjusts, so
    /// instances stay exactly solvable.
    pub vary_depth_unit: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            instances: 30_000,
            solvers: SolverVariant::ALL.to_vec(),
            vary_depth_unit: true,
        }
    }
}

/// Ground truth and per-solver estimates of one stability instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityInstance {
    pub index: u64,
    pub truth: PoseWithScale,
    /// Normalized image coordinates of the patch center in each view, for
    /// epipolar residuals in camera units.
    pub normalized1: Vector2<f64>,
    pub normalized2: Vector2<f64>,
    /// Parallel to the configured solver list.
    pub estimates: Vec<Result<PoseWithScale, SolveError>>,
}

/// Error metrics of one estimate against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateErrors {
    pub rotation_deg: f64,
    pub translation_deg: f64,
    /// Epipolar residual of the estimate on the instance's own
    /// correspondence, in normalized image units.
    pub sampson_normalized: f64,
    pub scale_relative: f64,
}

/// Generates instance `index` and runs every configured solver on it.
pub fn stability_instance(
    cfg: &StabilityConfig,
    index: u64,
) -> Result<StabilityInstance, SynthError> {
    let mut rng = instance_rng(cfg.scene.seed, index);
    let camera = cfg.scene.camera();
    let mut sample = generate_scene(&cfg.scene, &mut rng)?;
    if cfg.vary_depth_unit {
        let unit = rng.random_range(0.5..=2.0);
        sample = apply_depth_scale(&sample, unit);
    }
    let lifted = sample
        .observation
        .lift(&camera, &camera)
        .expect("generated depths are positive");
    let estimates = cfg.solvers.iter().map(|s| s.solve(&lifted)).collect();
    let b1 = camera.bearing(sample.observation.correspondence.view1.point);
    let b2 = camera.bearing(sample.observation.correspondence.view2.point);
    Ok(StabilityInstance {
        index,
        truth: sample.relative,
        normalized1: Vector2::new(b1.x, b1.y),
        normalized2: Vector2::new(b2.x, b2.y),
        estimates,
    })
}

/// Compares an estimate to the ground truth of its instance.
pub fn measure_estimate(
    truth: &PoseWithScale,
    estimate: &PoseWithScale,
    normalized1: Vector2<f64>,
    normalized2: Vector2<f64>,
) -> EstimateErrors {
    let rotation_deg = rotation_error_deg(&estimate.rotation, &truth.rotation);
    let translation_deg = translation_error_deg(&estimate.translation, &truth.translation)
        .unwrap_or(f64::INFINITY);
    let sampson_normalized = match essential_from_pose(estimate) {
        Ok(e) => sampson_error(e.matrix(), normalized1, normalized2),
        Err(_) => f64::INFINITY,
    };
    let scale_relative = (estimate.scale - truth.scale).abs() / truth.scale;
    EstimateErrors {
        rotation_deg,
        translation_deg,
        sampson_normalized,
        scale_relative,
    }
}

/// Quantiles and a log10 histogram of one error metric for one solver.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MetricSummary {
    pub solver: SolverVariant,
    pub metric: String,
    /// Number of values summarized (failures and NaN outputs excluded).
    pub count: u64,
    /// Values at [`QUANTILE_LEVELS`] (nearest rank); empty when `count` is 0.
    pub quantile_values: Vec<f64>,
    /// Counts per log10 bin (see [`LOG10_LOW`], [`LOG10_STEP`]); values
    /// outside the domain land in the edge bins.
    pub histogram: Vec<u64>,
}

/// Aggregated outcome of the stability study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityReport {
    pub instances: u64,
    pub solvers: Vec<SolverVariant>,
    /// Per solver: solver errors (degenerate frames etc.).
    pub failures: Vec<u64>,
    /// Per solver: estimates containing NaN in any reported metric.
    pub nan_outputs: Vec<u64>,
    /// Per solver: instances with rotation, translation and epipolar error
    /// all below [`STABILITY_TOLERANCE`].
    pub within_tolerance: Vec<u64>,
    pub summaries: Vec<MetricSummary>,
}

/// Folds per-instance results into the report. The instance order is part
/// of the contract only in that it must be the index order.
pub fn aggregate_stability(cfg: &StabilityConfig, instances: &[StabilityInstance]) -> StabilityReport {
    let n_solvers = cfg.solvers.len();
    let mut failures = alloc::vec![0u64; n_solvers];
    let mut nan_outputs = alloc::vec![0u64; n_solvers];
    let mut within = alloc::vec![0u64; n_solvers];
    let mut values: Vec<[Vec<f64>; 3]> = (0..n_solvers)
        .map(|_| [Vec::new(), Vec::new(), Vec::new()])
        .collect();

    for instance in instances {
        for (s, estimate) in instance.estimates.iter().enumerate() {
            let Ok(pose) = estimate else {
                failures[s] += 1;
                continue;
            };
            let errors = measure_estimate(
                &instance.truth,
                pose,
                instance.normalized1,
                instance.normalized2,
            );
            let metrics = [
                errors.rotation_deg,
                errors.translation_deg,
                errors.sampson_normalized,
            ];
            if metrics.iter().any(|m| m.is_nan()) {
                nan_outputs[s] += 1;
                continue;
            }
            if metrics.iter().all(|&m| m < STABILITY_TOLERANCE) {
                within[s] += 1;
            }
            for (k, m) in metrics.iter().enumerate() {
                values[s][k].push(*m);
            }
        }
    }

    let mut summaries = Vec::new();
    for (s, solver) in cfg.solvers.iter().enumerate() {
        for (k, metric) in ["rotation_deg", "translation_deg", "sampson"].iter().enumerate() {
            let mut vals = core::mem::take(&mut values[s][k]);
            vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            let histogram = log_histogram(&vals);
            summaries.push(MetricSummary {
                solver: *solver,
                metric: String::from(*metric),
                count: vals.len() as u64,
                quantile_values: QUANTILE_LEVELS
                    .iter()
                    .filter(|_| !vals.is_empty())
                    .map(|&q| nearest_rank(&vals, q))
                    .collect(),
                histogram,
            });
        }
    }

    StabilityReport {
        instances: instances.len() as u64,
        solvers: cfg.solvers.clone(),
        failures,
        nan_outputs,
        within_tolerance: within,
        summaries,
    }
}

/// Serial driver: generates and aggregates all instances.
pub fn run_stability_study(cfg: &StabilityConfig) -> Result<StabilityReport, SynthError> {
    let mut rows = Vec::with_capacity(cfg.instances as usize);
    for index in 0..cfg.instances {
        rows.push(stability_instance(cfg, index)?);
    }
    Ok(aggregate_stability(cfg, &rows))
}

impl StabilityReport {
    /// One row per (solver, metric) with quantiles and counters.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "solver,metric,count,min,p25,p50,p75,p90,p99,max,failures,nan_outputs,within_tolerance\n",
        );
        for summary in &self.summaries {
            let s = self
                .solvers
                .iter()
                .position(|v| v == &summary.solver)
                .expect("summary solver is configured");
            let _ = write!(out, "{},{},{}", summary.solver.name(), summary.metric, summary.count);
            if summary.quantile_values.is_empty() {
                out.push_str(",,,,,,,");
            } else {
                for q in &summary.quantile_values {
                    let _ = write!(out, ",{q}");
                }
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                self.failures[s], self.nan_outputs[s], self.within_tolerance[s]
            );
        }
        out
    }

    /// One row per (solver, metric, log10 bin).
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("solver,metric,bin_low,bin_high,count\n");
        for summary in &self.summaries {
            for (b, count) in summary.histogram.iter().enumerate() {
                let low = LOG10_LOW + b as f64 * LOG10_STEP;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    summary.solver.name(),
                    summary.metric,
                    low,
                    low + LOG10_STEP,
                    count
                );
            }
        }
        out
    }
}

fn log_histogram(values: &[f64]) -> Vec<u64> {
    let mut bins = alloc::vec![0u64; LOG10_BINS];
    for &v in values {
        let log = v.max(1e-300).log10();
        let idx = ((log - LOG10_LOW) / LOG10_STEP).floor();
        let idx = idx.clamp(0.0, (LOG10_BINS - 1) as f64) as usize;
        bins[idx] += 1;
    }
    bins
}

/// Nearest-rank quantile of an ascending slice.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let last = sorted.len() - 1;
    let rank = (last as f64 * q).round() as usize;
    sorted[rank.min(last)]
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn median_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

// ---------------------------------------------------------------------------
// Noise grid
// ---------------------------------------------------------------------------

/// The three independent noise sources swept by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseAxis {
    /// Patch-center pixel coordinates.
    Pixel,
    /// Affine frame entries.
    Frame,
    /// Depths and depth gradients together (one depth-quality axis).
    Depth,
}

impl NoiseAxis {
    pub const ALL: [NoiseAxis; 3] = [NoiseAxis::Pixel, NoiseAxis::Frame, NoiseAxis::Depth];

    pub fn name(self) -> &'static str {
        match self {
            NoiseAxis::Pixel => "pixel",
            NoiseAxis::Frame => "frame",
            NoiseAxis::Depth => "depth",
        }
    }

    /// The noise configuration of one cell on this axis; the other two
    /// sources stay at zero.
    pub fn cell(self, sigma: f64) -> NoiseConfig {
        match self {
            NoiseAxis::Pixel => NoiseConfig {
                sigma_px: sigma,
                ..NoiseConfig::NONE
            },
            NoiseAxis::Frame => NoiseConfig {
                sigma_frame: sigma,
                ..NoiseConfig::NONE
            },
            NoiseAxis::Depth => NoiseConfig {
                sigma_depth: sigma,
                sigma_gradient: sigma,
                ..NoiseConfig::NONE
            },
        }
    }
}

/// Configuration of the per-source noise sweeps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseGridConfig {
    pub scene: SceneConfig,
    pub pixel_axis: Vec<f64>,
    pub frame_axis: Vec<f64>,
    pub depth_axis: Vec<f64>,
    pub instances_per_cell: u64,
    pub solvers: Vec<SolverVariant>,
    /// Matches per scene; all of them feed the multi-point epipolar
    /// baseline (at least 8), the first one feeds the single-correspondence
    /// solvers.
    pub points_per_scene: usize,
}

impl Default for NoiseGridConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            pixel_axis: alloc::vec![0.0, 0.5, 1.0, 2.5],
            frame_axis: alloc::vec![0.0, 0.01, 0.05, 0.1],
            depth_axis: alloc::vec![0.0, 0.01, 0.05, 0.1],
            instances_per_cell: 1000,
            solvers: SolverVariant::ALL.to_vec(),
            points_per_scene: 20,
        }
    }
}

impl NoiseGridConfig {
    /// All (axis, sigma) cells in emission order.
    pub fn cells(&self) -> Vec<(NoiseAxis, f64)> {
        let mut out = Vec::new();
        for &sigma in &self.pixel_axis {
            out.push((NoiseAxis::Pixel, sigma));
        }
        for &sigma in &self.frame_axis {
            out.push((NoiseAxis::Frame, sigma));
        }
        for &sigma in &self.depth_axis {
            out.push((NoiseAxis::Depth, sigma));
        }
        out
    }
}

/// Rotation / translation error of one method on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodErrors {
    pub rotation_deg: f64,
    pub translation_deg: f64,
}

/// Per-instance outcome of one grid cell: each configured solver plus the
/// epipolar baseline, `None` marking a failed estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGridInstance {
    pub solver_outcomes: Vec<Option<MethodErrors>>,
    pub baseline_outcome: Option<MethodErrors>,
}

/// Generates scene `index` (identical across cells: the cell only decides
/// the noise scaling), corrupts it, and measures every method.
pub fn noise_grid_instance(
    cfg: &NoiseGridConfig,
    noise: &NoiseConfig,
    index: u64,
) -> Result<NoiseGridInstance, SynthError> {
    assert!(cfg.points_per_scene >= 1, "a scene needs at least one match");
    let mut rng = instance_rng(cfg.scene.seed, index);
    let camera = cfg.scene.camera();
    let pair = generate_scene_pair(&cfg.scene, cfg.points_per_scene, &mut rng)?;
    let noisy: Vec<Observation> = pair
        .observations
        .iter()
        .map(|obs| add_observation_noise(obs, noise, &mut rng))
        .collect();

    let solver_outcomes = match noisy[0].lift(&camera, &camera) {
        Ok(lifted) => cfg
            .solvers
            .iter()
            .map(|s| {
                s.solve(&lifted)
                    .ok()
                    .and_then(|pose| measure_method(&pose, &pair.relative))
            })
            .collect(),
        Err(_) => alloc::vec![None; cfg.solvers.len()],
    };

    let bearings: Vec<BearingPair> = noisy
        .iter()
        .map(|obs| {
            (
                camera.bearing(obs.correspondence.view1.point),
                camera.bearing(obs.correspondence.view2.point),
            )
        })
        .collect();
    let baseline_outcome = eight_point(&bearings)
        .ok()
        .and_then(|e| decompose_essential(&e, &bearings).ok())
        .and_then(|pose| measure_method(&pose, &pair.relative));

    Ok(NoiseGridInstance {
        solver_outcomes,
        baseline_outcome,
    })
}

fn measure_method(estimate: &PoseWithScale, truth: &PoseWithScale) -> Option<MethodErrors> {
    let rotation_deg = rotation_error_deg(&estimate.rotation, &truth.rotation);
    let translation_deg = translation_error_deg(&estimate.translation, &truth.translation).ok()?;
    if rotation_deg.is_nan() || translation_deg.is_nan() {
        return None;
    }
    Some(MethodErrors {
        rotation_deg,
        translation_deg,
    })
}

/// Mean/median errors of one method over one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CellStats {
    pub mean_rotation_deg: f64,
    pub median_rotation_deg: f64,
    pub mean_translation_deg: f64,
    pub median_translation_deg: f64,
    pub failures: u64,
}

/// One grid cell: an (axis, sigma) pair with per-method statistics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NoiseCell {
    pub axis: NoiseAxis,
    pub sigma: f64,
    /// Parallel to the configured solver list.
    pub solver_stats: Vec<CellStats>,
    pub baseline: CellStats,
}

/// Aggregated outcome of the noise sweeps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NoiseGridReport {
    pub solvers: Vec<SolverVariant>,
    pub instances_per_cell: u64,
    pub cells: Vec<NoiseCell>,
}

/// Folds the instances of one cell (in index order) into its statistics.
pub fn aggregate_noise_cell(
    cfg: &NoiseGridConfig,
    axis: NoiseAxis,
    sigma: f64,
    instances: &[NoiseGridInstance],
) -> NoiseCell {
    let solver_stats = (0..cfg.solvers.len())
        .map(|s| collect_stats(instances.iter().map(|i| i.solver_outcomes[s])))
        .collect();
    let baseline = collect_stats(instances.iter().map(|i| i.baseline_outcome));
    NoiseCell {
        axis,
        sigma,
        solver_stats,
        baseline,
    }
}

fn collect_stats(outcomes: impl Iterator<Item = Option<MethodErrors>>) -> CellStats {
    let mut rotations = Vec::new();
    let mut translations = Vec::new();
    let mut failures = 0u64;
    for outcome in outcomes {
        match outcome {
            Some(errors) => {
                rotations.push(errors.rotation_deg);
                translations.push(errors.translation_deg);
            }
            None => failures += 1,
        }
    }
    rotations.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    translations.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    CellStats {
        mean_rotation_deg: mean(&rotations),
        median_rotation_deg: median_sorted(&rotations),
        mean_translation_deg: mean(&translations),
        median_translation_deg: median_sorted(&translations),
        failures,
    }
}

/// Serial driver over all cells.
pub fn run_noise_grid(cfg: &NoiseGridConfig) -> Result<NoiseGridReport, SynthError> {
    let mut cells = Vec::new();
    for (axis, sigma) in cfg.cells() {
        let noise = axis.cell(sigma);
        let mut instances = Vec::with_capacity(cfg.instances_per_cell as usize);
        for index in 0..cfg.instances_per_cell {
            instances.push(noise_grid_instance(cfg, &noise, index)?);
        }
        cells.push(aggregate_noise_cell(cfg, axis, sigma, &instances));
    }
    Ok(NoiseGridReport {
        solvers: cfg.solvers.clone(),
        instances_per_cell: cfg.instances_per_cell,
        cells,
    })
}

impl NoiseGridReport {
    /// One row per (cell, method).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,sigma,method,mean_rotation_deg,median_rotation_deg,mean_translation_deg,median_translation_deg,failures\n",
        );
        let mut row = |axis: NoiseAxis, sigma: f64, method: &str, stats: &CellStats| {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                axis.name(),
                sigma,
                method,
                stats.mean_rotation_deg,
                stats.median_rotation_deg,
                stats.mean_translation_deg,
                stats.median_translation_deg,
                stats.failures
            );
        };
        for cell in &self.cells {
            for (solver, stats) in self.solvers.iter().zip(&cell.solver_stats) {
                row(cell.axis, cell.sigma, solver.name(), stats);
            }
            row(cell.axis, cell.sigma, "epipolar_baseline", &cell.baseline);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Applicability study
// ---------------------------------------------------------------------------

/// Configuration of the hypothesis-applicability study: how often the pose
/// proposed from a single correspondence already explains most matches of
/// its scene.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ApplicabilityConfig {
    pub scene: SceneConfig,
    pub pairs: u64,
    pub correspondences_per_pair: usize,
    /// Fraction of each pair's matches replaced by gross outliers.
    pub outlier_fraction: f64,
    pub noise: NoiseConfig,
    pub solver: SolverVariant,
    /// Inlier threshold as a fraction of the image diagonal.
    pub threshold_fraction: f64,
    /// Consensus size from which a hypothesis counts as usable.
    pub min_inliers: usize,
}

impl Default for ApplicabilityConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            pairs: 100,
            correspondences_per_pair: 100,
            outlier_fraction: 0.0,
            noise: NoiseConfig::NONE,
            solver: SolverVariant::Orthonorm,
            threshold_fraction: 0.0005,
            min_inliers: 6,
        }
    }
}

/// Per-pair outcome: one hypothesis per correspondence, scored over all of
/// the pair's correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    /// Consensus size of each correspondence's hypothesis (0 when the
    /// solver failed on it).
    pub inlier_counts: Vec<usize>,
    /// Rotation errors of the successful hypotheses, in degrees.
    pub rotation_errors_deg: Vec<f64>,
    pub hypothesis_failures: u64,
}

/// Generates pair `index`, corrupts it, and scores one hypothesis per
/// correspondence.
pub fn applicability_pair(cfg: &ApplicabilityConfig, index: u64) -> Result<PairOutcome, SynthError> {
    assert!(cfg.correspondences_per_pair >= 1, "a pair needs at least one match");
    let mut rng = instance_rng(cfg.scene.seed, index);
    let camera = cfg.scene.camera();
    let pair = generate_scene_pair(&cfg.scene, cfg.correspondences_per_pair, &mut rng)?;
    let mut observations = pair.observations;
    let outliers =
        (cfg.outlier_fraction * cfg.correspondences_per_pair as f64).round() as usize;
    corrupt_with_outliers(&mut observations, outliers, &cfg.scene, &mut rng);
    let observations: Vec<Observation> = observations
        .iter()
        .map(|obs| add_observation_noise(obs, &cfg.noise, &mut rng))
        .collect();

    let threshold_px = cfg.threshold_fraction * camera.diagonal();
    let mut inlier_counts = Vec::with_capacity(observations.len());
    let mut rotation_errors_deg = Vec::new();
    let mut hypothesis_failures = 0u64;
    for seed_obs in &observations {
        let hypothesis = seed_obs
            .lift(&camera, &camera)
            .ok()
            .and_then(|lifted| cfg.solver.solve(&lifted).ok())
            .filter(|pose| pose.scale > 0.0);
        match hypothesis {
            Some(pose) => {
                let classification =
                    classify_inliers(&pose, &observations, &camera, &camera, threshold_px);
                inlier_counts.push(classification.count());
                rotation_errors_deg
                    .push(rotation_error_deg(&pose.rotation, &pair.relative.rotation));
            }
            None => {
                hypothesis_failures += 1;
                inlier_counts.push(0);
            }
        }
    }
    Ok(PairOutcome {
        inlier_counts,
        rotation_errors_deg,
        hypothesis_failures,
    })
}

/// Aggregated outcome of the applicability study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ApplicabilityReport {
    pub pairs: u64,
    pub hypotheses: u64,
    pub hypothesis_failures: u64,
    pub min_inliers: usize,
    /// Fraction of all hypotheses reaching `min_inliers`.
    pub fraction_with_min_inliers: f64,
    /// The same fraction per pair, in index order.
    pub per_pair_fraction: Vec<f64>,
    /// (percentile, rotation error in degrees) over all successful
    /// hypotheses, in 5% steps.
    pub rotation_error_percentiles: Vec<(f64, f64)>,
}

pub fn aggregate_applicability(
    cfg: &ApplicabilityConfig,
    outcomes: &[PairOutcome],
) -> ApplicabilityReport {
    let mut hypotheses = 0u64;
    let mut usable = 0u64;
    let mut failures = 0u64;
    let mut per_pair_fraction = Vec::with_capacity(outcomes.len());
    let mut all_errors = Vec::new();
    for outcome in outcomes {
        let pair_usable = outcome
            .inlier_counts
            .iter()
            .filter(|&&c| c >= cfg.min_inliers)
            .count();
        per_pair_fraction.push(pair_usable as f64 / outcome.inlier_counts.len() as f64);
        usable += pair_usable as u64;
        hypotheses += outcome.inlier_counts.len() as u64;
        failures += outcome.hypothesis_failures;
        all_errors.extend_from_slice(&outcome.rotation_errors_deg);
    }
    all_errors.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let rotation_error_percentiles = if all_errors.is_empty() {
        Vec::new()
    } else {
        (0..=20)
            .map(|step| {
                let q = step as f64 / 20.0;
                (q * 100.0, nearest_rank(&all_errors, q))
            })
            .collect()
    };
    ApplicabilityReport {
        pairs: outcomes.len() as u64,
        hypotheses,
        hypothesis_failures: failures,
        min_inliers: cfg.min_inliers,
        fraction_with_min_inliers: if hypotheses == 0 {
            0.0
        } else {
            usable as f64 / hypotheses as f64
        },
        per_pair_fraction,
        rotation_error_percentiles,
    }
}

/// Serial driver over all pairs.
pub fn run_applicability_study(
    cfg: &ApplicabilityConfig,
) -> Result<ApplicabilityReport, SynthError> {
    let mut outcomes = Vec::with_capacity(cfg.pairs as usize);
    for index in 0..cfg.pairs {
        outcomes.push(applicability_pair(cfg, index)?);
    }
    Ok(aggregate_applicability(cfg, &outcomes))
}

impl ApplicabilityReport {
    /// One row per pair.
    pub fn per_pair_csv(&self) -> String {
        let mut out = String::from("pair,usable_fraction\n");
        for (i, fraction) in self.per_pair_fraction.iter().enumerate() {
            let _ = writeln!(out, "{i},{fraction}");
        }
        out
    }

    /// The hypothesis rotation-error distribution as percentile rows.
    pub fn error_cdf_csv(&self) -> String {
        let mut out = String::from("percentile,rotation_error_deg\n");
        for (pct, value) in &self.rotation_error_percentiles {
            let _ = writeln!(out, "{pct},{value}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_stability(instances: u64) -> StabilityConfig {
        StabilityConfig {
            instances,
            ..StabilityConfig::default()
        }
    }

    #[test]
    fn stability_instances_are_exactly_solved() {
        let cfg = small_stability(200);
        let report = run_stability_study(&cfg).unwrap();
        assert_eq!(report.instances, 200);
        for s in 0..cfg.solvers.len() {
            assert_eq!(report.failures[s], 0);
            assert_eq!(report.nan_outputs[s], 0);
            assert_eq!(report.within_tolerance[s], 200, "solver {s}");
        }
    }

    #[test]
    fn stability_single_instance_table() {
        let report = run_stability_study(&small_stability(1)).unwrap();
        assert_eq!(report.instances, 1);
        // Two solvers x three metrics, one value each.
        assert_eq!(report.summaries.len(), 6);
        for summary in &report.summaries {
            assert_eq!(summary.count, 1);
            assert_eq!(summary.histogram.iter().sum::<u64>(), 1);
            assert_eq!(summary.quantile_values.len(), QUANTILE_LEVELS.len());
        }
        let csv = report.summary_csv();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("solver,metric,"));
    }

    #[test]
    fn solver_failures_are_counted_not_fatal() {
        let cfg = small_stability(1);
        let mut instance = stability_instance(&cfg, 0).unwrap();
        instance.estimates[0] = Err(SolveError::DegenerateFrame(0.0));
        let report = aggregate_stability(&cfg, &[instance]);
        assert_eq!(report.failures[0], 1);
        assert_eq!(report.failures[1], 0);
        assert_eq!(report.within_tolerance[0], 0);
        assert_eq!(report.within_tolerance[1], 1);
    }

    #[test]
    fn depth_unit_variation_is_recovered() {
        let cfg = small_stability(50);
        for index in 0..50 {
            let instance = stability_instance(&cfg, index).unwrap();
            for estimate in &instance.estimates {
                let pose = estimate.as_ref().unwrap();
                let relative = (pose.scale - instance.truth.scale).abs() / instance.truth.scale;
                assert!(relative < 1e-9, "instance {index}: scale off by {relative}");
            }
        }
    }

    fn tiny_grid() -> NoiseGridConfig {
        NoiseGridConfig {
            pixel_axis: alloc::vec![0.0, 1.0],
            frame_axis: alloc::vec![0.0, 0.05],
            depth_axis: alloc::vec![0.0, 0.05],
            instances_per_cell: 40,
            ..NoiseGridConfig::default()
        }
    }

    #[test]
    fn noise_grid_zero_cells_match_the_stability_regime() {
        let cfg = tiny_grid();
        let report = run_noise_grid(&cfg).unwrap();
        let zero_cells: Vec<&NoiseCell> =
            report.cells.iter().filter(|c| c.sigma == 0.0).collect();
        assert_eq!(zero_cells.len(), 3);
        for cell in &zero_cells {
            for stats in &cell.solver_stats {
                assert!(stats.median_rotation_deg < 1e-6, "{:?}", cell.axis);
                assert_eq!(stats.failures, 0);
            }
        }
        // The three sweeps share instance streams, so their zero cells are
        // identical outcomes.
        assert_eq!(zero_cells[0].solver_stats, zero_cells[1].solver_stats);
        assert_eq!(zero_cells[0].solver_stats, zero_cells[2].solver_stats);
        assert_eq!(zero_cells[0].baseline, zero_cells[1].baseline);
    }

    #[test]
    fn noise_raises_solver_error() {
        let cfg = tiny_grid();
        let report = run_noise_grid(&cfg).unwrap();
        for axis in NoiseAxis::ALL {
            let cells: Vec<&NoiseCell> =
                report.cells.iter().filter(|c| c.axis == axis).collect();
            for stats in &cells[1].solver_stats {
                let zero = &cells[0].solver_stats[0];
                assert!(
                    stats.median_rotation_deg > zero.median_rotation_deg,
                    "axis {axis:?} did not raise the error"
                );
            }
        }
    }

    #[test]
    fn baseline_ignores_depth_noise_exactly() {
        // The generator consumes a fixed number of draws per observation, so
        // cells differing only in depth sigma see identical pixels and the
        // multi-point baseline repeats its estimates bit for bit.
        let cfg = tiny_grid();
        let report = run_noise_grid(&cfg).unwrap();
        let depth_cells: Vec<&NoiseCell> = report
            .cells
            .iter()
            .filter(|c| c.axis == NoiseAxis::Depth)
            .collect();
        assert_eq!(depth_cells[0].baseline, depth_cells[1].baseline);
    }

    #[test]
    fn grid_csv_shape() {
        let cfg = NoiseGridConfig {
            instances_per_cell: 5,
            ..tiny_grid()
        };
        let report = run_noise_grid(&cfg).unwrap();
        let csv = report.to_csv();
        // 6 cells x (2 solvers + baseline) + header.
        assert_eq!(csv.lines().count(), 1 + 6 * 3);
        assert!(csv.contains("epipolar_baseline"));
    }

    #[test]
    fn perfect_data_makes_every_hypothesis_usable() {
        let cfg = ApplicabilityConfig {
            pairs: 5,
            correspondences_per_pair: 30,
            ..ApplicabilityConfig::default()
        };
        let report = run_applicability_study(&cfg).unwrap();
        assert_eq!(report.fraction_with_min_inliers, 1.0);
        assert_eq!(report.hypothesis_failures, 0);
        assert!(report.per_pair_fraction.iter().all(|&f| f == 1.0));
        let last = report.rotation_error_percentiles.last().unwrap();
        assert!(last.1 < 1e-6, "max rotation error {}", last.1);
    }

    #[test]
    fn single_correspondence_pairs_never_reach_the_consensus_bar() {
        let cfg = ApplicabilityConfig {
            pairs: 3,
            correspondences_per_pair: 1,
            ..ApplicabilityConfig::default()
        };
        let report = run_applicability_study(&cfg).unwrap();
        // Each hypothesis explains its own correspondence and nothing else.
        assert_eq!(report.fraction_with_min_inliers, 0.0);
    }

    #[test]
    fn contamination_drops_the_usable_fraction() {
        let cfg = ApplicabilityConfig {
            pairs: 5,
            correspondences_per_pair: 60,
            outlier_fraction: 0.3,
            noise: NoiseConfig {
                sigma_px: 2.0,
                sigma_frame: 0.1,
                sigma_depth: 0.1,
                sigma_gradient: 0.1,
            },
            ..ApplicabilityConfig::default()
        };
        let report = run_applicability_study(&cfg).unwrap();
        assert!(
            report.fraction_with_min_inliers < 0.5,
            "heavy corruption left {} usable",
            report.fraction_with_min_inliers
        );
    }

    #[test]
    fn study_reports_are_deterministic() {
        let cfg = small_stability(20);
        let a = run_stability_study(&cfg).unwrap();
        let b = run_stability_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summary_csv(), b.summary_csv());
        assert_eq!(a.histogram_csv(), b.histogram_csv());

        let gcfg = NoiseGridConfig {
            instances_per_cell: 5,
            ..tiny_grid()
        };
        assert_eq!(
            run_noise_grid(&gcfg).unwrap().to_csv(),
            run_noise_grid(&gcfg).unwrap().to_csv()
        );

        let acfg = ApplicabilityConfig {
            pairs: 3,
            correspondences_per_pair: 20,
            outlier_fraction: 0.2,
            ..ApplicabilityConfig::default()
        };
        let ra = run_applicability_study(&acfg).unwrap();
        let rb = run_applicability_study(&acfg).unwrap();
        assert_eq!(ra.per_pair_csv(), rb.per_pair_csv());
        assert_eq!(ra.error_cdf_csv(), rb.error_cdf_csv());
    }
}
