//! Two-view relative pose from a single affine correspondence with monocular depth.
//!
//! A correspondence between two calibrated views that carries a local affine
//! frame (the 2x2 linear map between patch vicinities) together with a depth
//! and depth gradient per view constrains the full relative pose — rotation,
//! translation *and* the global depth scale — from that one match. This crate
//! provides:
//!
//! - the lifting of such correspondences into scaled bearings and tangent
//!   frames ([`correspondence`]),
//! - two closed-form minimal solvers over the lifted constraint
//!   ([`minimal`]),
//! - a normalized eight-point refit with essential-matrix decomposition and
//!   triangulation for local optimization ([`nonminimal`]),
//! - a 1-point RANSAC with inlier classification by Sampson error and a
//!   simplified locally-optimized refinement step ([`ransac`]),
//! - a synthetic scene generator and the stability / noise / applicability
//!   study runners built on it ([`synth`], [`study`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default `std`
//! feature for embedded or wasm targets. File IO, serialization to disk and
//! the command-line interface live in the companion `relpose-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod camera;
pub mod correspondence;
pub mod epipolar;
pub mod error;
pub mod minimal;
pub mod nonminimal;
pub mod pose;
pub mod ransac;
pub mod study;
pub mod synth;

pub use camera::{CentralCamera, PinholeCamera};
pub use correspondence::{
    lift, AffineCorrespondence, DepthObservation, LiftedCorrespondence, LocalAffineFrame,
    Observation,
};
pub use epipolar::{
    essential_from_pose, fundamental_from_essential, sampson_error, skew_symmetric, EssentialMatrix,
};
pub use error::{CameraError, EpipolarError, LiftError, PoseError, RansacError, SolveError, SynthError};
pub use minimal::{
    orthonormalize_frame, recover_scale, recover_translation, solve_orthonorm, solve_umeyama,
    SolverVariant,
};
pub use nonminimal::{decompose_essential, eight_point, triangulate_linear, BearingPair};
pub use pose::{rotation_error_deg, translation_error_deg, PoseWithScale, Rotation};
pub use ransac::{
    classify_inliers, local_optimize, ransac_1ac_d, required_iterations, InlierClassification,
    RansacConfig, RobustResult,
};
pub use study::{
    run_applicability_study, run_noise_grid, run_stability_study, ApplicabilityConfig,
    ApplicabilityReport, NoiseAxis, NoiseGridConfig, NoiseGridReport, StabilityConfig,
    StabilityReport,
};
pub use synth::{
    add_noise, add_observation_noise, apply_depth_scale, corrupt_with_outliers, generate_scene,
    generate_scene_pair, generate_scene_with_cameras, instance_rng, nullspace_of_normal,
    relative_pose, sample_camera, AbsolutePose, NoiseConfig, SceneConfig, ScenePair, SceneSample,
};
