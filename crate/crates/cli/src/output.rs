//! Stable JSON shapes printed on stdout. Fields and their order are part of
//! the tool's interface; runs with identical inputs and seeds print
//! identical bytes.

use serde::Serialize;

use relpose_core::{LiftedCorrespondence, PoseWithScale, RobustResult};

#[derive(Debug, Serialize)]
pub struct PoseJson {
    /// Row-major 3x3 rotation mapping view-2 coordinates into view 1.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    /// Multiplier aligning view-2 depth units with view 1.
    pub scale: f64,
}

impl From<&PoseWithScale> for PoseJson {
    fn from(pose: &PoseWithScale) -> Self {
        let m = pose.rotation.matrix();
        Self {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: pose.translation.into(),
            scale: pose.scale,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveJson {
    pub solver: &'static str,
    pub record: usize,
    pub pose: PoseJson,
}

#[derive(Debug, Serialize)]
pub struct RansacJson {
    pub pose: PoseJson,
    pub inlier_count: usize,
    pub inlier_mask: Vec<bool>,
    pub iterations: u64,
    pub lo_steps: u32,
    pub score: f64,
}

impl RansacJson {
    pub fn new(result: &RobustResult) -> Self {
        Self {
            pose: PoseJson::from(&result.pose),
            inlier_count: result.inlier_count,
            inlier_mask: result.inlier_mask.clone(),
            iterations: result.iterations_run,
            lo_steps: result.lo_steps,
            score: result.score,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LiftJson {
    pub record: usize,
    /// Depth-scaled bearing in view 1 (`a`).
    pub point1: [f64; 3],
    /// Depth-scaled bearing in view 2 (`b`).
    pub point2: [f64; 3],
    /// Row-major 3x2 tangent of view 1 (`A`).
    pub tangent1: [[f64; 2]; 3],
    /// Row-major 3x2 tangent of view 2 (`B`).
    pub tangent2: [[f64; 2]; 3],
}

impl LiftJson {
    pub fn new(record: usize, lifted: &LiftedCorrespondence) -> Self {
        let rows = |m: &nalgebra::Matrix3x2<f64>| {
            [
                [m[(0, 0)], m[(0, 1)]],
                [m[(1, 0)], m[(1, 1)]],
                [m[(2, 0)], m[(2, 1)]],
            ]
        };
        Self {
            record,
            point1: lifted.point1.into(),
            point2: lifted.point2.into(),
            tangent1: rows(&lifted.tangent1),
            tangent2: rows(&lifted.tangent2),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serialization cannot fail");
    text.push('\n');
    text
}
