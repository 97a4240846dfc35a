//! File formats: correspondence JSON lines, depth maps (PFM and a raw `f32`
//! container), camera intrinsics JSON, and depth sampling with gradient
//! estimation.

use std::fs;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use relpose_core::{
    AffineCorrespondence, DepthObservation, LocalAffineFrame, Observation, PinholeCamera,
};

use crate::error::CliError;

// ---------------------------------------------------------------------------
// Correspondence records
// ---------------------------------------------------------------------------

/// One affine correspondence with optional depth data, as stored on disk
/// (one JSON object per line).
///
/// `g1`/`g2` are depth gradients per *pixel*; they are converted into the
/// patch parameterization of the affine frame (`g * M`) when an
/// [`Observation`] is assembled, mirroring what depth-map sampling produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceRecord {
    /// Pixel location in view 1.
    pub x1: [f64; 2],
    /// Pixel location in view 2.
    pub x2: [f64; 2],
    /// Row-major 2x2 local affine frame in view 1.
    #[serde(rename = "M1")]
    pub m1: [f64; 4],
    /// Row-major 2x2 local affine frame in view 2.
    #[serde(rename = "M2")]
    pub m2: [f64; 4],
    /// Optional precomputed depth at `x1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    /// Optional precomputed depth at `x2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    /// Optional per-pixel depth gradient at `x1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<[f64; 2]>,
    /// Optional per-pixel depth gradient at `x2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<[f64; 2]>,
}

impl CorrespondenceRecord {
    /// Whether the record carries its own depth data.
    pub fn has_depth(&self) -> bool {
        self.l1.is_some()
    }

    fn validate(&self) -> Result<(), String> {
        let mut entries: Vec<f64> = Vec::new();
        entries.extend(self.x1);
        entries.extend(self.x2);
        entries.extend(self.m1);
        entries.extend(self.m2);
        entries.extend(self.l1);
        entries.extend(self.l2);
        entries.extend(self.g1.into_iter().flatten());
        entries.extend(self.g2.into_iter().flatten());
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(String::from("non-finite entry"));
        }
        let present = [
            self.l1.is_some(),
            self.l2.is_some(),
            self.g1.is_some(),
            self.g2.is_some(),
        ];
        if present.iter().any(|&p| p) && !present.iter().all(|&p| p) {
            return Err(String::from(
                "depth fields l1, l2, g1, g2 must be given together",
            ));
        }
        Ok(())
    }

    /// The affine-frame part as core types.
    pub fn correspondence(&self) -> AffineCorrespondence {
        AffineCorrespondence {
            view1: LocalAffineFrame {
                point: Vector2::new(self.x1[0], self.x1[1]),
                frame: Matrix2::new(self.m1[0], self.m1[1], self.m1[2], self.m1[3]),
            },
            view2: LocalAffineFrame {
                point: Vector2::new(self.x2[0], self.x2[1]),
                frame: Matrix2::new(self.m2[0], self.m2[1], self.m2[2], self.m2[3]),
            },
        }
    }
}

/// Parses a JSON-lines correspondence file; empty lines are skipped, every
/// error carries its 1-based line number.
pub fn load_correspondences(path: &Path) -> Result<Vec<CorrespondenceRecord>, CliError> {
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    parse_correspondences(std::io::BufReader::new(file), path)
}

/// [`load_correspondences`] over any reader; `path` is for error messages.
pub fn parse_correspondences(
    reader: impl BufRead,
    path: &Path,
) -> Result<Vec<CorrespondenceRecord>, CliError> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CliError::Parse {
                path: path.into(),
                line: number,
                message: e.to_string(),
            })?;
        let record: CorrespondenceRecord =
            serde_json::from_value(value).map_err(|e| CliError::Schema {
                path: path.into(),
                line: number,
                message: e.to_string(),
            })?;
        record.validate().map_err(|message| CliError::Schema {
            path: path.into(),
            line: number,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSON lines; `load(save(records)) == records`.
pub fn save_correspondences(
    path: &Path,
    records: &[CorrespondenceRecord],
) -> Result<(), CliError> {
    let mut out = String::new();
    for record in records {
        out.push_str(
            &serde_json::to_string(record).expect("record serialization cannot fail"),
        );
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

/// Expresses a solver observation as a wire record, converting the patch
/// depth gradients back to per-pixel ones (`g_px = g_patch * M^-1`).
pub fn record_from_observation(obs: &Observation) -> Result<CorrespondenceRecord, CliError> {
    let to_pixel = |gradient: &RowVector2<f64>, frame: &Matrix2<f64>| {
        frame
            .try_inverse()
            .map(|inv| gradient * inv)
            .ok_or_else(|| {
                CliError::Invalid(String::from(
                    "affine frame is singular; cannot express the depth gradient per pixel",
                ))
            })
    };
    let g1 = to_pixel(&obs.depth1.gradient, &obs.correspondence.view1.frame)?;
    let g2 = to_pixel(&obs.depth2.gradient, &obs.correspondence.view2.frame)?;
    let flat = |m: &Matrix2<f64>| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
    Ok(CorrespondenceRecord {
        x1: obs.correspondence.view1.point.into(),
        x2: obs.correspondence.view2.point.into(),
        m1: flat(&obs.correspondence.view1.frame),
        m2: flat(&obs.correspondence.view2.frame),
        l1: Some(obs.depth1.depth),
        l2: Some(obs.depth2.depth),
        g1: Some([g1[0], g1[1]]),
        g2: Some([g2[0], g2[1]]),
    })
}

/// Assembles solver observations, taking depths from the records when
/// present and sampling the maps otherwise.
pub fn observations_from_records(
    records: &[CorrespondenceRecord],
    depth1: Option<&DepthMap>,
    depth2: Option<&DepthMap>,
) -> Result<Vec<Observation>, CliError> {
    records
        .iter()
        .map(|record| observation_from_record(record, depth1, depth2))
        .collect()
}

/// Assembles one observation; see [`observations_from_records`].
pub fn observation_from_record(
    record: &CorrespondenceRecord,
    depth1: Option<&DepthMap>,
    depth2: Option<&DepthMap>,
) -> Result<Observation, CliError> {
    let correspondence = record.correspondence();
    let (d1, d2) = if record.has_depth() {
        let own = |l: Option<f64>, g: Option<[f64; 2]>| DepthObservation {
            depth: l.expect("validated together"),
            gradient: RowVector2::from(g.expect("validated together")),
        };
        (own(record.l1, record.g1), own(record.l2, record.g2))
    } else {
        match (depth1, depth2) {
            (Some(m1), Some(m2)) => (
                sample_depth(m1, correspondence.view1.point)?,
                sample_depth(m2, correspondence.view2.point)?,
            ),
            _ => {
                return Err(CliError::Invalid(String::from(
                    "records carry no depth fields and no depth maps were given",
                )))
            }
        }
    };
    // Per-pixel gradients -> the patch parameterization the lift expects.
    let to_patch = |d: DepthObservation, frame: &Matrix2<f64>| DepthObservation {
        depth: d.depth,
        gradient: d.gradient * frame,
    };
    Ok(Observation {
        depth1: to_patch(d1, &correspondence.view1.frame),
        depth2: to_patch(d2, &correspondence.view2.frame),
        correspondence,
    })
}

// ---------------------------------------------------------------------------
// Depth maps
// ---------------------------------------------------------------------------

/// Magic bytes of the raw depth container: the 16-byte header is this magic
/// followed by little-endian `u32` width and height; the payload is
/// row-major little-endian `f32`, row 0 at the top.
pub const RAW_DEPTH_MAGIC: &[u8; 8] = b"RPDEPTH1";

/// A dense relative depth map, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
    /// Unit hint carried by the container (the PFM scale), if any.
    pub scale_hint: Option<f64>,
}

impl DepthMap {
    /// Wraps row-major values; they must be finite and non-negative and
    /// match `width * height`.
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, CliError> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(CliError::Invalid(format!(
                "depth map size mismatch: {}x{} declared, {} values",
                width,
                height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::Invalid(String::from(
                "depth maps must contain finite non-negative values",
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            scale_hint: None,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    fn at(&self, col: u32, row: u32) -> f64 {
        f64::from(self.values[row as usize * self.width as usize + col as usize])
    }

    /// Bilinear interpolation at continuous pixel coordinates inside
    /// `[0, w-1] x [0, h-1]`.
    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let c0 = (x.floor() as u32).min(self.width - 1);
        let r0 = (y.floor() as u32).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let fx = x - f64::from(c0);
        let fy = y - f64::from(r0);
        let top = self.at(c0, r0) * (1.0 - fx) + self.at(c1, r0) * fx;
        let bottom = self.at(c0, r1) * (1.0 - fx) + self.at(c1, r1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Samples depth and its per-pixel gradient: bilinear value at `x`, central
/// differences of bilinear samples one pixel apart. `x` must lie in the
/// interior margin `[1, w-2] x [1, h-2]`.
pub fn sample_depth(map: &DepthMap, x: Vector2<f64>) -> Result<DepthObservation, CliError> {
    let max_x = f64::from(map.width) - 2.0;
    let max_y = f64::from(map.height) - 2.0;
    if !(x.x >= 1.0 && x.x <= max_x && x.y >= 1.0 && x.y <= max_y) {
        return Err(CliError::OutOfBounds {
            x: x.x,
            y: x.y,
            width: map.width,
            height: map.height,
        });
    }
    let depth = map.bilinear(x.x, x.y);
    if depth <= 0.0 {
        return Err(CliError::InvalidDepth(depth));
    }
    let gx = (map.bilinear(x.x + 1.0, x.y) - map.bilinear(x.x - 1.0, x.y)) / 2.0;
    let gy = (map.bilinear(x.x, x.y + 1.0) - map.bilinear(x.x, x.y - 1.0)) / 2.0;
    Ok(DepthObservation {
        depth,
        gradient: RowVector2::new(gx, gy),
    })
}

/// Loads a depth map, sniffing the container: PFM (`Pf`) or the raw `f32`
/// format ([`RAW_DEPTH_MAGIC`]).
pub fn load_depth_map(path: &Path) -> Result<DepthMap, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    let format_err = |message: String| CliError::Format {
        path: path.into(),
        message,
    };
    if bytes.starts_with(RAW_DEPTH_MAGIC) {
        parse_raw(&bytes).map_err(format_err)
    } else if bytes.starts_with(b"Pf") {
        parse_pfm(&bytes).map_err(format_err)
    } else if bytes.starts_with(b"PF") {
        Err(format_err(String::from(
            "color PFM is not supported; depth maps are single-channel 'Pf'",
        )))
    } else {
        Err(format_err(String::from(
            "unrecognized depth map container (expected PFM or raw f32)",
        )))
    }
}

fn parse_pfm(bytes: &[u8]) -> Result<DepthMap, String> {
    // Header: three whitespace-separated tokens ("Pf", "<w> <h>", "<scale>")
    // followed by exactly one whitespace byte, then the sample block.
    let mut tokens: Vec<&[u8]> = Vec::new();
    let mut pos = 0usize;
    while tokens.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos > start {
            tokens.push(&bytes[start..pos]);
        }
        if tokens.len() < 4 {
            continue;
        }
        // Data starts after the single whitespace byte ending the header.
        pos += 1;
    }
    if tokens.len() < 4 || pos > bytes.len() {
        return Err(String::from("truncated PFM header"));
    }
    let ascii = |t: &[u8]| String::from_utf8_lossy(t).into_owned();
    if tokens[0] != b"Pf" {
        return Err(format!("bad PFM type token {:?}", ascii(tokens[0])));
    }
    let width: u32 = ascii(tokens[1])
        .parse()
        .map_err(|_| format!("bad PFM width {:?}", ascii(tokens[1])))?;
    let height: u32 = ascii(tokens[2])
        .parse()
        .map_err(|_| format!("bad PFM height {:?}", ascii(tokens[2])))?;
    let scale: f64 = ascii(tokens[3])
        .parse()
        .map_err(|_| format!("bad PFM scale {:?}", ascii(tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(String::from("PFM scale must be finite and nonzero"));
    }
    let count = width as usize * height as usize;
    let data = &bytes[pos..];
    if data.len() != count * 4 {
        return Err(format!(
            "PFM payload of {} bytes does not match {width}x{height} samples",
            data.len()
        ));
    }
    let little_endian = scale < 0.0;
    let mut values = vec![0.0f32; count];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("chunks_exact yields 4 bytes");
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        // PFM stores rows bottom-to-top; flip to row 0 = top.
        let row = i / width as usize;
        let col = i % width as usize;
        values[(height as usize - 1 - row) * width as usize + col] = v;
    }
    let mut map = DepthMap::new(width, height, values).map_err(|e| e.to_string())?;
    map.scale_hint = Some(scale.abs());
    Ok(map)
}

fn parse_raw(bytes: &[u8]) -> Result<DepthMap, String> {
    if bytes.len() < 16 {
        return Err(String::from("truncated raw depth header"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().expect("sliced 4 bytes"));
    let height = u32::from_le_bytes(bytes[12..16].try_into().expect("sliced 4 bytes"));
    let count = width as usize * height as usize;
    let data = &bytes[16..];
    if data.len() != count * 4 {
        return Err(format!(
            "raw payload of {} bytes does not match {width}x{height} samples",
            data.len()
        ));
    }
    let values = data
        .chunks_exact(4)
        .map(|chunk| f32::from_le_bytes(chunk.try_into().expect("chunks_exact yields 4 bytes")))
        .collect();
    DepthMap::new(width, height, values).map_err(|e| e.to_string())
}

/// Writes a little-endian PFM (scale -1, bottom-up rows per the format).
pub fn save_depth_map_pfm(path: &Path, map: &DepthMap) -> Result<(), CliError> {
    let mut out = format!("Pf\n{} {}\n-1\n", map.width, map.height).into_bytes();
    for row in (0..map.height as usize).rev() {
        for col in 0..map.width as usize {
            out.extend_from_slice(&map.values[row * map.width as usize + col].to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

/// Writes the raw `f32` container ([`RAW_DEPTH_MAGIC`]).
pub fn save_depth_map_raw(path: &Path, map: &DepthMap) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(16 + map.values.len() * 4);
    out.extend_from_slice(RAW_DEPTH_MAGIC);
    out.extend_from_slice(&map.width.to_le_bytes());
    out.extend_from_slice(&map.height.to_le_bytes());
    for v in &map.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Intrinsics
// ---------------------------------------------------------------------------

/// On-disk camera description: row-major 3x3 `K` plus the image size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsFile {
    #[serde(rename = "K")]
    pub k: [f64; 9],
    pub width: u32,
    pub height: u32,
}

pub fn load_intrinsics(path: &Path) -> Result<PinholeCamera, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    let spec: IntrinsicsFile = serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.into(),
        message: e.to_string(),
    })?;
    Ok(PinholeCamera::new(
        Matrix3::from_row_slice(&spec.k),
        spec.width,
        spec.height,
    )?)
}

pub fn save_intrinsics(path: &Path, camera: &PinholeCamera) -> Result<(), CliError> {
    let k = camera.intrinsics();
    let spec = IntrinsicsFile {
        k: [
            k[(0, 0)],
            k[(0, 1)],
            k[(0, 2)],
            k[(1, 0)],
            k[(1, 1)],
            k[(1, 2)],
            k[(2, 0)],
            k[(2, 1)],
            k[(2, 2)],
        ],
        width: camera.width(),
        height: camera.height(),
    };
    let text = serde_json::to_string_pretty(&spec).expect("intrinsics serialization cannot fail");
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}
