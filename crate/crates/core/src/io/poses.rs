//! Camera poses, one frame per line:
//!
//! ```text
//! frame qw qx qy qz tx ty tz f cx cy
//! ```
//!
//! The quaternion rotates camera axes into the world and `t` is the camera
//! center in world coordinates, i.e. the record is `world_from_camera`.
//! Image size is not part of the format and is supplied by the caller.

use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{IoError, field, read_text, write_file};
use crate::geometry::{CameraFrame, Intrinsics, RigidTransform};

/// Quaternions further than this from unit norm are reported when loading.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPoses {
    pub frames: Vec<CameraFrame>,
    /// Frames whose quaternion needed more than rounding-level normalization.
    pub renormalized: Vec<u32>,
}

pub fn load_poses(path: &Path, width: u32, height: u32) -> Result<Vec<CameraFrame>, IoError> {
    let parsed = parse_poses(&read_text(path)?, path, width, height)?;
    for f in &parsed.renormalized {
        log::warn!("{}: quaternion of frame {f} was not unit length, normalized", path.display());
    }
    Ok(parsed.frames)
}

pub fn parse_poses(text: &str, path: &Path, width: u32, height: u32) -> Result<ParsedPoses, IoError> {
    let mut frames: Vec<CameraFrame> = Vec::new();
    let mut renormalized = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let frame: u32 = field(path, line_no, "frame", it.next())?;
        let mut v = [0.0f64; 10];
        for (slot, name) in v.iter_mut().zip(["qw", "qx", "qy", "qz", "tx", "ty", "tz", "f", "cx", "cy"]) {
            *slot = field(path, line_no, name, it.next())?;
            if !slot.is_finite() {
                return Err(IoError::parse(path, line_no, format!("{name} is not finite")));
            }
        }
        if let Some(extra) = it.next() {
            return Err(IoError::parse(path, line_no, format!("unexpected field `{extra}`")));
        }
        if let Some(prev) = frames.last() {
            if frame <= prev.frame_index {
                return Err(IoError::Order { path: path.to_path_buf(), line: line_no, previous: prev.frame_index, frame });
            }
        }
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        let norm = q.norm();
        if !(norm > 0.0) {
            return Err(IoError::parse(path, line_no, "zero quaternion"));
        }
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            renormalized.push(frame);
        }
        // Quaternions already unit to rounding are kept verbatim so that writing
        // a loaded file reproduces it exactly.
        let unit = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON { UnitQuaternion::new_unchecked(q) } else { UnitQuaternion::from_quaternion(q) };
        let pose = RigidTransform::from_quaternion(unit, Vector3::new(v[4], v[5], v[6]));
        let k = Intrinsics::new(v[7], v[8], v[9], width, height).map_err(|e| IoError::parse(path, line_no, e.to_string()))?;
        frames.push(CameraFrame::new(frame, pose, k));
    }
    Ok(ParsedPoses { frames, renormalized })
}

pub fn write_poses(frames: &[CameraFrame], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# frame qw qx qy qz tx ty tz f cx cy")?;
    for f in frames {
        let q = f.world_from_camera.quaternion();
        let t = f.world_from_camera.translation();
        let k = &f.intrinsics;
        writeln!(out, "{} {} {} {} {} {} {} {} {} {} {}", f.frame_index, q.w, q.i, q.j, q.k, t.x, t.y, t.z, k.focal, k.cx, k.cy)?;
    }
    Ok(())
}

pub fn save_poses(frames: &[CameraFrame], path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_poses(frames, out))
}
