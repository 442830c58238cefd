//! Import of COLMAP text exports (`cameras.txt`, `images.txt`,
//! `points3D.txt`) into camera frames and a point cloud.
//!
//! Frames are numbered by image name order. Lens distortion is dropped and
//! separate `fx`, `fy` are averaged; both are logged.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{IoError, field, read_text};
use crate::geometry::{CameraFrame, Intrinsics, RigidTransform};
use crate::scene::PointCloud;

#[derive(Debug, Clone, PartialEq)]
pub struct ColmapImport {
    pub frames: Vec<CameraFrame>,
    /// Image name of each frame.
    pub names: Vec<String>,
    pub cloud: PointCloud,
    pub width: u32,
    pub height: u32,
}

impl ColmapImport {
    /// Writes `poses.txt` and `cloud.ply` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, PathBuf), IoError> {
        let poses = dir.join("poses.txt");
        let cloud = dir.join("cloud.ply");
        super::save_poses(&self.frames, &poses)?;
        super::save_ply(&self.cloud, &cloud)?;
        Ok((poses, cloud))
    }
}

/// Reads the three text files from `dir`.
pub fn import_colmap(dir: &Path) -> Result<ColmapImport, IoError> {
    let files = ["cameras.txt", "images.txt", "points3D.txt"].map(|f| dir.join(f));
    let texts = [read_text(&files[0])?, read_text(&files[1])?, read_text(&files[2])?];
    parse_colmap([(&texts[0], &files[0]), (&texts[1], &files[1]), (&texts[2], &files[2])])
}

struct Camera {
    width: u32,
    height: u32,
    focal: f64,
    cx: f64,
    cy: f64,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.starts_with('#'))
}

fn parse_cameras(text: &str, path: &Path) -> Result<HashMap<u32, Camera>, IoError> {
    let mut out = HashMap::new();
    for (n, line) in content_lines(text).filter(|(_, l)| !l.is_empty()) {
        let mut it = line.split_whitespace();
        let id: u32 = field(path, n, "CAMERA_ID", it.next())?;
        let model = it.next().ok_or_else(|| IoError::parse(path, n, "missing MODEL"))?.to_string();
        let width = field(path, n, "WIDTH", it.next())?;
        let height = field(path, n, "HEIGHT", it.next())?;
        let params = it.map(|t| field::<f64>(path, n, "PARAMS", Some(t))).collect::<Result<Vec<_>, _>>()?;
        let need = |k: usize| if params.len() >= k { Ok(()) } else { Err(IoError::parse(path, n, format!("{model} needs {k} parameters"))) };
        let (focal, cx, cy, first_distortion) = match model.as_str() {
            "SIMPLE_PINHOLE" | "SIMPLE_RADIAL" | "RADIAL" => {
                need(3)?;
                (params[0], params[1], params[2], 3)
            }
            "PINHOLE" | "OPENCV" | "FULL_OPENCV" => {
                need(4)?;
                if params[0] != params[1] {
                    log::warn!("{}:{n}: camera {id} has fx != fy, using their mean", path.display());
                }
                (0.5 * (params[0] + params[1]), params[2], params[3], 4)
            }
            other => return Err(IoError::parse(path, n, format!("unsupported camera model {other}"))),
        };
        if params[first_distortion..].iter().any(|k| *k != 0.0) {
            log::warn!("{}:{n}: camera {id} distortion is ignored", path.display());
        }
        out.insert(id, Camera { width, height, focal, cx, cy });
    }
    Ok(out)
}

fn parse_points(text: &str, path: &Path) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for (n, line) in content_lines(text).filter(|(_, l)| !l.is_empty()) {
        let t: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize, name: &str| field::<f64>(path, n, name, t.get(i).copied());
        let rgb = |i: usize, name: &str| field::<u8>(path, n, name, t.get(i).copied());
        points.push(Vector3::new(num(1, "X")?, num(2, "Y")?, num(3, "Z")?));
        colors.push([rgb(4, "R")?, rgb(5, "G")?, rgb(6, "B")?]);
    }
    PointCloud::with_colors(points, Some(colors)).map_err(|e| IoError::schema(path, e.to_string()))
}

/// Parses `(text, path)` pairs for cameras, images and points, in that order.
pub fn parse_colmap(files: [(&str, &Path); 3]) -> Result<ColmapImport, IoError> {
    let [(cam_text, cam_path), (img_text, img_path), (pts_text, pts_path)] = files;
    let cameras = parse_cameras(cam_text, cam_path)?;

    let mut images = Vec::new();
    let mut lines = content_lines(img_text);
    while let Some((n, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let _id: u32 = field(img_path, n, "IMAGE_ID", it.next())?;
        let mut v = [0.0f64; 7];
        for (slot, name) in v.iter_mut().zip(["QW", "QX", "QY", "QZ", "TX", "TY", "TZ"]) {
            *slot = field(img_path, n, name, it.next())?;
        }
        let camera_id: u32 = field(img_path, n, "CAMERA_ID", it.next())?;
        let name = it.collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            return Err(IoError::parse(img_path, n, "missing NAME"));
        }
        let cam = cameras.get(&camera_id).ok_or_else(|| IoError::parse(img_path, n, format!("unknown camera {camera_id}")))?;
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        if !(q.norm() > 0.0) {
            return Err(IoError::parse(img_path, n, "zero quaternion"));
        }
        let camera_from_world = RigidTransform::from_quaternion(UnitQuaternion::from_quaternion(q), Vector3::new(v[4], v[5], v[6]));
        images.push((name, camera_from_world.inverse(), cam));
        // the 2D observation line that follows every image line
        lines.next();
    }
    images.sort_by(|a, b| a.0.cmp(&b.0));

    let (width, height) = match images.first() {
        Some((_, _, c)) => (c.width, c.height),
        None => return Err(IoError::schema(img_path, "no images")),
    };
    if images.iter().any(|(_, _, c)| (c.width, c.height) != (width, height)) {
        return Err(IoError::schema(cam_path, "all images must share one size"));
    }
    let mut frames = Vec::with_capacity(images.len());
    let mut names = Vec::with_capacity(images.len());
    for (i, (name, pose, c)) in images.into_iter().enumerate() {
        let k = Intrinsics::new(c.focal, c.cx, c.cy, c.width, c.height).map_err(|e| IoError::schema(cam_path, e.to_string()))?;
        frames.push(CameraFrame::new(i as u32, pose, k));
        names.push(name);
    }
    Ok(ColmapImport { frames, names, cloud: parse_points(pts_text, pts_path)?, width, height })
}
