//! Pinhole camera model, rigid transforms, and the mapping between image
//! pixels and points on the ground plane.
//!
//! Public pixel coordinates use a top-left origin with pixel centers at
//! integer coordinates. The ray/plane formulas work on pixels re-centered on
//! the principal point, which is done internally.

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

/// Points closer than this to the camera plane cannot be projected.
const MIN_DEPTH: f64 = 1e-12;
const PARALLEL_EPS: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point lies at or behind the camera plane (z = {0})")]
    BehindCamera(f64),
    #[error("viewing ray is parallel to the plane")]
    RayParallelToPlane,
    #[error("plane intersection lies behind the camera (depth = {0})")]
    PlaneBehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation matrix is not a proper orthonormal matrix")]
    InvalidRotation,
    #[error("plane normal must be non-zero")]
    DegeneratePlane,
}

/// Square-pixel, zero-skew pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(focal: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!("focal length {focal} must be > 0")));
        }
        if !(cx > 0.0 && cx < width as f64) || !(cy > 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(Self { focal, cx, cy, width, height })
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    /// Pixel re-centered on the principal point.
    #[inline]
    pub fn centered_pixel(&self, pixel: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(pixel.x - self.cx, pixel.y - self.cy)
    }

    /// Direction of the viewing ray through `pixel`, scaled so that z = 1.
    #[inline]
    pub fn ray(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        let c = self.centered_pixel(pixel);
        Vector3::new(c.x / self.focal, c.y / self.focal, 1.0)
    }

    pub fn contains(&self, pixel: Vector2<f64>) -> bool {
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x < self.width as f64 && pixel.y < self.height as f64
    }
}

/// Rotation followed by translation: `p' = R p + t`.
#[derive(Debug, Clone, Copy)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    /// Quaternion the rotation was built from, kept so it can be written back exactly.
    source_quaternion: Option<UnitQuaternion<f64>>,
}

impl PartialEq for RigidTransform {
    fn eq(&self, other: &Self) -> bool {
        self.rotation == other.rotation && self.translation == other.translation
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOL || (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self { rotation, translation, source_quaternion: None })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), source_quaternion: None }
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation: *q.to_rotation_matrix().matrix(), translation, source_quaternion: Some(q) }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        self.source_quaternion.unwrap_or_else(|| UnitQuaternion::from_matrix(&self.rotation))
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation), source_quaternion: self.source_quaternion.map(|q| q.inverse()) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            source_quaternion: None,
        }
    }
}

/// Camera pose and intrinsics for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub frame_index: u32,
    pub world_from_camera: RigidTransform,
    pub intrinsics: Intrinsics,
}

impl CameraFrame {
    pub fn new(frame_index: u32, world_from_camera: RigidTransform, intrinsics: Intrinsics) -> Self {
        Self { frame_index, world_from_camera, intrinsics }
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        *self.world_from_camera.translation()
    }

    pub fn camera_from_world(&self) -> RigidTransform {
        self.world_from_camera.inverse()
    }

    /// Point expressed in the camera frame (z along the optical axis).
    #[inline]
    pub fn to_camera(&self, point_world: &Vector3<f64>) -> Vector3<f64> {
        self.world_from_camera.rotation().transpose() * (point_world - self.world_from_camera.translation())
    }

    /// Projects a world point, returning the pixel and the camera-frame depth.
    pub fn project(&self, point_world: &Vector3<f64>) -> Result<(Vector2<f64>, f64), GeometryError> {
        project_to_image(point_world, self)
    }

    /// Ground plane expressed in this camera's frame.
    pub fn plane_in_camera(&self, plane: &GroundPlane) -> Result<PlaneCameraFrame, GeometryError> {
        let r = self.world_from_camera.rotation();
        let t = self.world_from_camera.translation();
        // n_w · (R p_c + t) = d_w  =>  (Rᵀ n_w) · p_c = d_w − n_w · t
        PlaneCameraFrame::new(r.transpose() * plane.normal, plane.offset - plane.normal.dot(t))
    }
}

/// Plane `n · p = d` in camera coordinates, unit normal, `d ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCameraFrame {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl PlaneCameraFrame {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self, GeometryError> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(GeometryError::DegeneratePlane);
        }
        let (mut normal, mut offset) = (normal / len, offset / len);
        if offset < 0.0 {
            normal = -normal;
            offset = -offset;
        }
        Ok(Self { normal, offset })
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// World-frame plane `n · p = d` with unit normal, plus the RANSAC support
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub inlier_count: usize,
}

impl GroundPlane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self, GeometryError> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(GeometryError::DegeneratePlane);
        }
        Ok(Self { normal: normal / len, offset: offset / len, inlier_count: 0 })
    }

    /// The horizontal plane `z = height`, normal pointing up.
    pub fn horizontal(height: f64) -> Self {
        Self { normal: Vector3::z(), offset: height, inlier_count: 0 }
    }

    #[inline]
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Orthogonal projection onto the plane.
    #[inline]
    pub fn project_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        p - self.normal * self.signed_distance(p)
    }

    /// Removes the normal component of a vector.
    #[inline]
    pub fn project_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        v - self.normal * self.normal.dot(v)
    }

    /// Flips the plane so that `point` has non-negative signed distance.
    pub fn oriented_towards(mut self, point: &Vector3<f64>) -> Self {
        if self.signed_distance(point) < 0.0 {
            self.normal = -self.normal;
            self.offset = -self.offset;
        }
        self
    }

    /// An orthonormal in-plane basis `(u, v)` with `u × v = n`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = (helper - n * n.dot(&helper)).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// Point of the plane closest to the origin.
    pub fn origin(&self) -> Vector3<f64> {
        self.normal * self.offset
    }

    /// Maps 2D plane coordinates to a world point.
    pub fn lift(&self, uv: Vector2<f64>) -> Vector3<f64> {
        let (u, v) = self.basis();
        self.origin() + u * uv.x + v * uv.y
    }

    /// World point to 2D plane coordinates (after orthogonal projection).
    pub fn flatten(&self, p: &Vector3<f64>) -> Vector2<f64> {
        let (u, v) = self.basis();
        let rel = p - self.origin();
        Vector2::new(rel.dot(&u), rel.dot(&v))
    }
}

/// Axis-aligned image box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w: w.max(0.0), h: h.max(0.0) }
    }

    pub fn from_center(center: Vector2<f64>, w: f64, h: f64) -> Self {
        Self::new(center.x - w / 2.0, center.y - h / 2.0, w, h)
    }

    /// Tight box around a set of pixels.
    pub fn enclosing<I: IntoIterator<Item = Vector2<f64>>>(pixels: I) -> Option<Self> {
        let mut it = pixels.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        Some(Self::new(lo.x, lo.y, hi.x - lo.x, hi.y - lo.y))
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn bottom_center(&self) -> Vector2<f64> {
        Vector2::new(self.x + self.w / 2.0, self.y + self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0) || !self.x.is_finite() || !self.y.is_finite()
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let h = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        w * h
    }

    /// Clamps the box to `[0, width] × [0, height]`.
    pub fn clamped(&self, width: u32, height: u32) -> Self {
        let x0 = self.x.clamp(0.0, width as f64);
        let y0 = self.y.clamp(0.0, height as f64);
        let x1 = self.right().clamp(0.0, width as f64);
        let y1 = self.bottom().clamp(0.0, height as f64);
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// The four corners, clockwise from the top-left.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        [
            Vector2::new(self.x, self.y),
            Vector2::new(self.right(), self.y),
            Vector2::new(self.right(), self.bottom()),
            Vector2::new(self.x, self.bottom()),
        ]
    }
}

pub fn project_to_image(point_world: &Vector3<f64>, frame: &CameraFrame) -> Result<(Vector2<f64>, f64), GeometryError> {
    let pc = frame.to_camera(point_world);
    project_camera_point(&pc, &frame.intrinsics)
}

/// Projects a point already expressed in camera coordinates.
#[inline]
pub fn project_camera_point(pc: &Vector3<f64>, k: &Intrinsics) -> Result<(Vector2<f64>, f64), GeometryError> {
    if !(pc.z > MIN_DEPTH) {
        return Err(GeometryError::BehindCamera(pc.z));
    }
    let pixel = Vector2::new(k.focal * pc.x / pc.z + k.cx, k.focal * pc.y / pc.z + k.cy);
    Ok((pixel, pc.z))
}

/// Camera-frame point at `depth` along the viewing ray of `pixel`.
pub fn unproject(pixel: Vector2<f64>, depth: f64, k: &Intrinsics) -> Vector3<f64> {
    let c = k.centered_pixel(pixel);
    Vector3::new(c.x * depth / k.focal, c.y * depth / k.focal, depth)
}

/// Depth `z_c = f·d_c / (a_c·x_i + b_c·y_i + c_c·f)` of the plane along the
/// ray through `pixel`.
pub fn plane_depth_at_pixel(pixel: Vector2<f64>, k: &Intrinsics, plane: &PlaneCameraFrame) -> Result<f64, GeometryError> {
    let c = k.centered_pixel(pixel);
    let n = &plane.normal;
    let denom = n.x * c.x + n.y * c.y + n.z * k.focal;
    if denom.abs() < PARALLEL_EPS {
        return Err(GeometryError::RayParallelToPlane);
    }
    let depth = k.focal * plane.offset / denom;
    if !(depth > 0.0) {
        return Err(GeometryError::PlaneBehindCamera(depth));
    }
    Ok(depth)
}

/// Intersects the viewing ray of `pixel` with the world ground plane.
pub fn backproject_to_plane(pixel: Vector2<f64>, frame: &CameraFrame, plane_world: &GroundPlane) -> Result<Vector3<f64>, GeometryError> {
    let plane_c = frame.plane_in_camera(plane_world)?;
    let depth = plane_depth_at_pixel(pixel, &frame.intrinsics, &plane_c)?;
    let pc = unproject(pixel, depth, &frame.intrinsics);
    Ok(frame.world_from_camera.apply(&pc))
}

/// Camera looking along `heading` (in the xy-plane), pitched down by
/// `pitch` radians below the horizon, with image x pointing right.
pub fn look_down_rotation(heading: f64, pitch: f64) -> Matrix3<f64> {
    let h = Vector3::new(heading.cos(), heading.sin(), 0.0);
    let forward = h * pitch.cos() - Vector3::z() * pitch.sin();
    let right = h.cross(&Vector3::z());
    let down = forward.cross(&right);
    Matrix3::from_columns(&[right, down, forward])
}
