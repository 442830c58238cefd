//! Point-cloud conditioning, ground-plane estimation and per-frame depth
//! map approximation.
//!
//! The reconstruction is cleaned in three passes (near-camera points,
//! statistical outliers, points below the ground) and then used as a sparse
//! occluder model. Depth maps hold camera-frame z values: the analytic ground
//! plane forms the base layer and every cloud point is splatted on top with a
//! z-buffer rule.

mod kdtree;

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use crate::geometry::GroundPlane;
use crate::geometry::{plane_depth_at_pixel, CameraFrame, GeometryError};
pub use kdtree::KdTree;

/// Neighborhood size for the statistical outlier test.
pub const DEFAULT_NEIGHBORS: usize = 10;
pub const DEFAULT_SIGMA_LIM: f64 = 1.0;
pub const DEFAULT_RANSAC_ITERATIONS: usize = 1000;
pub const DEFAULT_SPLAT_RADIUS: f64 = 2.0;
/// Depth value stored for pixels without plane or point coverage.
/// Smallest band half-width, relative to the mean neighbor distance.
pub const BAND_RELATIVE_FLOOR: f64 = 1e-9;
pub const NO_DEPTH: f32 = f32::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need more than {k} points for a {k}-neighborhood, got {n}")]
    InsufficientPoints { n: usize, k: usize },
    #[error("every sampled point triple was degenerate")]
    DegenerateGeometry,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, SceneError> {
        Self::with_colors(points, None)
    }

    pub fn with_colors(points: Vec<Vector3<f64>>, colors: Option<Vec<[u8; 3]>>) -> Result<Self, SceneError> {
        if let Some(bad) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SceneError::InvalidArgument(format!("point {bad} has non-finite coordinates")));
        }
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(SceneError::InvalidArgument(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, colors })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points whose `keep` flag is set.
    pub fn select(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.len());
        let points = self.points.iter().zip(keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
        let colors = self
            .colors
            .as_ref()
            .map(|c| c.iter().zip(keep).filter(|(_, k)| **k).map(|(c, _)| *c).collect());
        Self { points, colors }
    }

    /// Length of the axis-aligned bounding box diagonal (0 when empty).
    pub fn bounding_diagonal(&self) -> f64 {
        let Some(first) = self.points.first() else { return 0.0 };
        let (lo, hi) = self.points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }

    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.colors, &other.colors) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(std::iter::repeat_n([255, 255, 255], other.len())),
            (None, Some(b)) if self.points.is_empty() => self.colors = Some(b.clone()),
            (None, Some(_)) => {}
            (None, None) => {}
        }
        self.points.extend_from_slice(&other.points);
    }
}

pub fn remove_near_camera_points(cloud: &PointCloud, frames: &[CameraFrame], min_distance: f64) -> Result<PointCloud, SceneError> {
    if frames.is_empty() {
        return Err(SceneError::InvalidArgument("no camera frames given".into()));
    }
    if !(min_distance >= 0.0) {
        return Err(SceneError::InvalidArgument(format!("min_distance {min_distance} must be >= 0")));
    }
    let centers: Vec<_> = frames.iter().map(CameraFrame::center).collect();
    let keep: Vec<bool> = cloud
        .points
        .iter()
        .map(|p| centers.iter().all(|c| (p - c).norm() >= min_distance))
        .collect();
    Ok(cloud.select(&keep))
}

/// How `sigma_lim` widens the accepted band around the mean neighbor distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierBand {
    /// `d_avg ± sigma_lim · std(d)`
    #[default]
    StdDevs,
    /// `d_avg ± sigma_lim`, in scene units.
    Absolute,
}

/// Mean distance from each point to its `k` nearest neighbors, with the
/// neighbor distances summed in ascending order.
pub fn mean_neighbor_distances(points: &[Vector3<f64>], k: usize) -> Vec<f64> {
    let tree = KdTree::build(points);
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = tree.nearest_dist_sq(p, k, Some(i));
            d.iter().map(|s| s.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

/// Flags points whose mean `k`-neighbor distance falls outside the band
/// around the cloud-wide average. Returns the kept cloud and the outlier mask.
pub fn remove_statistical_outliers(cloud: &PointCloud, k: usize, sigma_lim: f64) -> Result<(PointCloud, Vec<bool>), SceneError> {
    remove_statistical_outliers_with(cloud, k, sigma_lim, OutlierBand::StdDevs)
}

pub fn remove_statistical_outliers_with(
    cloud: &PointCloud,
    k: usize,
    sigma_lim: f64,
    band: OutlierBand,
) -> Result<(PointCloud, Vec<bool>), SceneError> {
    if cloud.len() <= k || k == 0 {
        return Err(SceneError::InsufficientPoints { n: cloud.len(), k });
    }
    if !(sigma_lim > 0.0) {
        return Err(SceneError::InvalidArgument(format!("sigma_lim {sigma_lim} must be > 0")));
    }
    let d = mean_neighbor_distances(&cloud.points, k);
    let n = d.len() as f64;
    let avg = d.iter().sum::<f64>() / n;
    let half_width = match band {
        OutlierBand::StdDevs => {
            let var = d.iter().map(|x| (x - avg) * (x - avg)).sum::<f64>() / n;
            // rounding noise alone must not split equal distances
            (sigma_lim * var.sqrt()).max(BAND_RELATIVE_FLOOR * avg)
        }
        OutlierBand::Absolute => sigma_lim,
    };
    let (lo, hi) = (avg - half_width, avg + half_width);
    let outlier: Vec<bool> = d.iter().map(|&x| x < lo || x > hi).collect();
    let keep: Vec<bool> = outlier.iter().map(|o| !o).collect();
    Ok((cloud.select(&keep), outlier))
}

/// Fits the dominant plane with RANSAC over random point triples, then
/// refines it by least squares on the consensus set.
pub fn estimate_ground_plane(cloud: &PointCloud, inlier_tol: f64, iterations: usize, seed: u64) -> Result<GroundPlane, SceneError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(SceneError::InvalidArgument(format!("need at least 3 points, got {}", pts.len())));
    }
    if !(inlier_tol > 0.0) {
        return Err(SceneError::InvalidArgument(format!("inlier_tol {inlier_tol} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(GroundPlane, usize)> = None;
    for _ in 0..iterations.max(1) {
        let idx = index::sample(&mut rng, pts.len(), 3);
        let Some(plane) = plane_through(&pts[idx.index(0)], &pts[idx.index(1)], &pts[idx.index(2)]) else {
            continue;
        };
        let count = count_inliers(pts, &plane, inlier_tol);
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((plane, count));
        }
    }
    let (hypothesis, count) = best.ok_or(SceneError::DegenerateGeometry)?;
    let inliers: Vec<Vector3<f64>> = pts.iter().filter(|p| hypothesis.signed_distance(p).abs() <= inlier_tol).copied().collect();
    let mut plane = match least_squares_plane(&inliers) {
        Some(refined) => {
            let refined_count = count_inliers(pts, &refined, inlier_tol);
            if refined_count >= count {
                GroundPlane { inlier_count: refined_count, ..refined }
            } else {
                GroundPlane { inlier_count: count, ..hypothesis }
            }
        }
        None => GroundPlane { inlier_count: count, ..hypothesis },
    };
    if plane.offset < 0.0 {
        plane.normal = -plane.normal;
        plane.offset = -plane.offset;
    }
    Ok(plane)
}

fn count_inliers(pts: &[Vector3<f64>], plane: &GroundPlane, tol: f64) -> usize {
    pts.iter().filter(|p| plane.signed_distance(p).abs() <= tol).count()
}

fn plane_through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<GroundPlane> {
    let (e1, e2) = (b - a, c - a);
    let cross = e1.cross(&e2);
    let norm = cross.norm();
    if !(norm > 1e-12 * e1.norm() * e2.norm()) || norm == 0.0 {
        return None;
    }
    let n = cross / norm;
    Some(GroundPlane { normal: n, offset: n.dot(a), inlier_count: 0 })
}

/// Total-least-squares plane through `pts`.
fn least_squares_plane(pts: &[Vector3<f64>]) -> Option<GroundPlane> {
    if pts.len() < 3 {
        return None;
    }
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let n = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    let n = n / len;
    Some(GroundPlane { normal: n, offset: n.dot(&centroid), inlier_count: 0 })
}

/// Flips the plane so that most camera centers lie on its positive side.
pub fn orient_towards_cameras(plane: GroundPlane, frames: &[CameraFrame]) -> GroundPlane {
    let above = frames.iter().filter(|f| plane.signed_distance(&f.center()) > 0.0).count();
    if 2 * above < frames.len() {
        GroundPlane { normal: -plane.normal, offset: -plane.offset, ..plane }
    } else {
        plane
    }
}

/// Removes points more than `tol` below the plane (plane normal pointing up).
pub fn discard_below_ground(cloud: &PointCloud, plane: &GroundPlane, tol: f64) -> PointCloud {
    let keep: Vec<bool> = cloud.points.iter().map(|p| plane.signed_distance(p) >= -tol).collect();
    cloud.select(&keep)
}

/// Parameters of the full conditioning pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningParams {
    pub min_distance: f64,
    pub neighbors: usize,
    pub sigma_lim: f64,
    pub band: OutlierBand,
    pub inlier_tol: f64,
    pub iterations: usize,
    pub below_tol: f64,
    pub seed: u64,
}

impl ConditioningParams {
    /// Defaults scaled to the cloud's bounding diagonal.
    pub fn for_cloud(cloud: &PointCloud) -> Self {
        let diag = cloud.bounding_diagonal().max(f64::MIN_POSITIVE);
        Self {
            min_distance: 0.01 * diag,
            neighbors: DEFAULT_NEIGHBORS,
            sigma_lim: DEFAULT_SIGMA_LIM,
            band: OutlierBand::StdDevs,
            inlier_tol: 0.005 * diag,
            iterations: DEFAULT_RANSAC_ITERATIONS,
            below_tol: 0.005 * diag,
            seed: 0,
        }
    }
}

/// Near-camera removal, outlier removal, plane fit and below-ground removal.
pub fn condition_cloud(cloud: &PointCloud, frames: &[CameraFrame], params: &ConditioningParams) -> Result<(PointCloud, GroundPlane), SceneError> {
    let near = remove_near_camera_points(cloud, frames, params.min_distance)?;
    let (clean, _) = remove_statistical_outliers_with(&near, params.neighbors, params.sigma_lim, params.band)?;
    let plane = estimate_ground_plane(&clean, params.inlier_tol, params.iterations, params.seed)?;
    let plane = orient_towards_cameras(plane, frames);
    Ok((discard_below_ground(&clean, &plane, params.below_tol), plane))
}

/// Row-major grid of camera-frame depths for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub frame_index: u32,
    pub values: Vec<f32>,
}

impl DepthMap {
    pub fn empty(width: u32, height: u32, frame_index: u32) -> Self {
        Self { width, height, frame_index, values: vec![NO_DEPTH; width as usize * height as usize] }
    }

    pub fn from_values(width: u32, height: u32, frame_index: u32, values: Vec<f32>) -> Result<Self, SceneError> {
        if values.len() != width as usize * height as usize {
            return Err(SceneError::InvalidArgument(format!(
                "{} values for a {width}x{height} depth map",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(SceneError::InvalidArgument("depth values must be > 0 or +inf".into()));
        }
        Ok(Self { width, height, frame_index, values })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Depth at the pixel nearest to `pixel`, or `None` outside the map.
    #[inline]
    pub fn at_pixel(&self, pixel: Vector2<f64>) -> Option<f32> {
        let (x, y) = (pixel.x.round(), pixel.y.round());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(self.get(x as u32, y as u32))
    }

    /// z-buffer write: keeps the nearer of the stored and the new depth.
    #[inline]
    pub fn write_min(&mut self, x: u32, y: u32, depth: f32) {
        let v = &mut self.values[y as usize * self.width as usize + x as usize];
        if depth < *v {
            *v = depth;
        }
    }

    pub fn is_sentinel(v: f32) -> bool {
        v == NO_DEPTH
    }

    /// Checks that this map was rendered for `frame`.
    pub fn check_matches(&self, frame: &CameraFrame) -> Result<(), SceneError> {
        let k = &frame.intrinsics;
        if self.width != k.width || self.height != k.height || self.frame_index != frame.frame_index {
            return Err(SceneError::InvalidArgument(format!(
                "depth map {}x{} #{} does not match frame {}x{} #{}",
                self.width, self.height, self.frame_index, k.width, k.height, frame.frame_index
            )));
        }
        Ok(())
    }
}

/// Renders the ground plane analytically, then splats each visible cloud
/// point as a disc of `splat_radius` pixels, keeping the nearest depth.
pub fn render_depth_map(cloud: &PointCloud, plane: &GroundPlane, frame: &CameraFrame, splat_radius: f64) -> Result<DepthMap, SceneError> {
    if !(splat_radius >= 0.0) {
        return Err(SceneError::InvalidArgument(format!("splat_radius {splat_radius} must be >= 0")));
    }
    let k = &frame.intrinsics;
    let mut map = DepthMap::empty(k.width, k.height, frame.frame_index);
    if let Ok(plane_c) = frame.plane_in_camera(plane) {
        for y in 0..k.height {
            for x in 0..k.width {
                if let Ok(d) = plane_depth_at_pixel(Vector2::new(x as f64, y as f64), k, &plane_c) {
                    map.values[y as usize * k.width as usize + x as usize] = d as f32;
                }
            }
        }
    }
    for p in &cloud.points {
        if let Ok((px, depth)) = frame.project(p) {
            splat(&mut map, px, depth as f32, splat_radius);
        }
    }
    Ok(map)
}

fn splat(map: &mut DepthMap, center: Vector2<f64>, depth: f32, radius: f64) {
    let r2 = radius * radius;
    let x0 = (center.x - radius).ceil().max(0.0);
    let x1 = (center.x + radius).floor().min(map.width as f64 - 1.0);
    let y0 = (center.y - radius).ceil().max(0.0);
    let y1 = (center.y + radius).floor().min(map.height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0 as u32..=y1 as u32 {
        let dy = y as f64 - center.y;
        for x in x0 as u32..=x1 as u32 {
            let dx = x as f64 - center.x;
            if dx * dx + dy * dy <= r2 {
                map.write_min(x, y, depth);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{look_down_rotation, Intrinsics, RigidTransform};
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn cam_at(center: Vector3<f64>) -> CameraFrame {
        let k = Intrinsics::centered(100.0, 64, 48).unwrap();
        let rot = look_down_rotation(0.0, std::f64::consts::FRAC_PI_2);
        CameraFrame::new(0, RigidTransform::new(rot, center).unwrap(), k)
    }

    #[test]
    fn near_camera_threshold() {
        let cloud = PointCloud::new(vec![Vector3::new(0.5, 0.0, 0.0), Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 3.0, 0.0)]).unwrap();
        let frames = [cam_at(Vector3::zeros())];
        let out = remove_near_camera_points(&cloud, &frames, 1.0).unwrap();
        assert_eq!(out.points, cloud.points[1..].to_vec());
        assert_eq!(remove_near_camera_points(&cloud, &frames, 0.0).unwrap(), cloud);
        assert!(remove_near_camera_points(&cloud, &[], 1.0).is_err());
    }

    #[test]
    fn equal_spacing_has_no_outliers() {
        // equally spaced ring: every point sees the same neighborhood
        let ring: Vec<_> = (0..60)
            .map(|i| {
                let a = i as f64 / 60.0 * std::f64::consts::TAU;
                Vector3::new(10.0 * a.cos(), 10.0 * a.sin(), 0.0)
            })
            .collect();
        let (kept, mask) = remove_statistical_outliers(&PointCloud::new(ring).unwrap(), 10, 1.0).unwrap();
        assert_eq!(kept.len(), 60);
        assert!(mask.iter().all(|m| !m));
    }

    #[test]
    fn too_few_points_for_neighborhood() {
        let cloud = PointCloud::new(vec![Vector3::zeros(); 10]).unwrap();
        assert_eq!(
            remove_statistical_outliers(&cloud, 10, 1.0).unwrap_err(),
            SceneError::InsufficientPoints { n: 10, k: 10 }
        );
    }

    #[test]
    fn far_point_is_the_only_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts: Vec<_> = (0..200)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        pts.push(Vector3::new(100.0, 0.0, 0.0));
        let (kept, mask) = remove_statistical_outliers(&PointCloud::new(pts).unwrap(), 10, 1.0).unwrap();
        assert_eq!(mask.iter().filter(|m| **m).count(), 1);
        assert!(mask[200]);
        assert_eq!(kept.len(), 200);
    }

    #[test]
    fn absolute_band_is_in_scene_units() {
        let mut pts: Vec<_> = (0..30).map(|i| Vector3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        pts.push(Vector3::new(50.0, 0.0, 0.0));
        let cloud = PointCloud::new(pts).unwrap();
        let (_, wide) = remove_statistical_outliers_with(&cloud, 3, 1000.0, OutlierBand::Absolute).unwrap();
        assert!(wide.iter().all(|m| !m));
        let (_, tight) = remove_statistical_outliers_with(&cloud, 3, 1.0, OutlierBand::Absolute).unwrap();
        assert!(tight[30]);
    }

    #[test]
    fn coplanar_points_fit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plane = GroundPlane::new(Vector3::new(0.1, 0.3, 1.0), 2.0).unwrap();
        let pts: Vec<_> = (0..100)
            .map(|_| plane.lift(Vector2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))))
            .collect();
        let fit = estimate_ground_plane(&PointCloud::new(pts.clone()).unwrap(), 0.01, 200, 3).unwrap();
        assert_eq!(fit.inlier_count, 100);
        for p in &pts {
            assert!(fit.signed_distance(p).abs() < 1e-9);
        }
    }

    #[test]
    fn majority_plane_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = Vec::new();
        for i in 0..100 {
            let z = if i < 70 { 0.0 } else { 3.0 };
            pts.push(Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), z));
        }
        let fit = estimate_ground_plane(&PointCloud::new(pts).unwrap(), 0.05, 300, 9).unwrap();
        assert_eq!(fit.inlier_count, 70);
        assert!(fit.offset.abs() < 1e-9);
        assert!((fit.normal.z.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(
            estimate_ground_plane(&PointCloud::new(pts).unwrap(), 0.1, 50, 0).unwrap_err(),
            SceneError::DegenerateGeometry
        );
    }

    #[test]
    fn ransac_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pts: Vec<_> = (0..300)
            .map(|_| Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), noise.sample(&mut rng)))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let a = estimate_ground_plane(&cloud, 0.1, 100, 42).unwrap();
        let b = estimate_ground_plane(&cloud, 0.1, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orientation_follows_cameras() {
        let down = GroundPlane { normal: -Vector3::z(), offset: 0.0, inlier_count: 0 };
        let frames = [cam_at(Vector3::new(0.0, 0.0, 10.0)), cam_at(Vector3::new(3.0, 0.0, 12.0))];
        let up = orient_towards_cameras(down, &frames);
        assert_eq!(up.normal, Vector3::z());
    }

    #[test]
    fn below_ground_filter() {
        let plane = GroundPlane::horizontal(0.0);
        let cloud = PointCloud::new(vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, -1.0), Vector3::new(1.0, 1.0, 2.0)]).unwrap();
        assert_eq!(discard_below_ground(&cloud, &plane, 0.1).len(), 2);
        let on_plane = PointCloud::new(vec![Vector3::new(4.0, 1.0, 0.0); 4]).unwrap();
        assert_eq!(discard_below_ground(&on_plane, &plane, 0.0).len(), 4);
    }

    #[test]
    fn plane_only_depth_map() {
        let frame = cam_at(Vector3::new(1.0, 2.0, 10.0));
        let map = render_depth_map(&PointCloud::default(), &GroundPlane::horizontal(0.0), &frame, 2.0).unwrap();
        assert!(map.values.iter().all(|v| (*v - 10.0).abs() < 1e-5));
        map.check_matches(&frame).unwrap();
    }

    #[test]
    fn point_overwrites_plane_when_nearer() {
        let frame = cam_at(Vector3::new(0.0, 0.0, 10.0));
        let p = Vector3::new(0.5, -0.3, 4.0);
        let cloud = PointCloud::new(vec![p]).unwrap();
        let map = render_depth_map(&cloud, &GroundPlane::horizontal(0.0), &frame, 1.5).unwrap();
        let (px, d) = frame.project(&p).unwrap();
        let v = map.at_pixel(px).unwrap();
        assert_eq!(v, d as f32);
        assert!(v < 10.0);
    }

    #[test]
    fn invalid_splat_radius() {
        let frame = cam_at(Vector3::new(0.0, 0.0, 10.0));
        assert!(render_depth_map(&PointCloud::default(), &GroundPlane::horizontal(0.0), &frame, -1.0).is_err());
    }
}
