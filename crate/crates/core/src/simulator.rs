//! Deterministic synthetic worlds: a flat ground, a target moving with
//! piecewise-constant velocity, optional distractors, box-shaped occluders
//! and a downward-looking camera at 10 to 30 units of altitude.
//!
//! Everything here is a pure function of the configuration and the seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{frame_seed, Bump, FrameTruth, SyntheticParams, SyntheticProvider};
use crate::evaluation::{metric_curve_with, EvalError, FmaxEntry, PrecisionMode, RecordFrame, SequenceReport, TrackRecord};
use crate::geometry::{look_down_rotation, BoundingBox, CameraFrame, GeometryError, GroundPlane, Intrinsics, RigidTransform};
use crate::particle_filter::ObjectState;
use crate::scene::{render_depth_map, PointCloud, SceneError, DEFAULT_SPLAT_RADIUS};
use crate::tracker::{initialize, step, FrameContext, TrackError, TrackerConfig, Variant};

pub const DEFAULT_OBJECT_EXTENT: f64 = 1.5;
const MAX_ATTEMPTS: usize = 200;
const CANOPY_THICKNESS: f64 = 0.5;
const SHADOW_MARGIN: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario configuration: {0}")]
    InvalidArgument(String),
    #[error("no feasible scenario after {0} attempts")]
    Infeasible(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Axis-aligned box in scene units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn enclosing(points: &[Vector3<f64>]) -> Option<Self> {
        let first = *points.first()?;
        let (min, max) = points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self { min: self.min.add_scalar(-margin), max: self.max.add_scalar(margin) }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }

    /// First parameter `t ∈ [0, t_max]` at which `origin + t·dir` is inside.
    pub fn ray_entry(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, t_max);
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut a, mut b) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    /// Whether the open segment `a → b` passes through the box.
    pub fn blocks_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        let dir = b - a;
        match self.ray_entry(a, &dir, 1.0) {
            Some(t) => t < 1.0 - 1e-12,
            None => false,
        }
    }
}

/// A box occluder, present either always or during a frame window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub bounds: Aabb,
    /// Inclusive frame window; `None` for permanent structures.
    pub active: Option<(u32, u32)>,
}

impl Occluder {
    pub fn is_active(&self, frame: u32) -> bool {
        self.active.is_none_or(|(s, e)| (s..=e).contains(&frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CameraMotion {
    /// Hovering, except for the maneuver velocity.
    Static,
    /// Moves with the target's initial velocity plus the maneuver velocity.
    #[default]
    Follow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_frames: u32,
    pub altitude_range: (f64, f64),
    pub pitch_range_deg: (f64, f64),
    /// Target speed in scene units per frame.
    pub object_speed_range: (f64, f64),
    pub object_extent: f64,
    pub stop_and_go: bool,
    pub n_distractors: u32,
    pub distractor_gain: f64,
    /// Closest approach of a distractor to the target.
    pub distractor_distance_range: (f64, f64),
    pub distractor_speed_range: (f64, f64),
    /// Frames at which distractors pass closest to the target.
    pub distractor_frame_range: (u32, u32),
    /// Inclusive frame windows of full occlusion.
    pub occlusion_windows: Vec<(u32, u32)>,
    pub camera_motion: CameraMotion,
    /// Extra camera translation per frame during occlusion windows (from
    /// frame 0 without one).
    pub camera_speed: f64,
    /// Keep the extra translation after the first window ends.
    pub camera_maneuver_persists: bool,
    /// Smallest speed of a distractor relative to the target.
    pub distractor_min_relative_speed: f64,
    pub canopy_height_range: (f64, f64),
    pub image_width: u32,
    pub image_height: u32,
    pub focal: f64,
    pub cloud_spacing: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_frames: 50,
            altitude_range: (10.0, 30.0),
            pitch_range_deg: (45.0, 90.0),
            object_speed_range: (0.3, 0.5),
            object_extent: DEFAULT_OBJECT_EXTENT,
            stop_and_go: false,
            n_distractors: 0,
            distractor_gain: 1.2,
            distractor_distance_range: (2.5, 3.5),
            distractor_speed_range: (0.3, 0.5),
            distractor_frame_range: (6, 10),
            occlusion_windows: Vec::new(),
            camera_motion: CameraMotion::Follow,
            camera_speed: 0.0,
            camera_maneuver_persists: false,
            distractor_min_relative_speed: 0.5,
            canopy_height_range: (2.5, 3.5),
            image_width: 480,
            image_height: 360,
            focal: 480.0,
            cloud_spacing: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidArgument(m));
        if self.n_frames < 2 {
            return bad(format!("n_frames {} must be at least 2", self.n_frames));
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.altitude_range) || self.altitude_range.0 <= 0.0 {
            return bad(format!("altitude range {:?}", self.altitude_range));
        }
        if !ordered(self.pitch_range_deg) || self.pitch_range_deg.0 <= 0.0 || self.pitch_range_deg.1 > 90.0 {
            return bad(format!("pitch range {:?} must lie in (0, 90] degrees", self.pitch_range_deg));
        }
        if !ordered(self.object_speed_range) || self.object_speed_range.0 < 0.0 {
            return bad(format!("object speed range {:?}", self.object_speed_range));
        }
        if !ordered(self.distractor_distance_range) || !ordered(self.distractor_speed_range) {
            return bad("distractor ranges must be ordered".into());
        }
        let fastest = self.distractor_speed_range.1 + self.object_speed_range.1;
        if self.n_distractors > 0 && self.distractor_min_relative_speed > fastest {
            return bad(format!("relative distractor speed {} is unreachable", self.distractor_min_relative_speed));
        }
        if !ordered(self.canopy_height_range) || self.canopy_height_range.0 <= 0.0 || self.canopy_height_range.1 + CANOPY_THICKNESS >= self.altitude_range.0 {
            return bad(format!("canopy heights {:?} must lie between the ground and the camera", self.canopy_height_range));
        }
        if !(self.object_extent > 0.0) || !(self.focal > 0.0) || !(self.cloud_spacing > 0.0) || self.camera_speed < 0.0 {
            return bad("object_extent, focal and cloud_spacing must be positive, camera_speed non-negative".into());
        }
        if self.n_distractors > 0 && (self.distractor_frame_range.0 > self.distractor_frame_range.1 || self.distractor_frame_range.1 >= self.n_frames) {
            return bad(format!("distractor frames {:?} outside the sequence", self.distractor_frame_range));
        }
        for &(s, e) in &self.occlusion_windows {
            if s == 0 || s > e || e >= self.n_frames {
                return bad(format!("occlusion window {s}-{e} does not fit frames 1..{}", self.n_frames));
            }
        }
        Ok(())
    }

    /// Configuration of one benchmark scenario: a 10 to 20 frame full
    /// occlusion, one distractor and a camera that changes course when the
    /// target disappears.
    pub fn benchmark(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(10..=20);
        let start = rng.random_range(16..=20);
        Self { occlusion_windows: vec![(start, start + len - 1)], n_distractors: 1, camera_speed: 0.25, seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plane: GroundPlane,
    pub object_trajectory: Vec<ObjectState>,
    pub distractor_trajectories: Vec<Vec<ObjectState>>,
    pub occluders: Vec<Occluder>,
    pub camera_path: Vec<CameraFrame>,
    pub cloud: PointCloud,
    pub n_frames: u32,
    pub seed: u64,
}

impl Scenario {
    pub fn active_occluders(&self, frame: u32) -> impl Iterator<Item = &Occluder> {
        self.occluders.iter().filter(move |o| o.is_active(frame))
    }

    /// Bounding diagonal of the reconstruction.
    pub fn scene_scale(&self) -> f64 {
        self.cloud.bounding_diagonal()
    }
}

/// Unit vector perpendicular to `v` in the ground plane (x if `v` is zero).
fn perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let p = Vector3::new(-v.y, v.x, 0.0);
    let n = p.norm();
    if n > 1e-12 { p / n } else { Vector3::x() }
}

fn unit_xy(angle: f64) -> Vector3<f64> {
    Vector3::new(angle.cos(), angle.sin(), 0.0)
}

/// 3 × 3 sample grid over a square footprint centered at `center`.
pub fn footprint_samples(center: &Vector3<f64>, extent: f64) -> [Vector3<f64>; 9] {
    let h = 0.5 * extent;
    let mut out = [Vector3::zeros(); 9];
    for (k, (i, j)) in (-1..=1).flat_map(|i| (-1..=1).map(move |j| (i, j))).enumerate() {
        out[k] = center + Vector3::new(i as f64 * h, j as f64 * h, 0.0);
    }
    out
}

pub fn footprint_corners(center: &Vector3<f64>, extent: f64) -> [Vector3<f64>; 4] {
    let h = 0.5 * extent;
    [
        center + Vector3::new(-h, -h, 0.0),
        center + Vector3::new(h, -h, 0.0),
        center + Vector3::new(h, h, 0.0),
        center + Vector3::new(-h, h, 0.0),
    ]
}

fn object_path(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<ObjectState> {
    let plane = GroundPlane::horizontal(0.0);
    let speed = rng.random_range(cfg.object_speed_range.0..=cfg.object_speed_range.1);
    let dir = unit_xy(rng.random_range(0.0..std::f64::consts::TAU));
    let n = cfg.n_frames as usize;
    let mut velocities = vec![dir * speed; n];
    if cfg.stop_and_go {
        let mut t = 0;
        let mut moving = true;
        while t < n {
            let len = rng.random_range(8..=15);
            if !moving {
                for v in velocities.iter_mut().skip(t).take(len) {
                    *v = Vector3::zeros();
                }
            }
            moving = !moving;
            t += len;
        }
    }
    let mut p = Vector3::zeros();
    velocities
        .iter()
        .map(|v| {
            let s = ObjectState::on_plane(p, *v, &plane);
            p += v;
            s
        })
        .collect()
}

fn camera_path(cfg: &ScenarioConfig, object: &[ObjectState], rng: &mut ChaCha8Rng) -> Result<Vec<CameraFrame>, SimError> {
    let altitude = rng.random_range(cfg.altitude_range.0..=cfg.altitude_range.1);
    let pitch = rng.random_range(cfg.pitch_range_deg.0..=cfg.pitch_range_deg.1).to_radians();
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let rotation = look_down_rotation(heading, pitch);
    let k = Intrinsics::centered(cfg.focal, cfg.image_width, cfg.image_height)?;
    let forward = rotation.column(2).into_owned();

    let (look_at, follow) = match cfg.camera_motion {
        CameraMotion::Follow => (object[0].position, object[0].velocity),
        CameraMotion::Static => {
            let mean = object.iter().map(|s| s.position).sum::<Vector3<f64>>() / object.len() as f64;
            (mean, Vector3::zeros())
        }
    };
    let maneuver = perpendicular(&object[0].velocity) * (sign * cfg.camera_speed);
    let maneuvering = |t: u32| {
        if cfg.occlusion_windows.is_empty() {
            return true;
        }
        cfg.occlusion_windows.iter().any(|&(s, e)| t >= s && (t <= e || cfg.camera_maneuver_persists))
    };
    let mut center = look_at - forward * (altitude / pitch.sin());
    let mut frames = Vec::with_capacity(object.len());
    for t in 0..cfg.n_frames {
        frames.push(CameraFrame::new(t, RigidTransform::new(rotation, center)?, k));
        center += follow;
        if maneuvering(t + 1) {
            center += maneuver;
        }
    }
    Ok(frames)
}

fn distractor_path(cfg: &ScenarioConfig, object: &[ObjectState], rng: &mut ChaCha8Rng) -> Vec<ObjectState> {
    let plane = GroundPlane::horizontal(0.0);
    let tc = rng.random_range(cfg.distractor_frame_range.0..=cfg.distractor_frame_range.1) as usize;
    let distance = rng.random_range(cfg.distractor_distance_range.0..=cfg.distractor_distance_range.1);
    let v_obj = object[tc].velocity;
    let fastest = cfg.distractor_speed_range.1;
    let mut w = if v_obj.norm() > 0.0 { -v_obj.normalize() * fastest } else { Vector3::x() * fastest };
    for _ in 0..1000 {
        let speed = rng.random_range(cfg.distractor_speed_range.0..=cfg.distractor_speed_range.1);
        let candidate = unit_xy(rng.random_range(0.0..std::f64::consts::TAU)) * speed;
        // must pass by rather than travel alongside
        if (candidate - v_obj).norm() >= cfg.distractor_min_relative_speed {
            w = candidate;
            break;
        }
    }
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let anchor = object[tc].position + perpendicular(&(w - v_obj)) * (side * distance);
    (0..object.len()).map(|t| ObjectState::on_plane(anchor + w * (t as f64 - tc as f64), w, &plane)).collect()
}

/// Box covering every footprint ray between `heights` for frames `s..=e`.
fn shadow_occluder(object: &[ObjectState], cameras: &[CameraFrame], extent: f64, window: (u32, u32), bottom: f64, permanent: bool) -> Occluder {
    let top = bottom + CANOPY_THICKNESS;
    let mut pts = Vec::new();
    for t in window.0..=window.1 {
        let c = cameras[t as usize].center();
        for g in footprint_samples(&object[t as usize].position, extent) {
            for h in [bottom, top] {
                pts.push(g + (c - g) * (h / c.z));
            }
        }
    }
    let mut bounds = Aabb::enclosing(&pts).expect("non-empty window").expanded(SHADOW_MARGIN);
    bounds.min.z = bottom;
    bounds.max.z = top;
    Occluder { bounds, active: if permanent { None } else { Some(window) } }
}

fn sample_cloud(cfg: &ScenarioConfig, object: &[ObjectState], cameras: &[CameraFrame], occluders: &[Occluder], rng: &mut ChaCha8Rng) -> PointCloud {
    let mut anchor: Vec<Vector3<f64>> = object.iter().map(|s| s.position).collect();
    anchor.extend(cameras.iter().map(|c| Vector3::new(c.center().x, c.center().y, 0.0)));
    let bounds = Aabb::enclosing(&anchor).expect("non-empty path").expanded(15.0);
    let step = cfg.cloud_spacing;
    let jitter = 0.3 * step;
    let mut points = Vec::new();
    let mut x = bounds.min.x;
    while x <= bounds.max.x {
        let mut y = bounds.min.y;
        while y <= bounds.max.y {
            points.push(Vector3::new(x + rng.random_range(-jitter..=jitter), y + rng.random_range(-jitter..=jitter), 0.0));
            y += step;
        }
        x += step;
    }
    for o in occluders.iter().filter(|o| o.active.is_none()) {
        let b = &o.bounds;
        let ds = 0.25;
        let nx = ((b.max.x - b.min.x) / ds).ceil() as usize;
        let ny = ((b.max.y - b.min.y) / ds).ceil() as usize;
        for i in 0..=nx {
            for j in 0..=ny {
                let px = b.min.x + (b.max.x - b.min.x) * i as f64 / nx.max(1) as f64;
                let py = b.min.y + (b.max.y - b.min.y) * j as f64 / ny.max(1) as f64;
                points.push(Vector3::new(px, py, b.max.z));
                if i == 0 || j == 0 || i == nx || j == ny {
                    points.push(Vector3::new(px, py, b.min.z));
                }
            }
        }
    }
    PointCloud { points, colors: None }
}

fn in_view(frame: &CameraFrame, p: &Vector3<f64>, margin: f64) -> bool {
    match frame.project(p) {
        Ok((px, _)) => {
            let k = &frame.intrinsics;
            px.x >= margin && px.y >= margin && px.x <= k.width as f64 - 1.0 - margin && px.y <= k.height as f64 - 1.0 - margin
        }
        Err(_) => false,
    }
}

/// Builds a scenario. The seed in `cfg` is ignored in favor of `seed`.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = GroundPlane::horizontal(0.0);
    for _ in 0..MAX_ATTEMPTS {
        let object = object_path(cfg, &mut rng);
        let cameras = camera_path(cfg, &object, &mut rng)?;
        let distractors: Vec<Vec<ObjectState>> = (0..cfg.n_distractors).map(|_| distractor_path(cfg, &object, &mut rng)).collect();
        let occluders: Vec<Occluder> = cfg
            .occlusion_windows
            .iter()
            .map(|&w| {
                let bottom = rng.random_range(cfg.canopy_height_range.0..=cfg.canopy_height_range.1);
                let moved = (object[w.1 as usize].position - object[w.0 as usize].position).norm() > 1e-9;
                shadow_occluder(&object, &cameras, cfg.object_extent, w, bottom, moved)
            })
            .collect();
        let cloud = sample_cloud(cfg, &object, &cameras, &occluders, &mut rng);
        let scenario = Scenario {
            config: ScenarioConfig { seed, ..cfg.clone() },
            plane,
            object_trajectory: object,
            distractor_trajectories: distractors,
            occluders,
            camera_path: cameras,
            cloud,
            n_frames: cfg.n_frames,
            seed,
        };
        if feasible(&scenario) {
            return Ok(scenario);
        }
    }
    Err(SimError::Infeasible(MAX_ATTEMPTS))
}

fn feasible(s: &Scenario) -> bool {
    let extent = s.config.object_extent;
    let in_frame = s.object_trajectory.iter().zip(&s.camera_path).all(|(o, c)| footprint_corners(&o.position, extent).iter().all(|p| in_view(c, p, 2.0)));
    in_frame && visible_fraction(s, 0, &s.object_trajectory[0].position) == 1.0
}

/// Share of the footprint samples with a clear line of sight.
pub fn visible_fraction(s: &Scenario, frame: u32, center: &Vector3<f64>) -> f64 {
    let c = s.camera_path[frame as usize].center();
    let samples = footprint_samples(center, s.config.object_extent);
    let clear = samples.iter().filter(|g| !s.active_occluders(frame).any(|o| o.bounds.blocks_segment(&c, g))).count();
    clear as f64 / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    /// `G_t`; absent when hidden beyond the visibility cutoff.
    pub bbox: Option<BoundingBox>,
    /// Projected footprint regardless of occlusion.
    pub amodal_box: Option<BoundingBox>,
    pub occluded: bool,
    pub visible_fraction: f64,
    pub state: ObjectState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frames: Vec<GroundTruthFrame>,
}

impl GroundTruth {
    pub fn boxes(&self) -> Vec<Option<BoundingBox>> {
        self.frames.iter().map(|f| f.bbox).collect()
    }
}

pub fn render_ground_truth(s: &Scenario, object_extent: f64) -> Result<GroundTruth, SimError> {
    render_ground_truth_with(s, object_extent, 1.0)
}

/// Ground truth with `G_t` dropped whenever the visible fraction is below
/// `cutoff`.
pub fn render_ground_truth_with(s: &Scenario, object_extent: f64, cutoff: f64) -> Result<GroundTruth, SimError> {
    if !(object_extent > 0.0) {
        return Err(SimError::InvalidArgument(format!("object extent {object_extent} must be > 0")));
    }
    let mut scenario_view = s.clone();
    scenario_view.config.object_extent = object_extent;
    let frames = s
        .object_trajectory
        .iter()
        .zip(&s.camera_path)
        .map(|(o, cam)| {
            let corners: Option<Vec<Vector2<f64>>> = footprint_corners(&o.position, object_extent).iter().map(|p| cam.project(p).ok().map(|(px, _)| px)).collect();
            let amodal_box = corners.and_then(BoundingBox::enclosing);
            let vf = visible_fraction(&scenario_view, cam.frame_index, &o.position);
            GroundTruthFrame {
                bbox: amodal_box.filter(|_| vf >= cutoff),
                amodal_box,
                occluded: vf < 1.0,
                visible_fraction: vf,
                state: *o,
            }
        })
        .collect();
    Ok(GroundTruth { frames })
}

/// Camera-z depth of the first occluder surface along every pixel ray,
/// merged into `map`.
fn splat_occluders<'a>(map: &mut crate::scene::DepthMap, frame: &CameraFrame, occluders: impl Iterator<Item = &'a Occluder>) {
    let k = &frame.intrinsics;
    let r = frame.world_from_camera.rotation();
    let origin = frame.center();
    for o in occluders {
        let projected: Option<Vec<Vector2<f64>>> = o.bounds.corners().iter().map(|c| frame.project(c).ok().map(|(px, _)| px)).collect();
        let (x0, y0, x1, y1) = match projected.and_then(BoundingBox::enclosing) {
            Some(b) => (
                b.x.floor().max(0.0) as u32,
                b.y.floor().max(0.0) as u32,
                (b.right().ceil().max(0.0) as u32).min(k.width - 1),
                (b.bottom().ceil().max(0.0) as u32).min(k.height - 1),
            ),
            None => (0, 0, k.width - 1, k.height - 1),
        };
        if x0 >= k.width || y0 >= k.height {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dir = r * k.ray(Vector2::new(x as f64, y as f64));
                if let Some(t) = o.bounds.ray_entry(&origin, &dir, f64::INFINITY) {
                    map.write_min(x, y, t as f32);
                }
            }
        }
    }
}

/// Depth map and geometry for one frame of a scenario.
pub fn frame_context(s: &Scenario, frame: u32) -> Result<FrameContext, SimError> {
    let cam = s.camera_path[frame as usize];
    let mut depth = render_depth_map(&s.cloud, &s.plane, &cam, DEFAULT_SPLAT_RADIUS)?;
    splat_occluders(&mut depth, &cam, s.active_occluders(frame));
    Ok(FrameContext::new(cam, depth, s.plane)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub tracker: TrackerConfig,
    pub provider: SyntheticParams,
    pub visible_cutoff: f64,
    pub precision: PrecisionMode,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { tracker: TrackerConfig::default(), provider: SyntheticParams::default(), visible_cutoff: 1.0, precision: PrecisionMode::default() }
    }
}

/// Per-scenario data shared by every run and variant.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub contexts: Vec<FrameContext>,
    pub truth: Vec<FrameTruth>,
    pub ground_truth: GroundTruth,
    pub scene_scale: f64,
}

pub fn prepare_scenario(s: &Scenario, cfg: &EpisodeConfig) -> Result<PreparedScenario, SimError> {
    let ground_truth = render_ground_truth_with(s, s.config.object_extent, cfg.visible_cutoff)?;
    let contexts = (0..s.n_frames).map(|t| frame_context(s, t)).collect::<Result<Vec<_>, _>>()?;
    let mut last_box = ground_truth.frames[0].amodal_box.unwrap_or_default();
    let truth = ground_truth
        .frames
        .iter()
        .enumerate()
        .map(|(t, g)| {
            let cam = &s.camera_path[t];
            last_box = g.amodal_box.unwrap_or(last_box);
            let distractors = s
                .distractor_trajectories
                .iter()
                .filter_map(|d| cam.project(&d[t].position).ok())
                .map(|(pixel, _)| Bump { pixel, gain: s.config.distractor_gain })
                .collect();
            FrameTruth {
                object_pixel: cam.project(&g.state.position).ok().map(|(px, _)| px),
                object_box: last_box,
                occluded_fraction: 1.0 - g.visible_fraction,
                distractors,
            }
        })
        .collect();
    Ok(PreparedScenario { contexts, truth, ground_truth, scene_scale: s.scene_scale() })
}

fn run_seed(scenario_seed: u64, seed: u64) -> u64 {
    frame_seed(scenario_seed ^ seed.rotate_left(29), 0x5ce7)
}

/// Full output of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub record: TrackRecord,
    pub outputs: Vec<crate::tracker::TrackOutput>,
}

/// Drives `variant` over a prepared scenario from the frame-0 ground truth.
pub fn run_prepared(p: &PreparedScenario, variant: Variant, cfg: &EpisodeConfig, scenario_seed: u64, seed: u64, object_id: u32) -> Result<Episode, SimError> {
    let rs = run_seed(scenario_seed, seed);
    let provider = SyntheticProvider::new(p.truth.clone(), cfg.provider, rs);
    let tracker_cfg = TrackerConfig { seed: rs, ..cfg.tracker.clone() };
    let first = p.ground_truth.frames[0].amodal_box.ok_or(SimError::InvalidArgument("target not visible in frame 0".into()))?;
    let mut state = initialize(&first, &p.contexts[0], &tracker_cfg, variant)?;
    let mut record = TrackRecord::new(format!("scenario-{scenario_seed}"), object_id, seed as u32);
    record.push(RecordFrame { frame: 0, bbox: Some(first), confidence: 1.0, occluded: false, position: Some(state.estimate.position) })?;
    let mut outputs = Vec::with_capacity(p.contexts.len());
    for ctx in &p.contexts[1..] {
        let (next, out) = step(&state, ctx, &provider)?;
        record.push(RecordFrame { frame: out.frame_index, bbox: out.bbox, confidence: out.confidence.clamp(0.0, 1.0), occluded: out.occluded, position: Some(out.state_3d.position) })?;
        outputs.push(out);
        state = next;
    }
    Ok(Episode { record, outputs })
}

pub fn run_episode(s: &Scenario, variant: Variant, cfg: &EpisodeConfig, seed: u64) -> Result<TrackRecord, SimError> {
    let p = prepare_scenario(s, cfg)?;
    Ok(run_prepared(&p, variant, cfg, s.seed, seed, 0)?.record)
}

#[derive(Clone)]
pub struct SuiteConfig {
    pub scenarios: usize,
    pub runs: u32,
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub episode: EpisodeConfig,
    /// Per-scenario configuration; [`ScenarioConfig::benchmark`] by default.
    pub scenario: Arc<dyn Fn(u64) -> ScenarioConfig + Send + Sync>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { scenarios: 50, runs: 5, seed: 0, variants: Variant::ALL.to_vec(), episode: EpisodeConfig::default(), scenario: Arc::new(ScenarioConfig::benchmark) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub seed: u64,
    pub scenarios: usize,
    pub runs: u32,
    /// Keyed by variant name.
    pub variants: BTreeMap<String, SequenceReport>,
}

impl SuiteResult {
    pub fn report(&self, v: Variant) -> Option<&SequenceReport> {
        self.variants.get(v.name())
    }
}

/// Seed of the `i`-th suite scenario.
pub fn suite_scenario_seed(base: u64, index: usize) -> u64 {
    frame_seed(base, index as u32)
}

/// Runs every variant `runs` times on each generated scenario; scenario `i`
/// is object `i` of the suite.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult, SimError> {
    let per_scenario: Vec<Vec<(Variant, FmaxEntry)>> = (0..cfg.scenarios)
        .into_par_iter()
        .map(|i| {
            let seed = suite_scenario_seed(cfg.seed, i);
            let scenario = generate_scenario(&(cfg.scenario)(seed), seed)?;
            let prepared = prepare_scenario(&scenario, &cfg.episode)?;
            let truth = prepared.ground_truth.boxes();
            let mut out = Vec::new();
            for &v in &cfg.variants {
                for run in 0..cfg.runs {
                    let ep = run_prepared(&prepared, v, &cfg.episode, seed, run as u64, i as u32)?;
                    let curve = metric_curve_with(&ep.record, &truth, cfg.episode.precision)?;
                    out.push((v, FmaxEntry { object: i as u32, run, f_max: curve.f_max }));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, SimError>>()?;
    let mut variants = BTreeMap::new();
    for &v in &cfg.variants {
        let entries: Vec<FmaxEntry> = per_scenario.iter().flatten().filter(|(w, _)| *w == v).map(|(_, e)| *e).collect();
        variants.insert(v.name().to_string(), SequenceReport::from_entries(format!("suite-{}", v.name()), &entries)?);
    }
    Ok(SuiteResult { seed: cfg.seed, scenarios: cfg.scenarios, runs: cfg.runs, variants })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn null_config() -> ScenarioConfig {
        ScenarioConfig { n_frames: 20, object_speed_range: (0.1, 0.2), camera_motion: CameraMotion::Static, ..ScenarioConfig::default() }
    }

    #[test]
    fn null_scenario_is_never_occluded() {
        let s = generate_scenario(&null_config(), 3).unwrap();
        let gt = render_ground_truth(&s, DEFAULT_OBJECT_EXTENT).unwrap();
        assert!(gt.frames.iter().all(|f| f.visible_fraction == 1.0 && f.bbox.is_some() && !f.occluded));
        let c0 = s.camera_path[0].center();
        assert!(s.camera_path.iter().all(|c| c.center() == c0));
        for (f, cam) in gt.frames.iter().zip(&s.camera_path) {
            let (px, _) = cam.project(&f.state.position).unwrap();
            assert!(f.bbox.unwrap().contains(px));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::benchmark(7);
        assert_eq!(generate_scenario(&cfg, 7).unwrap(), generate_scenario(&cfg, 7).unwrap());
        assert_ne!(generate_scenario(&cfg, 7).unwrap(), generate_scenario(&cfg, 8).unwrap());
    }

    #[test]
    fn occlusion_window_is_fully_hidden() {
        let cfg = ScenarioConfig { occlusion_windows: vec![(10, 20)], ..ScenarioConfig::default() };
        let s = generate_scenario(&cfg, 1).unwrap();
        let gt = render_ground_truth(&s, DEFAULT_OBJECT_EXTENT).unwrap();
        for t in 10..=20 {
            assert_eq!(gt.frames[t].visible_fraction, 0.0, "frame {t}");
            assert!(gt.frames[t].bbox.is_none());
        }
        assert_eq!(gt.frames[0].visible_fraction, 1.0);
        // brute-force ray oracle agrees on every frame
        for (t, f) in gt.frames.iter().enumerate() {
            let c = s.camera_path[t].center();
            let clear = footprint_samples(&f.state.position, DEFAULT_OBJECT_EXTENT)
                .iter()
                .filter(|g| {
                    (1..2000).all(|k| {
                        let p = c + (*g - c) * (k as f64 / 2000.0);
                        s.active_occluders(t as u32).all(|o| !o.bounds.contains(&p))
                    })
                })
                .count();
            assert!((f.visible_fraction - clear as f64 / 9.0).abs() < 1e-12, "frame {t}");
        }
    }

    #[test]
    fn window_past_sequence_end_is_rejected() {
        let cfg = ScenarioConfig { n_frames: 10, occlusion_windows: vec![(5, 12)], ..ScenarioConfig::default() };
        assert!(matches!(generate_scenario(&cfg, 0), Err(SimError::InvalidArgument(_))));
    }

    #[test]
    fn half_covering_wall_hides_a_grid_share() {
        let s0 = generate_scenario(&ScenarioConfig { camera_motion: CameraMotion::Static, object_speed_range: (0.0, 0.0), pitch_range_deg: (90.0, 90.0), n_frames: 3, ..ScenarioConfig::default() }, 2).unwrap();
        let mut s = s0.clone();
        let p = s.object_trajectory[1].position;
        // wall over x ≥ p.x − 0.1 covers the middle and right sample columns
        s.occluders = vec![Occluder { bounds: Aabb { min: Vector3::new(p.x - 0.1, p.y - 5.0, 0.5), max: Vector3::new(p.x + 5.0, p.y + 5.0, 1.0) }, active: Some((1, 1)) }];
        let gt = render_ground_truth(&s, DEFAULT_OBJECT_EXTENT).unwrap();
        let f = gt.frames[1].visible_fraction;
        assert!(f == 3.0 / 9.0 || f == 4.0 / 9.0 || f == 5.0 / 9.0, "{f}");
        assert!(gt.frames[1].occluded && gt.frames[1].bbox.is_none());
        assert_eq!(gt.frames[0].visible_fraction, 1.0);
    }

    #[test]
    fn depth_maps_see_occluders_before_the_target() {
        let cfg = ScenarioConfig { occlusion_windows: vec![(10, 20)], ..ScenarioConfig::default() };
        let s = generate_scenario(&cfg, 4).unwrap();
        for t in [10u32, 15, 20] {
            let ctx = frame_context(&s, t).unwrap();
            let p = s.object_trajectory[t as usize].position;
            let (px, depth) = ctx.frame.project(&p).unwrap();
            let observed = ctx.depth_map.at_pixel(px).unwrap() as f64;
            assert!(observed < depth, "frame {t}: {observed} vs {depth}");
        }
    }

    #[test]
    fn ray_entry_matches_slab_oracle() {
        let b = Aabb { min: Vector3::new(-1.0, -1.0, -1.0), max: Vector3::new(1.0, 1.0, 1.0) };
        assert_eq!(b.ray_entry(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::x(), 10.0), Some(4.0));
        assert_eq!(b.ray_entry(&Vector3::new(-5.0, 3.0, 0.0), &Vector3::x(), 10.0), None);
        assert_eq!(b.ray_entry(&Vector3::zeros(), &Vector3::x(), 10.0), Some(0.0));
        assert!(!b.blocks_segment(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::new(-2.0, 0.0, 0.0)));
        assert!(b.blocks_segment(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::new(5.0, 0.0, 0.0)));
    }
}
