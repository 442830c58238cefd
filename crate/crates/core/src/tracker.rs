//! Detection-by-tracking on the ground plane.
//!
//! Each frame runs: search area → observation → particle prediction →
//! occluded-particle identification → occlusion verdict. A hidden object is
//! reported at its constant-velocity prediction; a visible one goes through
//! redistribution, score-map weighting, stratified resampling, image-space
//! clustering and selection of the cluster nearest the prediction.
//!
//! Two comparison variants share the same entry points: a filter living in
//! image coordinates (no depth, no ego-motion compensation) and the plain
//! argmax tracker.

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::appearance::{frame_seed, search_area_from_state, ObserveError, Observation, ScoreMapProvider, DEFAULT_SEARCH_SCALE};
use crate::geometry::{backproject_to_plane, BoundingBox, CameraFrame, GeometryError, GroundPlane};
use crate::particle_filter::{
    finite_difference_velocity, FilterError, ObjectState, ParticleSet, PlaneRegion, TransitionParams, DEFAULT_PARTICLES,
    DEFAULT_REDISTRIBUTION, DEFAULT_RESAMPLE_RATIO,
};
use crate::scene::{DepthMap, SceneError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("tracker initialization failed: {0}")]
    Init(GeometryError),
    #[error("end of sequence at frame {0}")]
    EndOfSequence(u32),
    #[error(transparent)]
    Observe(ObserveError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no particle cluster to select from")]
    NoCluster,
}

impl From<ObserveError> for TrackError {
    fn from(e: ObserveError) -> Self {
        match e {
            ObserveError::EndOfSequence(f) => TrackError::EndOfSequence(f),
            other => TrackError::Observe(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Argmax of the score map, no state estimator.
    MlBaseline,
    /// Particle filter in image coordinates.
    Filter2d,
    /// Particle filter on the ground plane with depth-based occlusion.
    Filter3d,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Filter3d, Variant::Filter2d, Variant::MlBaseline];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::MlBaseline => "ml",
            Variant::Filter2d => "2d",
            Variant::Filter3d => "3d",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ml" | "ml_baseline" | "baseline" => Ok(Variant::MlBaseline),
            "2d" | "filter_2d" => Ok(Variant::Filter2d),
            "3d" | "filter_3d" => Ok(Variant::Filter3d),
            other => Err(format!("unknown tracker variant `{other}` (expected ml, 2d or 3d)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which pixel of the initial box is backprojected onto the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    #[default]
    Center,
    BottomCenter,
}

impl Anchor {
    pub fn pixel(&self, b: &BoundingBox) -> Vector2<f64> {
        match self {
            Anchor::Center => b.center(),
            Anchor::BottomCenter => b.bottom_center(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub particles: usize,
    pub search_scale: f64,
    pub redistribution: f64,
    pub resample_ratio: f64,
    /// Relative depth discrepancy that marks a particle occluded.
    pub depth_tol: f64,
    /// Single-linkage radius as a share of the search area width.
    pub link_radius_rel: f64,
    pub flatness_ratio: f64,
    pub visibility_threshold: f64,
    pub reappear_threshold: f64,
    pub reappear_radius_rel: f64,
    /// Share of occluded object-cluster particles that hides the object.
    pub occluded_share: f64,
    /// Position noise as a share of the search area's extent.
    pub noise_pos_rel: f64,
    /// Velocity noise relative to position noise.
    pub noise_vel_ratio: f64,
    /// Particles lighter than this multiple of `1/n` are left out of clustering.
    pub cluster_weight_floor: f64,
    /// Number of recent visible estimates the velocity is fitted to.
    pub velocity_window: usize,
    /// Reset particle velocities to the fitted track velocity after every
    /// visible update, so velocity noise does not accumulate.
    pub anchor_particle_velocity: bool,
    /// Clusters lighter than this are not selected while heavier ones exist.
    pub min_cluster_weight: f64,
    pub anchor: Anchor,
    pub dt: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            particles: DEFAULT_PARTICLES,
            search_scale: DEFAULT_SEARCH_SCALE,
            redistribution: DEFAULT_REDISTRIBUTION,
            resample_ratio: DEFAULT_RESAMPLE_RATIO,
            depth_tol: 0.05,
            link_radius_rel: 0.15,
            flatness_ratio: 3.0,
            visibility_threshold: 0.25,
            reappear_threshold: 0.5,
            reappear_radius_rel: 0.2,
            occluded_share: 0.5,
            noise_pos_rel: 0.02,
            noise_vel_ratio: 0.5,
            cluster_weight_floor: 0.1,
            velocity_window: 8,
            anchor_particle_velocity: true,
            min_cluster_weight: 0.02,
            anchor: Anchor::Center,
            dt: 1.0,
            seed: 0,
        }
    }
}

/// Per-frame geometry shared by all trackers.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameContext {
    pub frame: CameraFrame,
    pub depth_map: DepthMap,
    pub plane: GroundPlane,
}

impl FrameContext {
    pub fn new(frame: CameraFrame, depth_map: DepthMap, plane: GroundPlane) -> Result<Self, SceneError> {
        depth_map.check_matches(&frame)?;
        Ok(Self { frame, depth_map, plane })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub frame_index: u32,
    pub bbox: Option<BoundingBox>,
    pub confidence: f64,
    pub occluded: bool,
    /// Scene-space state; for the image-space variants the output center
    /// backprojected onto the plane.
    pub state_3d: ObjectState,
    pub center: Vector2<f64>,
}

/// A connected group of particles in the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: ObjectState,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub variant: Variant,
    pub particles: ParticleSet,
    /// Current estimate. World coordinates for the ground-plane filter,
    /// pixel coordinates (z = 0) for the image-space filter.
    pub estimate: ObjectState,
    pub last_visible_state: ObjectState,
    pub last_box_size: (f64, f64),
    pub last_center: Vector2<f64>,
    pub occluded: bool,
    pub frames_occluded: u32,
    /// Particles forming the object cluster, carried to the next frame.
    pub object_members: Vec<usize>,
    pub transition: TransitionParams,
    /// Velocity has been set from the first two positions.
    pub velocity_initialized: bool,
    /// Recent visible estimates as `(frame, position)`, oldest first.
    pub history: Vec<(u32, Vector3<f64>)>,
    pub config: TrackerConfig,
}

/// Maps particle states to pixels and search areas to plane regions.
#[derive(Clone, Copy)]
enum Space<'a> {
    Ground { frame: &'a CameraFrame, plane: &'a GroundPlane },
    Image,
}

impl Space<'_> {
    fn of(variant: Variant, ctx: &FrameContext) -> Space<'_> {
        match variant {
            Variant::Filter3d => Space::Ground { frame: &ctx.frame, plane: &ctx.plane },
            _ => Space::Image,
        }
    }

    #[inline]
    fn pixel(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        match self {
            Space::Ground { frame, .. } => frame.project(p).ok().map(|(px, _)| px),
            Space::Image => Some(Vector2::new(p.x, p.y)),
        }
    }

    fn region(&self, area: &BoundingBox) -> Option<PlaneRegion> {
        match self {
            Space::Ground { frame, plane } => {
                let corners: Option<Vec<_>> = area.corners().iter().map(|c| backproject_to_plane(*c, frame, plane).ok()).collect();
                PlaneRegion::from_world(plane, &corners?).ok()
            }
            Space::Image => PlaneRegion::new(area.corners().to_vec()).ok(),
        }
    }
}

/// Nearest pixel inside the image; searches never start off-screen.
fn clamp_to_image(p: Vector2<f64>, k: &crate::geometry::Intrinsics) -> Vector2<f64> {
    Vector2::new(p.x.clamp(0.0, k.width as f64 - 1.0), p.y.clamp(0.0, k.height as f64 - 1.0))
}

fn image_plane() -> GroundPlane {
    GroundPlane::horizontal(0.0)
}

/// Seeds the tracker from the first annotated box.
pub fn initialize(first_box: &BoundingBox, ctx: &FrameContext, cfg: &TrackerConfig, variant: Variant) -> Result<TrackerState, TrackError> {
    let k = &ctx.frame.intrinsics;
    if first_box.is_degenerate() {
        return Err(TrackError::Init(GeometryError::InvalidIntrinsics(format!("degenerate initial box {first_box:?}"))));
    }
    let anchor = cfg.anchor.pixel(first_box);
    let search = search_area_from_state(first_box, cfg.search_scale, k.width, k.height);
    let (plane, position, extent) = match variant {
        Variant::Filter3d => {
            let p = backproject_to_plane(anchor, &ctx.frame, &ctx.plane).map_err(TrackError::Init)?;
            let region = Space::of(variant, ctx).region(&search);
            let extent = region.map(|r| r.extent()).unwrap_or(0.0);
            (ctx.plane, p, extent)
        }
        _ => (image_plane(), Vector3::new(anchor.x, anchor.y, 0.0), (search.w * search.w + search.h * search.h).sqrt()),
    };
    let noise_pos = cfg.noise_pos_rel * extent;
    let transition = TransitionParams { noise_sigma_pos: noise_pos, noise_sigma_vel: cfg.noise_vel_ratio * noise_pos, dt: cfg.dt };
    let start = ObjectState::at_rest(position, &plane);
    let n = if variant == Variant::MlBaseline { 1 } else { cfg.particles };
    let particles = ParticleSet::init_gaussian(plane, &start, noise_pos, n, frame_seed(cfg.seed, u32::MAX))?;
    Ok(TrackerState {
        variant,
        particles,
        estimate: start,
        last_visible_state: start,
        last_box_size: (first_box.w, first_box.h),
        last_center: first_box.center(),
        occluded: false,
        frames_occluded: 0,
        object_members: (0..n).collect(),
        transition,
        velocity_initialized: false,
        history: vec![(ctx.frame.frame_index, position)],
        config: cfg.clone(),
    })
}

/// Flags particles hidden behind a nearer surface of the depth map.
/// Particles projecting outside the map count as occluded; pixels without
/// depth give no evidence of an occluder.
pub fn identify_occluded_particles(particles: &ParticleSet, ctx: &FrameContext, depth_tol: f64) -> Vec<bool> {
    particles
        .states()
        .iter()
        .map(|s| match ctx.frame.project(&s.position) {
            Err(_) => true,
            Ok((px, predicted)) => match ctx.depth_map.at_pixel(px) {
                None => true,
                Some(observed) if DepthMap::is_sentinel(observed) => false,
                Some(observed) => predicted > observed as f64 * (1.0 + depth_tol),
            },
        })
        .collect()
}

/// Share of `members` flagged in `mask` (0 for an empty member list).
pub fn occluded_share(mask: &[bool], members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    members.iter().filter(|&&i| mask.get(i).copied().unwrap_or(false)).count() as f64 / members.len() as f64
}

/// `true` when the score map is flat and weak.
pub fn is_flat(obs: &Observation, cfg: &TrackerConfig) -> bool {
    let map = &obs.score_map;
    map.peak_to_mean() < cfg.flatness_ratio && map.max() < cfg.visibility_threshold
}

/// The object is hidden when at least half of its cluster is occluded, or
/// when the score map is flat and weak.
pub fn occlusion_verdict(mask: &[bool], obs: &Observation, cfg: &TrackerConfig) -> bool {
    let share = if mask.is_empty() { 0.0 } else { mask.iter().filter(|m| **m).count() as f64 / mask.len() as f64 };
    share >= cfg.occluded_share || is_flat(obs, cfg)
}

/// While hidden: a strong enough response near the expected pixel, with
/// fewer than half of the predicted particles occluded, ends the occlusion.
pub fn check_reappearance(obs: &Observation, predicted_pixel: Vector2<f64>, occluded_fraction: f64, cfg: &TrackerConfig) -> bool {
    let radius = cfg.reappear_radius_rel * obs.score_map.search_area().w;
    obs.score_map.max_within(predicted_pixel, radius) >= cfg.reappear_threshold && occluded_fraction < cfg.occluded_share
}

/// Single-linkage components of `pixels` under `link_radius`. Each group is
/// sorted; groups are ordered by their smallest index.
pub fn link_components(pixels: &[Vector2<f64>], link_radius: f64) -> Vec<Vec<usize>> {
    use std::collections::HashMap;
    let n = pixels.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let cell = link_radius.max(f64::MIN_POSITIVE);
    let key = |p: &Vector2<f64>| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in pixels.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let r2 = link_radius * link_radius;
    for (i, p) in pixels.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &j in bucket {
                    if j <= i {
                        continue;
                    }
                    let d = pixels[j] - p;
                    if d.x * d.x + d.y * d.y <= r2 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let g = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

fn clusters_from_groups(particles: &ParticleSet, groups: Vec<Vec<usize>>) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .filter_map(|members| {
            let total_weight = members.iter().map(|&i| particles.weights()[i]).sum();
            let centroid = particles.weighted_mean(&members)?;
            Some(Cluster { members, centroid, total_weight })
        })
        .collect();
    clusters.sort_by(|a, b| b.total_weight.total_cmp(&a.total_weight).then(a.members[0].cmp(&b.members[0])));
    clusters
}

/// Groups particles whose image positions chain together within
/// `link_radius` pixels. Clusters come sorted by total weight, heaviest first.
pub fn cluster_particles(particles: &ParticleSet, frame: &CameraFrame, link_radius: f64) -> Vec<Cluster> {
    let space = Space::Ground { frame, plane: particles.plane() };
    let all: Vec<usize> = (0..particles.len()).collect();
    cluster_subset(particles, &space, &all, link_radius)
}

fn cluster_subset(particles: &ParticleSet, space: &Space<'_>, subset: &[usize], link_radius: f64) -> Vec<Cluster> {
    let (idx, px): (Vec<usize>, Vec<Vector2<f64>>) = subset
        .iter()
        .filter_map(|&i| space.pixel(&particles.states()[i].position).map(|p| (i, p)))
        .unzip();
    let groups = link_components(&px, link_radius)
        .into_iter()
        .map(|g| g.into_iter().map(|j| idx[j]).collect())
        .collect();
    clusters_from_groups(particles, groups)
}

/// Cluster with the centroid closest to the predicted position; ties go to
/// the heavier cluster, then to the earlier one.
pub fn select_object_cluster<'c>(clusters: &'c [Cluster], predicted: &ObjectState) -> Result<&'c Cluster, TrackError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let d = (c.centroid.position - predicted.position).norm();
        let better = match best {
            None => true,
            Some((j, bd)) => d < bd || (d == bd && c.total_weight > clusters[j].total_weight),
        };
        if better {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| &clusters[i]).ok_or(TrackError::NoCluster)
}

/// Least-squares velocity through `(frame, position)` samples; the finite
/// difference for two samples.
pub fn fitted_velocity(history: &[(u32, Vector3<f64>)], dt: f64, plane: &GroundPlane) -> Vector3<f64> {
    if history.len() < 2 {
        return Vector3::zeros();
    }
    let n = history.len() as f64;
    let t_mean = history.iter().map(|(t, _)| *t as f64).sum::<f64>() / n;
    let p_mean = history.iter().map(|(_, p)| p).sum::<Vector3<f64>>() / n;
    let (mut num, mut den) = (Vector3::zeros(), 0.0);
    for (t, p) in history {
        let dt_i = *t as f64 - t_mean;
        num += (p - p_mean) * dt_i;
        den += dt_i * dt_i;
    }
    if den == 0.0 {
        return Vector3::zeros();
    }
    plane.project_vector(&(num / (den * dt)))
}

/// Advances the tracker by one frame with the variant it was initialized for.
pub fn step(state: &TrackerState, ctx: &FrameContext, provider: &dyn ScoreMapProvider) -> Result<(TrackerState, TrackOutput), TrackError> {
    match state.variant {
        Variant::MlBaseline => step_ml_baseline(state, ctx, provider),
        Variant::Filter2d | Variant::Filter3d => step_filter(state, ctx, provider),
    }
}

/// Image-space filter step. Identical cycle to [`step`], but without depth.
pub fn step_filter_2d(state: &TrackerState, ctx: &FrameContext, provider: &dyn ScoreMapProvider) -> Result<(TrackerState, TrackOutput), TrackError> {
    debug_assert_eq!(state.variant, Variant::Filter2d);
    step_filter(state, ctx, provider)
}

fn state_3d_from_center(center: Vector2<f64>, ctx: &FrameContext, fallback: &ObjectState) -> ObjectState {
    backproject_to_plane(center, &ctx.frame, &ctx.plane)
        .map(|p| ObjectState::at_rest(p, &ctx.plane))
        .unwrap_or(*fallback)
}

/// Argmax tracker: the box jumps to the strongest response; weak maps keep
/// the previous box in place.
pub fn step_ml_baseline(state: &TrackerState, ctx: &FrameContext, provider: &dyn ScoreMapProvider) -> Result<(TrackerState, TrackOutput), TrackError> {
    let cfg = &state.config;
    let k = &ctx.frame.intrinsics;
    let (w, h) = state.last_box_size;
    let last_box = BoundingBox::from_center(clamp_to_image(state.last_center, k), w, h);
    let search = search_area_from_state(&last_box, cfg.search_scale, k.width, k.height);
    let obs = provider.observe(ctx.frame.frame_index, &search)?;
    let mut next = state.clone();
    let missing = obs.confidence < cfg.visibility_threshold;
    let (center, size) = if missing { (state.last_center, (w, h)) } else { (obs.score_map.argmax_pixel(), (obs.proposal.w, obs.proposal.h)) };
    next.occluded = missing;
    next.frames_occluded = if missing { state.frames_occluded + 1 } else { 0 };
    next.last_center = center;
    next.last_box_size = size;
    next.estimate = state_3d_from_center(center, ctx, &state.estimate);
    if !missing {
        next.last_visible_state = next.estimate;
    }
    let out = TrackOutput {
        frame_index: ctx.frame.frame_index,
        bbox: Some(BoundingBox::from_center(center, size.0, size.1)),
        confidence: obs.confidence,
        occluded: missing,
        state_3d: next.estimate,
        center,
    };
    Ok((next, out))
}

fn step_filter(state: &TrackerState, ctx: &FrameContext, provider: &dyn ScoreMapProvider) -> Result<(TrackerState, TrackOutput), TrackError> {
    let cfg = &state.config;
    let frame_index = ctx.frame.frame_index;
    let k = &ctx.frame.intrinsics;
    let space = Space::of(state.variant, ctx);
    let (w, h) = state.last_box_size;

    let predicted = state.estimate.extrapolate(state.transition.dt);
    let predicted_pixel = space.pixel(&predicted.position).unwrap_or(state.last_center);
    let search = search_area_from_state(&BoundingBox::from_center(clamp_to_image(predicted_pixel, k), w, h), cfg.search_scale, k.width, k.height);
    let obs = provider.observe(frame_index, &search)?;

    let particles = state.particles.predict(&state.transition);
    let mask = match state.variant {
        Variant::Filter3d => identify_occluded_particles(&particles, ctx, cfg.depth_tol),
        _ => vec![false; particles.len()],
    };
    let members_mask: Vec<bool> = state.object_members.iter().map(|&i| mask[i]).collect();
    let occluded = if state.occluded {
        let in_view: Vec<usize> = state
            .object_members
            .iter()
            .copied()
            .filter(|&i| space.pixel(&particles.states()[i].position).is_some_and(|p| ctx.depth_map.at_pixel(p).is_some()))
            .collect();
        // particles that left the image say nothing about the occluder
        let share = if in_view.is_empty() { 1.0 } else { occluded_share(&mask, &in_view) };
        !check_reappearance(&obs, predicted_pixel, share, cfg)
    } else {
        occlusion_verdict(&members_mask, &obs, cfg)
    };

    let seed = frame_seed(cfg.seed, frame_index);
    let update = if occluded { None } else { visible_update(state, &space, &particles, &obs, &predicted, seed)? };

    let mut next = state.clone();
    let out = match update {
        None => {
            next.particles = particles;
            next.estimate = predicted;
            next.occluded = true;
            next.frames_occluded = state.frames_occluded + 1;
            next.last_center = predicted_pixel;
            let state_3d = match state.variant {
                Variant::Filter3d => predicted,
                _ => state_3d_from_center(predicted_pixel, ctx, &state.last_visible_state),
            };
            TrackOutput {
                frame_index,
                bbox: Some(BoundingBox::from_center(predicted_pixel, w, h)),
                confidence: 0.0,
                occluded: true,
                state_3d,
                center: predicted_pixel,
            }
        }
        Some((particles, estimate, members)) => {
            let center = space.pixel(&estimate.position).unwrap_or(predicted_pixel);
            let size = (obs.proposal.w.max(1.0), obs.proposal.h.max(1.0));
            next.particles = particles;
            next.estimate = estimate;
            next.occluded = false;
            next.frames_occluded = 0;
            next.object_members = members;
            next.last_box_size = size;
            next.last_center = center;
            next.velocity_initialized = true;
            next.history.push((frame_index, estimate.position));
            let excess = next.history.len().saturating_sub(cfg.velocity_window.max(2));
            next.history.drain(..excess);
            next.estimate.velocity = fitted_velocity(&next.history, state.transition.dt, next.particles.plane());
            if cfg.anchor_particle_velocity {
                next.particles = next.particles.with_velocity(next.estimate.velocity);
            }
            let estimate = next.estimate;
            next.last_visible_state = estimate;
            let state_3d = match state.variant {
                Variant::Filter3d => estimate,
                _ => state_3d_from_center(center, ctx, &state.last_visible_state),
            };
            TrackOutput {
                frame_index,
                bbox: Some(BoundingBox::from_center(center, size.0, size.1)),
                confidence: obs.confidence,
                occluded: false,
                state_3d,
                center,
            }
        }
    };
    Ok((next, out))
}

/// Observation update for a visible object. `None` when the observation
/// carries no usable signal.
fn visible_update(
    state: &TrackerState,
    space: &Space<'_>,
    particles: &ParticleSet,
    obs: &Observation,
    predicted: &ObjectState,
    seed: u64,
) -> Result<Option<(ParticleSet, ObjectState, Vec<usize>)>, TrackError> {
    let cfg = &state.config;
    let map = &obs.score_map;
    let particles = match space.region(map.search_area()) {
        Some(region) => particles.redistribute_with_velocity(cfg.redistribution, &region, predicted.velocity, seed ^ 0x5EED)?,
        None => particles.clone(),
    };
    let weighting = particles.reweight(|s| space.pixel(&s.position).and_then(|px| map.sample_bilinear(px)));
    if weighting.degenerate {
        return Ok(None);
    }
    let weighted = weighting.particles;

    // Cluster the weighted set: its weighted centroids are less noisy than
    // those of a resampled copy.
    let n = weighted.len() as f64;
    let support: Vec<usize> = (0..weighted.len()).filter(|&i| weighted.weights()[i] * n >= cfg.cluster_weight_floor).collect();
    let link_radius = cfg.link_radius_rel * map.search_area().w;
    let clusters = cluster_subset(&weighted, space, &support, link_radius);
    let heavy: Vec<Cluster> = clusters.iter().filter(|c| c.total_weight >= cfg.min_cluster_weight).cloned().collect();
    let candidates = if heavy.is_empty() { &clusters } else { &heavy };
    let selected = select_object_cluster(candidates, predicted)?;

    let (particles, members) = if weighted.effective_sample_size() < cfg.resample_ratio * n {
        let ancestors = weighted.stratified_ancestors(seed ^ 0xA11CE);
        let mut in_cluster = vec![false; weighted.len()];
        selected.members.iter().for_each(|&i| in_cluster[i] = true);
        let members = (0..ancestors.len()).filter(|&i| in_cluster[ancestors[i]]).collect();
        (weighted.resample_stratified(seed ^ 0xA11CE), members)
    } else {
        (weighted.clone(), selected.members.clone())
    };
    let mut estimate = selected.centroid;
    let mut particles = particles;
    if !state.velocity_initialized {
        let v = finite_difference_velocity(&state.estimate.position, &estimate.position, state.transition.dt, particles.plane());
        particles = particles.with_velocity(v);
        estimate.velocity = v;
    }
    Ok(Some((particles, estimate, members)))
}
