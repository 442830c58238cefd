//! Sequential Monte Carlo estimator over an object's position and velocity,
//! with both confined to a plane.
//!
//! A [`ParticleSet`] is a value: every operation returns a new set. Random
//! draws come from a ChaCha stream seeded per call, so identical inputs and
//! seeds give bit-identical results.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::GroundPlane;

/// Floor applied to per-particle likelihoods.
pub const LIKELIHOOD_FLOOR: f64 = 1e-6;
/// Share of particles redistributed before each visible update.
pub const DEFAULT_REDISTRIBUTION: f64 = 0.10;
pub const DEFAULT_PARTICLES: usize = 500;
/// Resample when the effective sample size drops below this share of `n`.
pub const DEFAULT_RESAMPLE_RATIO: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl ObjectState {
    /// State snapped onto `plane`: position projected, normal velocity removed.
    pub fn on_plane(position: Vector3<f64>, velocity: Vector3<f64>, plane: &GroundPlane) -> Self {
        Self { position: plane.project_point(&position), velocity: plane.project_vector(&velocity) }
    }

    pub fn at_rest(position: Vector3<f64>, plane: &GroundPlane) -> Self {
        Self::on_plane(position, Vector3::zeros(), plane)
    }

    /// Constant-velocity extrapolation by `dt` frames.
    pub fn extrapolate(&self, dt: f64) -> Self {
        Self { position: self.position + self.velocity * dt, velocity: self.velocity }
    }
}

/// Velocity from two consecutive positions `dt` frames apart.
pub fn finite_difference_velocity(previous: &Vector3<f64>, current: &Vector3<f64>, dt: f64, plane: &GroundPlane) -> Vector3<f64> {
    plane.project_vector(&((current - previous) / dt))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub noise_sigma_pos: f64,
    pub noise_sigma_vel: f64,
    pub dt: f64,
}

impl TransitionParams {
    /// Noise tied to the ground extent of the search area.
    pub fn for_extent(search_extent: f64) -> Self {
        let pos = 0.02 * search_extent;
        Self { noise_sigma_pos: pos, noise_sigma_vel: 0.5 * pos, dt: 1.0 }
    }

    pub fn noiseless() -> Self {
        Self { noise_sigma_pos: 0.0, noise_sigma_vel: 0.0, dt: 1.0 }
    }
}

/// Convex polygon in 2D plane coordinates (see [`GroundPlane::flatten`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneRegion {
    pub vertices: Vec<Vector2<f64>>,
}

impl PlaneRegion {
    pub fn new(vertices: Vec<Vector2<f64>>) -> Result<Self, FilterError> {
        let region = Self { vertices };
        if region.vertices.len() < 3 || !(region.area() > 1e-12) {
            return Err(FilterError::InvalidArgument("region on plane has no area".into()));
        }
        Ok(region)
    }

    /// Region spanned by world points lying on `plane`.
    pub fn from_world(plane: &GroundPlane, corners: &[Vector3<f64>]) -> Result<Self, FilterError> {
        Self::new(corners.iter().map(|c| plane.flatten(c)).collect())
    }

    pub fn square(center: Vector2<f64>, half: f64) -> Result<Self, FilterError> {
        Self::new(vec![
            center + Vector2::new(-half, -half),
            center + Vector2::new(half, -half),
            center + Vector2::new(half, half),
            center + Vector2::new(-half, half),
        ])
    }

    fn fan(&self) -> impl Iterator<Item = (Vector2<f64>, Vector2<f64>, Vector2<f64>)> + '_ {
        let a = self.vertices[0];
        self.vertices.windows(2).skip(1).map(move |w| (a, w[0], w[1]))
    }

    pub fn area(&self) -> f64 {
        self.fan().map(|(a, b, c)| triangle_area(a, b, c)).sum()
    }

    pub fn centroid(&self) -> Vector2<f64> {
        let (mut acc, mut total) = (Vector2::zeros(), 0.0);
        for (a, b, c) in self.fan() {
            let w = triangle_area(a, b, c);
            acc += (a + b + c) / 3.0 * w;
            total += w;
        }
        acc / total
    }

    /// Largest distance between two vertices.
    pub fn extent(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Uniform sample: a fan triangle chosen by area, then a uniform point in it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let tris: Vec<_> = self.fan().collect();
        let areas: Vec<f64> = tris.iter().map(|&(a, b, c)| triangle_area(a, b, c)).collect();
        let total: f64 = areas.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = tris.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                chosen = i;
                break;
            }
            pick -= a;
        }
        let (a, b, c) = tris[chosen];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
    }
}

fn triangle_area(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>) -> f64 {
    let (u, v) = (b - a, c - a);
    0.5 * (u.x * v.y - u.y * v.x).abs()
}

/// Weighted particle approximation of the posterior over [`ObjectState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    states: Vec<ObjectState>,
    weights: Vec<f64>,
    plane: GroundPlane,
    rng_seed: u64,
}

/// Result of an observation update.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighting {
    pub particles: ParticleSet,
    /// Every likelihood sat at the floor; weights were reset to uniform.
    pub degenerate: bool,
}

impl ParticleSet {
    /// Particles with uniform weights; states are snapped onto the plane.
    pub fn from_states(states: Vec<ObjectState>, plane: GroundPlane, rng_seed: u64) -> Result<Self, FilterError> {
        let n = states.len();
        Self::new(states, vec![1.0 / n.max(1) as f64; n], plane, rng_seed)
    }

    pub fn new(states: Vec<ObjectState>, weights: Vec<f64>, plane: GroundPlane, rng_seed: u64) -> Result<Self, FilterError> {
        if states.is_empty() {
            return Err(FilterError::InvalidArgument("particle set must not be empty".into()));
        }
        if states.len() != weights.len() {
            return Err(FilterError::InvalidArgument(format!("{} states but {} weights", states.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(FilterError::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(FilterError::InvalidArgument("weights sum to zero".into()));
        }
        let states = states.into_iter().map(|s| ObjectState::on_plane(s.position, s.velocity, &plane)).collect();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { states, weights, plane, rng_seed })
    }

    pub fn init_uniform(plane: GroundPlane, region: &PlaneRegion, n: usize, seed: u64) -> Result<Self, FilterError> {
        if n == 0 {
            return Err(FilterError::InvalidArgument("need at least one particle".into()));
        }
        let region = PlaneRegion::new(region.vertices.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = (0..n).map(|_| ObjectState::at_rest(plane.lift(region.sample(&mut rng)), &plane)).collect();
        Ok(Self { states, weights: vec![1.0 / n as f64; n], plane, rng_seed: rng.next_u64() })
    }

    /// Isotropic in-plane Gaussian cloud around `center`, all at `velocity`.
    pub fn init_gaussian(plane: GroundPlane, center: &ObjectState, sigma: f64, n: usize, seed: u64) -> Result<Self, FilterError> {
        if n == 0 {
            return Err(FilterError::InvalidArgument("need at least one particle".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = plane.basis();
        let states = (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                ObjectState::on_plane(center.position + (u * a + v * b) * sigma, center.velocity, &plane)
            })
            .collect();
        Ok(Self { states, weights: vec![1.0 / n as f64; n], plane, rng_seed: rng.next_u64() })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ObjectState] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn plane(&self) -> &GroundPlane {
        &self.plane
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Sets every particle's velocity.
    pub fn with_velocity(&self, velocity: Vector3<f64>) -> Self {
        let v = self.plane.project_vector(&velocity);
        let states = self.states.iter().map(|s| ObjectState { position: s.position, velocity: v }).collect();
        Self { states, ..self.clone() }
    }

    /// Constant-velocity transition with in-plane Gaussian noise on position
    /// and velocity. Weights are unchanged.
    pub fn predict(&self, params: &TransitionParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let (u, v) = self.plane.basis();
        let draw = |sigma: f64, rng: &mut ChaCha8Rng| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            (u * a + v * b) * sigma
        };
        let states = self
            .states
            .iter()
            .map(|s| {
                let position = s.position + s.velocity * params.dt + draw(params.noise_sigma_pos, &mut rng);
                let velocity = s.velocity + draw(params.noise_sigma_vel, &mut rng);
                ObjectState::on_plane(position, velocity, &self.plane)
            })
            .collect();
        Self { states, weights: self.weights.clone(), plane: self.plane, rng_seed: rng.next_u64() }
    }

    /// Multiplies each weight by `max(likelihood(state), floor)` and
    /// renormalizes. If every likelihood is at the floor the weights are
    /// reset to uniform and the result is flagged degenerate.
    pub fn reweight<F>(&self, mut likelihood: F) -> Weighting
    where
        F: FnMut(&ObjectState) -> Option<f64>,
    {
        let mut degenerate = true;
        let raw: Vec<f64> = self
            .states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| {
                let l = likelihood(s).filter(|l| l.is_finite()).unwrap_or(0.0);
                if l > LIKELIHOOD_FLOOR {
                    degenerate = false;
                }
                w * l.max(LIKELIHOOD_FLOOR)
            })
            .collect();
        let n = self.len();
        let total: f64 = raw.iter().sum();
        let weights = if degenerate || !(total > 0.0) {
            vec![1.0 / n as f64; n]
        } else {
            raw.into_iter().map(|w| w / total).collect()
        };
        Weighting { particles: Self { weights, ..self.clone() }, degenerate: degenerate || !(total > 0.0) }
    }

    /// `1 / Σ w²`
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// One uniform draw per stratum `[i/n, (i+1)/n)`, mapped through the
    /// cumulative weights. Output weights are uniform.
    pub fn resample_stratified(&self, seed: u64) -> Self {
        let states = self.stratified_ancestors(seed).into_iter().map(|j| self.states[j]).collect();
        let n = self.len();
        Self { states, weights: vec![1.0 / n as f64; n], plane: self.plane, rng_seed: self.rng_seed }
    }

    /// Source index of every particle [`Self::resample_stratified`] would draw.
    pub fn stratified_ancestors(&self, seed: u64) -> Vec<usize> {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.weights[0];
        let mut j = 0;
        for i in 0..n {
            let u = (i as f64 + rng.random::<f64>()) / n as f64;
            while u >= cumulative && j + 1 < n {
                j += 1;
                cumulative += self.weights[j];
            }
            out.push(j);
        }
        out
    }

    /// Resamples only when the effective sample size is below `ratio · n`.
    pub fn resample_if_needed(&self, ratio: f64, seed: u64) -> (Self, bool) {
        if self.effective_sample_size() < ratio * self.len() as f64 {
            (self.resample_stratified(seed), true)
        } else {
            (self.clone(), false)
        }
    }

    /// Replaces the `⌊fraction·n⌋` lowest-weight particles by uniform draws
    /// in `region` at rest, each with weight `1/n`, then renormalizes.
    pub fn redistribute_fraction(&self, fraction: f64, region: &PlaneRegion, seed: u64) -> Result<Self, FilterError> {
        self.redistribute_with_velocity(fraction, region, Vector3::zeros(), seed)
    }

    /// As [`Self::redistribute_fraction`], giving the new particles `velocity`.
    pub fn redistribute_with_velocity(&self, fraction: f64, region: &PlaneRegion, velocity: Vector3<f64>, seed: u64) -> Result<Self, FilterError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(FilterError::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
        }
        let region = PlaneRegion::new(region.vertices.clone())?;
        let n = self.len();
        let count = ((fraction * n as f64) + 1e-9).floor() as usize;
        if count == 0 {
            return Ok(self.clone());
        }
        let mut replaced = self.lowest_weight_indices(count);
        replaced.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for &i in &replaced {
            out.states[i] = ObjectState::on_plane(self.plane.lift(region.sample(&mut rng)), velocity, &self.plane);
            out.weights[i] = 1.0 / n as f64;
        }
        let total: f64 = out.weights.iter().sum();
        out.weights.iter_mut().for_each(|w| *w /= total);
        Ok(out)
    }

    /// Indices of the `count` smallest weights (ties broken by index).
    pub fn lowest_weight_indices(&self, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]).then(a.cmp(&b)));
        idx.truncate(count);
        idx
    }

    /// Weighted mean state over all particles, snapped onto the plane.
    pub fn estimate_state(&self) -> ObjectState {
        self.weighted_mean((0..self.len()).collect::<Vec<_>>().as_slice())
            .expect("particle sets are non-empty with positive total weight")
    }

    /// Weighted mean over a subset of particles; `None` if the subset has no weight.
    pub fn weighted_mean(&self, members: &[usize]) -> Option<ObjectState> {
        let total: f64 = members.iter().map(|&i| self.weights[i]).sum();
        if !(total > 0.0) {
            return None;
        }
        let (mut p, mut v) = (Vector3::zeros(), Vector3::zeros());
        for &i in members {
            let w = self.weights[i] / total;
            p += self.states[i].position * w;
            v += self.states[i].velocity * w;
        }
        Some(ObjectState::on_plane(p, v, &self.plane))
    }
}
