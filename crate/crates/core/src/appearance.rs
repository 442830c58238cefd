//! Visual tracker observations: similarity score maps anchored to a search
//! area, a box proposal, and a confidence.
//!
//! The appearance model itself is behind [`ScoreMapProvider`]. The
//! [`SyntheticProvider`] builds score maps from known object and distractor
//! positions; replayed maps from a real tracker are read by
//! [`crate::io::ReplayProvider`].

use nalgebra::Vector2;
use thiserror::Error;

use crate::geometry::BoundingBox;

/// Search area edge length relative to the previous box.
pub const DEFAULT_SEARCH_SCALE: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserveError {
    #[error("frame {0} is past the end of the sequence")]
    EndOfSequence(u32),
    #[error("search area {0:?} is degenerate")]
    DegenerateSearchArea(BoundingBox),
    #[error("invalid score map: {0}")]
    InvalidMap(String),
}

/// Similarity grid over a search area, one cell per pixel. Cell `(r, c)`
/// scores pixel `(area.x + c, area.y + r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: u32,
    height: u32,
    grid: Vec<f64>,
    search_area: BoundingBox,
    pub frame_index: u32,
    /// The requested area reached past the image border and was clamped.
    pub clamped: bool,
}

impl ScoreMap {
    /// Wraps a row-major grid. The search area origin must be integral and
    /// its size must equal the grid dimensions.
    pub fn new(frame_index: u32, origin: (i64, i64), width: u32, height: u32, grid: Vec<f64>) -> Result<Self, ObserveError> {
        if width == 0 || height == 0 || grid.len() != width as usize * height as usize {
            return Err(ObserveError::InvalidMap(format!("{} cells for {width}x{height}", grid.len())));
        }
        if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ObserveError::InvalidMap("scores must be finite and non-negative".into()));
        }
        let search_area = BoundingBox::new(origin.0 as f64, origin.1 as f64, width as f64, height as f64);
        Ok(Self { width, height, grid, search_area, frame_index, clamped: false })
    }

    /// Integer-aligned cell layout covering `area`.
    pub fn layout(area: &BoundingBox) -> ((i64, i64), u32, u32) {
        let x0 = area.x.round();
        let y0 = area.y.round();
        let w = (area.right().round() - x0).max(1.0);
        let h = (area.bottom().round() - y0).max(1.0);
        ((x0 as i64, y0 as i64), w as u32, h as u32)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn search_area(&self) -> &BoundingBox {
        &self.search_area
    }

    #[inline]
    pub fn cell(&self, col: u32, row: u32) -> f64 {
        self.grid[row as usize * self.width as usize + col as usize]
    }

    /// Image pixel scored by cell `(col, row)`.
    #[inline]
    pub fn cell_pixel(&self, col: u32, row: u32) -> Vector2<f64> {
        Vector2::new(self.search_area.x + col as f64, self.search_area.y + row as f64)
    }

    pub fn max(&self) -> f64 {
        self.grid.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.grid.iter().sum::<f64>() / self.grid.len() as f64
    }

    /// Pixel of the first maximal cell in row-major order.
    pub fn argmax_pixel(&self) -> Vector2<f64> {
        let mut best = 0;
        for (i, v) in self.grid.iter().enumerate() {
            if *v > self.grid[best] {
                best = i;
            }
        }
        let w = self.width as usize;
        self.cell_pixel((best % w) as u32, (best / w) as u32)
    }

    /// Largest score among cells within `radius` pixels of `center`.
    pub fn max_within(&self, center: Vector2<f64>, radius: f64) -> f64 {
        let local = center - Vector2::new(self.search_area.x, self.search_area.y);
        let c0 = (local.x - radius).ceil().max(0.0);
        let c1 = (local.x + radius).floor().min(self.width as f64 - 1.0);
        let r0 = (local.y - radius).ceil().max(0.0);
        let r1 = (local.y + radius).floor().min(self.height as f64 - 1.0);
        let mut best = 0.0f64;
        if c0 > c1 || r0 > r1 {
            return best;
        }
        for r in r0 as u32..=r1 as u32 {
            for c in c0 as u32..=c1 as u32 {
                let (dx, dy) = (c as f64 - local.x, r as f64 - local.y);
                if dx * dx + dy * dy <= radius * radius {
                    best = best.max(self.cell(c, r));
                }
            }
        }
        best
    }

    /// Bilinear interpolation between cell centers; `None` outside the grid.
    #[inline]
    pub fn sample_bilinear(&self, pixel: Vector2<f64>) -> Option<f64> {
        let x = pixel.x - self.search_area.x;
        let y = pixel.y - self.search_area.y;
        let (wmax, hmax) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= wmax && y <= hmax) {
            return None;
        }
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (c0, r0) = (x0 as u32, y0 as u32);
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let top = self.cell(c0, r0) * (1.0 - fx) + self.cell(c1, r0) * fx;
        let bottom = self.cell(c0, r1) * (1.0 - fx) + self.cell(c1, r1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// `max / mean`, infinite for an all-zero map.
    pub fn peak_to_mean(&self) -> f64 {
        let mean = self.mean();
        if mean > 0.0 {
            self.max() / mean
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub score_map: ScoreMap,
    pub proposal: BoundingBox,
    pub confidence: f64,
}

impl Observation {
    /// Observation whose confidence is the map maximum.
    pub fn new(score_map: ScoreMap, proposal: BoundingBox) -> Self {
        let confidence = score_map.max().clamp(0.0, 1.0);
        Self { score_map, proposal, confidence }
    }
}

/// Source of per-frame observations for a single tracked object.
pub trait ScoreMapProvider {
    fn observe(&self, frame_index: u32, search_area: &BoundingBox) -> Result<Observation, ObserveError>;
}

/// Box of `scale` times the previous size around its center, clamped to the image.
pub fn search_area_from_state(prev_box: &BoundingBox, scale: f64, image_width: u32, image_height: u32) -> BoundingBox {
    let scale = scale.max(1.0);
    BoundingBox::from_center(prev_box.center(), prev_box.w * scale, prev_box.h * scale).clamped(image_width, image_height)
}

/// Gaussian response centered on a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub pixel: Vector2<f64>,
    pub gain: f64,
}

/// Response of the map while the target is hidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OcclusionResponse {
    /// Only the target bump shrinks.
    Attenuate,
    /// The target bump shrinks and a plateau of `level · occluded_fraction`
    /// spreads over the whole area.
    Flat { level: f64 },
}

impl Default for OcclusionResponse {
    fn default() -> Self {
        OcclusionResponse::Flat { level: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMapSpec {
    pub true_pixel: Option<Vector2<f64>>,
    pub peak_sigma: f64,
    pub distractors: Vec<Bump>,
    pub occluded_fraction: f64,
    pub noise_sigma: f64,
    pub occlusion_response: OcclusionResponse,
}

impl SyntheticMapSpec {
    pub fn new(true_pixel: Vector2<f64>, peak_sigma: f64) -> Self {
        Self {
            true_pixel: Some(true_pixel),
            peak_sigma,
            distractors: Vec::new(),
            occluded_fraction: 0.0,
            noise_sigma: 0.0,
            occlusion_response: OcclusionResponse::Attenuate,
        }
    }

    /// Distractors at `pixels`, all with the same `gain`.
    pub fn with_distractors(mut self, pixels: &[Vector2<f64>], gain: f64) -> Self {
        self.distractors = pixels.iter().map(|&pixel| Bump { pixel, gain }).collect();
        self
    }
}

/// `(1 − occluded)·bump(target) + Σ gain·bump(distractor) + |noise|`,
/// clipped at zero and scaled down so the maximum is at most one.
///
/// Noise is a hash of `(seed, pixel)`, so overlapping search areas see the
/// same noise at the same pixel.
pub fn synthetic_score_map(map_spec: &SyntheticMapSpec, search_area: &BoundingBox, frame_index: u32, seed: u64) -> Result<ScoreMap, ObserveError> {
    if search_area.is_degenerate() {
        return Err(ObserveError::DegenerateSearchArea(*search_area));
    }
    if !(map_spec.peak_sigma > 0.0) {
        return Err(ObserveError::InvalidMap(format!("peak_sigma {} must be > 0", map_spec.peak_sigma)));
    }
    let occluded = map_spec.occluded_fraction.clamp(0.0, 1.0);
    let ((x0, y0), w, h) = ScoreMap::layout(search_area);
    let inv = 1.0 / (2.0 * map_spec.peak_sigma * map_spec.peak_sigma);
    let mut bumps: Vec<Bump> = Vec::with_capacity(map_spec.distractors.len() + 1);
    if let Some(p) = map_spec.true_pixel {
        bumps.push(Bump { pixel: p, gain: 1.0 - occluded });
    }
    bumps.extend(map_spec.distractors.iter().copied());
    // bumps further than this contribute below f64 resolution
    let reach_sq = 40.0 * map_spec.peak_sigma * map_spec.peak_sigma;
    let plateau = match map_spec.occlusion_response {
        OcclusionResponse::Attenuate => 0.0,
        OcclusionResponse::Flat { level } => level * occluded,
    };
    let mut grid = Vec::with_capacity(w as usize * h as usize);
    for r in 0..h {
        let py = (y0 + r as i64) as f64;
        for c in 0..w {
            let px = (x0 + c as i64) as f64;
            let mut v = plateau;
            for b in &bumps {
                let (dx, dy) = (px - b.pixel.x, py - b.pixel.y);
                let d2 = dx * dx + dy * dy;
                if d2 < reach_sq {
                    v += b.gain * (-d2 * inv).exp();
                }
            }
            if map_spec.noise_sigma > 0.0 {
                v += (map_spec.noise_sigma * pixel_normal(seed, x0 + c as i64, y0 + r as i64)).abs();
            }
            grid.push(v.max(0.0));
        }
    }
    let max = grid.iter().copied().fold(0.0, f64::max);
    if max > 1.0 {
        grid.iter_mut().for_each(|v| *v /= max);
    }
    ScoreMap::new(frame_index, (x0, y0), w, h, grid)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draw keyed by `(seed, x, y)` (Box-Muller).
fn pixel_normal(seed: u64, x: i64, y: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((x as u64).wrapping_mul(0x1000_0000_01b3) ^ splitmix64(y as u64)));
    let h2 = splitmix64(h);
    let u1 = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = (h2 >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Mixes a base seed with a frame index.
pub fn frame_seed(seed: u64, frame_index: u32) -> u64 {
    splitmix64(seed ^ splitmix64(frame_index as u64 + 1))
}

/// Ground truth for one frame, as seen by the synthetic appearance model.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    /// Projected object position, `None` when it cannot be projected.
    pub object_pixel: Option<Vector2<f64>>,
    /// Amodal object box, used as the proposal size.
    pub object_box: BoundingBox,
    pub occluded_fraction: f64,
    pub distractors: Vec<Bump>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    /// Peak width relative to the mean object box side.
    pub peak_sigma_rel: f64,
    pub min_peak_sigma: f64,
    pub noise_sigma: f64,
    pub occlusion_response: OcclusionResponse,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self { peak_sigma_rel: 0.2, min_peak_sigma: 1.5, noise_sigma: 0.025, occlusion_response: OcclusionResponse::default() }
    }
}

/// Stateless provider over precomputed per-frame truth.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    frames: Vec<FrameTruth>,
    params: SyntheticParams,
    seed: u64,
}

impl SyntheticProvider {
    pub fn new(frames: Vec<FrameTruth>, params: SyntheticParams, seed: u64) -> Self {
        Self { frames, params, seed }
    }

    pub fn frames(&self) -> &[FrameTruth] {
        &self.frames
    }

    pub fn map_spec(&self, truth: &FrameTruth) -> SyntheticMapSpec {
        let side = 0.5 * (truth.object_box.w + truth.object_box.h);
        SyntheticMapSpec {
            true_pixel: truth.object_pixel,
            peak_sigma: (self.params.peak_sigma_rel * side).max(self.params.min_peak_sigma),
            distractors: truth.distractors.clone(),
            occluded_fraction: truth.occluded_fraction,
            noise_sigma: self.params.noise_sigma,
            occlusion_response: self.params.occlusion_response,
        }
    }
}

impl ScoreMapProvider for SyntheticProvider {
    fn observe(&self, frame_index: u32, search_area: &BoundingBox) -> Result<Observation, ObserveError> {
        let truth = self.frames.get(frame_index as usize).ok_or(ObserveError::EndOfSequence(frame_index))?;
        let map = synthetic_score_map(&self.map_spec(truth), search_area, frame_index, frame_seed(self.seed, frame_index))?;
        let proposal = BoundingBox::from_center(map.argmax_pixel(), truth.object_box.w, truth.object_box.h);
        Ok(Observation::new(map, proposal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> BoundingBox {
        BoundingBox::new(100.0, 50.0, 120.0, 90.0)
    }

    #[test]
    fn single_bump_peaks_at_target() {
        let map_spec = SyntheticMapSpec::new(Vector2::new(150.0, 80.0), 4.0);
        let map = synthetic_score_map(&map_spec, &area(), 0, 1).unwrap();
        assert_eq!(map.argmax_pixel(), Vector2::new(150.0, 80.0));
        assert!((map.max() - 1.0).abs() < 1e-12);
        let second = map.grid().iter().filter(|v| **v == map.max()).count();
        assert_eq!(second, 1);
    }

    #[test]
    fn noise_only_map_is_weak() {
        let mut map_spec = SyntheticMapSpec::new(Vector2::new(150.0, 80.0), 4.0);
        map_spec.occluded_fraction = 1.0;
        map_spec.noise_sigma = 0.025;
        let map = synthetic_score_map(&map_spec, &area(), 0, 7).unwrap();
        assert!(map.max() < 0.25);
        let obs = Observation::new(map, BoundingBox::default());
        assert!(obs.confidence < 0.25);
    }

    #[test]
    fn flat_occlusion_response_has_low_peak_to_mean() {
        let mut map_spec = SyntheticMapSpec::new(Vector2::new(150.0, 80.0), 4.0);
        map_spec.occluded_fraction = 1.0;
        map_spec.noise_sigma = 0.025;
        map_spec.occlusion_response = OcclusionResponse::Flat { level: 0.1 };
        let map = synthetic_score_map(&map_spec, &area(), 0, 7).unwrap();
        assert!(map.peak_to_mean() < 2.0, "{}", map.peak_to_mean());
    }

    #[test]
    fn stronger_distractor_takes_the_argmax() {
        let target = Vector2::new(130.0, 80.0);
        let distractor = Vector2::new(190.0, 100.0);
        let map_spec = SyntheticMapSpec::new(target, 4.0).with_distractors(&[distractor], 1.2);
        let map = synthetic_score_map(&map_spec, &area(), 0, 1).unwrap();
        assert_eq!(map.argmax_pixel(), distractor);
        // the target is still a local peak with the expected relative height
        let at_target = map.sample_bilinear(target).unwrap();
        assert!((at_target - 1.0 / 1.2).abs() < 1e-9);
        assert!(map.max_within(target, 10.0) == at_target);
    }

    #[test]
    fn generator_is_deterministic() {
        let mut map_spec = SyntheticMapSpec::new(Vector2::new(150.0, 80.0), 4.0);
        map_spec.noise_sigma = 0.1;
        let a = synthetic_score_map(&map_spec, &area(), 3, 99).unwrap();
        let b = synthetic_score_map(&map_spec, &area(), 3, 99).unwrap();
        assert_eq!(a, b);
        let c = synthetic_score_map(&map_spec, &area(), 3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_is_shared_by_overlapping_areas() {
        let mut map_spec = SyntheticMapSpec::new(Vector2::new(150.0, 80.0), 4.0);
        map_spec.occluded_fraction = 1.0;
        map_spec.occlusion_response = OcclusionResponse::Attenuate;
        map_spec.noise_sigma = 0.1;
        let a = synthetic_score_map(&map_spec, &BoundingBox::new(100.0, 50.0, 40.0, 40.0), 0, 5).unwrap();
        let b = synthetic_score_map(&map_spec, &BoundingBox::new(110.0, 60.0, 40.0, 40.0), 0, 5).unwrap();
        let p = Vector2::new(125.0, 75.0);
        assert_eq!(a.sample_bilinear(p), b.sample_bilinear(p));
    }

    #[test]
    fn bilinear_outside_is_none() {
        let map = ScoreMap::new(0, (10, 10), 4, 3, vec![1.0; 12]).unwrap();
        assert_eq!(map.sample_bilinear(Vector2::new(9.9, 11.0)), None);
        assert_eq!(map.sample_bilinear(Vector2::new(13.0, 12.0)), Some(1.0));
        assert_eq!(map.sample_bilinear(Vector2::new(13.1, 12.0)), None);
    }

    #[test]
    fn bilinear_interpolates() {
        let map = ScoreMap::new(0, (0, 0), 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((map.sample_bilinear(Vector2::new(0.5, 0.5)).unwrap() - 1.5).abs() < 1e-15);
        assert!((map.sample_bilinear(Vector2::new(1.0, 0.25)).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn search_area_examples() {
        let b = BoundingBox::new(100.0, 100.0, 20.0, 20.0);
        assert_eq!(search_area_from_state(&b, 1.0, 640, 480), b);
        assert_eq!(search_area_from_state(&b, 5.0, 640, 480), BoundingBox::new(60.0, 60.0, 100.0, 100.0));
        let edge = BoundingBox::new(2.0, 470.0, 20.0, 8.0);
        let a = search_area_from_state(&edge, 5.0, 640, 480);
        assert!(a.contains(edge.center()));
        assert!(a.x >= 0.0 && a.bottom() <= 480.0);
    }

    #[test]
    fn provider_end_of_sequence() {
        let p = SyntheticProvider::new(Vec::new(), SyntheticParams::default(), 0);
        assert_eq!(p.observe(0, &area()).unwrap_err(), ObserveError::EndOfSequence(0));
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(ScoreMap::new(0, (0, 0), 2, 2, vec![0.0; 3]).is_err());
        assert!(ScoreMap::new(0, (0, 0), 1, 1, vec![-1.0]).is_err());
        assert!(ScoreMap::new(0, (0, 0), 1, 1, vec![f64::NAN]).is_err());
    }
}
