//! Long-term tracking metrics: IoU, precision/recall/F over confidence
//! thresholds, the per-sequence final score and box-coverage heat grids.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("frame {frame} does not follow frame {previous}")]
    NonMonotonicFrames { previous: u32, frame: u32 },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("record covers {record} frames but ground truth covers {truth}")]
    LengthMismatch { record: usize, truth: usize },
    #[error("missing f_max for object {object}, run {run}")]
    IncompleteGrid { object: u32, run: u32 },
    #[error("duplicate f_max for object {object}, run {run}")]
    DuplicateEntry { object: u32, run: u32 },
    #[error("nothing to evaluate")]
    Empty,
    #[error("inconsistent image size")]
    ImageSize,
}

/// One output row of a tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordFrame {
    pub frame: u32,
    /// `A_t`; `None` when the tracker reports nothing.
    pub bbox: Option<BoundingBox>,
    pub confidence: f64,
    pub occluded: bool,
    /// Scene-space position, when the tracker has one.
    pub position: Option<Vector3<f64>>,
}

impl RecordFrame {
    pub fn absent(frame: u32) -> Self {
        Self { frame, bbox: None, confidence: 0.0, occluded: false, position: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub sequence_id: String,
    pub object_id: u32,
    pub run: u32,
    frames: Vec<RecordFrame>,
}

impl TrackRecord {
    pub fn new(sequence_id: impl Into<String>, object_id: u32, run: u32) -> Self {
        Self { sequence_id: sequence_id.into(), object_id, run, frames: Vec::new() }
    }

    pub fn from_frames(sequence_id: impl Into<String>, object_id: u32, run: u32, frames: Vec<RecordFrame>) -> Result<Self, EvalError> {
        let mut r = Self::new(sequence_id, object_id, run);
        for f in frames {
            r.push(f)?;
        }
        Ok(r)
    }

    /// Appends a frame; indices must increase and confidence lie in [0, 1].
    pub fn push(&mut self, frame: RecordFrame) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&frame.confidence) {
            return Err(EvalError::ConfidenceOutOfRange(frame.confidence));
        }
        if let Some(last) = self.frames.last() {
            if frame.frame <= last.frame {
                return Err(EvalError::NonMonotonicFrames { previous: last.frame, frame: frame.frame });
            }
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn frames(&self) -> &[RecordFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 { inter / union } else { 0.0 }
}

/// [`iou`] with absent boxes scoring 0.
pub fn iou_opt(a: Option<&BoundingBox>, b: Option<&BoundingBox>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => iou(a, b),
        _ => 0.0,
    }
}

/// Denominator used for precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PrecisionMode {
    /// Frames where both the prediction and the ground truth exist.
    #[default]
    BothPresent,
    /// Frames where the prediction exists (long-term benchmark convention).
    PredictionPresent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub f_max: f64,
}

pub fn f_score(pr: f64, re: f64) -> f64 {
    if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 }
}

pub fn metric_curve(record: &TrackRecord, truth: &[Option<BoundingBox>]) -> Result<MetricCurve, EvalError> {
    metric_curve_with(record, truth, PrecisionMode::default())
}

/// Precision, recall and F at every distinct confidence plus 0 and 1.
/// `truth[i]` is the ground-truth box of the record's `i`-th frame.
pub fn metric_curve_with(record: &TrackRecord, truth: &[Option<BoundingBox>], mode: PrecisionMode) -> Result<MetricCurve, EvalError> {
    if record.len() != truth.len() {
        return Err(EvalError::LengthMismatch { record: record.len(), truth: truth.len() });
    }
    let mut thresholds: Vec<f64> = record.frames().iter().filter(|f| f.bbox.is_some()).map(|f| f.confidence).collect();
    thresholds.extend([0.0, 1.0]);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let overlaps: Vec<f64> = record.frames().iter().zip(truth).map(|(f, g)| iou_opt(f.bbox.as_ref(), g.as_ref())).collect();
    let n_truth = truth.iter().filter(|g| g.is_some()).count();
    let (mut precision, mut recall, mut f1) = (Vec::new(), Vec::new(), Vec::new());
    for &tau in &thresholds {
        let (mut sum, mut n_pred) = (0.0, 0usize);
        for ((f, g), o) in record.frames().iter().zip(truth).zip(&overlaps) {
            if f.bbox.is_none() || f.confidence < tau {
                continue;
            }
            sum += o;
            if g.is_some() || mode == PrecisionMode::PredictionPresent {
                n_pred += 1;
            }
        }
        let pr = if n_pred > 0 { sum / n_pred as f64 } else { 0.0 };
        let re = if n_truth > 0 { sum / n_truth as f64 } else { 0.0 };
        precision.push(pr);
        recall.push(re);
        f1.push(f_score(pr, re));
    }
    let f_max = f1.iter().copied().fold(0.0, f64::max);
    Ok(MetricCurve { thresholds, precision, recall, f1, f_max })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmaxEntry {
    pub object: u32,
    pub run: u32,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalScore {
    pub f_final: f64,
    /// Population standard deviation over all (object, run) values.
    pub std: f64,
    pub objects: usize,
    pub runs: usize,
}

/// Mean of `f_max` over every object and run. Every object must have the
/// same set of runs.
pub fn final_f1(entries: &[FmaxEntry]) -> Result<FinalScore, EvalError> {
    let mut grid: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
    for e in entries {
        if grid.entry(e.object).or_default().insert(e.run, e.f_max).is_some() {
            return Err(EvalError::DuplicateEntry { object: e.object, run: e.run });
        }
    }
    let runs: Vec<u32> = {
        let mut all: Vec<u32> = grid.values().flat_map(|r| r.keys().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    };
    if runs.is_empty() {
        return Err(EvalError::Empty);
    }
    for (&object, per_run) in &grid {
        if let Some(&run) = runs.iter().find(|r| !per_run.contains_key(r)) {
            return Err(EvalError::IncompleteGrid { object, run });
        }
    }
    let total = (grid.len() * runs.len()) as f64;
    let sum: f64 = grid.values().map(|r| r.values().sum::<f64>()).sum();
    let f_final = sum / total;
    let var = grid.values().flat_map(|r| r.values()).map(|v| (v - f_final) * (v - f_final)).sum::<f64>() / total;
    Ok(FinalScore { f_final, std: var.sqrt(), objects: grid.len(), runs: runs.len() })
}

/// Per-pixel share of frames in which some box covers the pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl HeatGrid {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Box coverage over `frames`, each holding the boxes annotated in it.
pub fn bbox_distribution(frames: &[Vec<BoundingBox>], width: u32, height: u32) -> Result<HeatGrid, EvalError> {
    if width == 0 || height == 0 {
        return Err(EvalError::ImageSize);
    }
    let (w, h) = (width as usize, height as usize);
    let mut counts = vec![0u32; w * h];
    let mut seen = vec![u32::MAX; w * h];
    for (fi, boxes) in frames.iter().enumerate() {
        for b in boxes {
            // pixel centers at integer coordinates in [x, x + w)
            let x0 = b.x.ceil().max(0.0) as usize;
            let y0 = b.y.ceil().max(0.0) as usize;
            let x1 = (b.right().ceil().max(0.0) as usize).min(w);
            let y1 = (b.bottom().ceil().max(0.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * w + x;
                    if seen[i] != fi as u32 {
                        seen[i] = fi as u32;
                        counts[i] += 1;
                    }
                }
            }
        }
    }
    let n = frames.len().max(1) as f64;
    Ok(HeatGrid { width, height, values: counts.into_iter().map(|c| c as f64 / n).collect() })
}

/// Per-sequence evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub sequence_id: String,
    pub f_final: f64,
    pub std: f64,
    /// `f_max` per object, indexed by run.
    pub f_max: BTreeMap<u32, Vec<f64>>,
}

impl SequenceReport {
    pub fn from_entries(sequence_id: impl Into<String>, entries: &[FmaxEntry]) -> Result<Self, EvalError> {
        let score = final_f1(entries)?;
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| (e.object, e.run));
        let mut f_max: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for e in sorted {
            f_max.entry(e.object).or_default().push(e.f_max);
        }
        Ok(Self { sequence_id: sequence_id.into(), f_final: score.f_final, std: score.std, f_max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h)
    }

    fn frame(i: u32, bbox: Option<BoundingBox>, confidence: f64) -> RecordFrame {
        RecordFrame { frame: i, bbox, confidence, occluded: false, position: None }
    }

    fn toy() -> (TrackRecord, Vec<Option<BoundingBox>>) {
        let g = b(0.0, 0.0, 2.0, 2.0);
        let truth = vec![Some(g), Some(g), None, Some(g)];
        let rec = TrackRecord::from_frames(
            "toy",
            0,
            0,
            vec![frame(0, Some(g), 0.9), frame(1, Some(b(1.0, 0.0, 2.0, 2.0)), 0.6), frame(2, Some(g), 0.8), frame(3, None, 0.0)],
        )
        .unwrap();
        (rec, truth)
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &b(1.0, 0.0, 2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou_opt(Some(&a), None), 0.0);
    }

    #[test]
    fn toy_sequence() {
        let (rec, truth) = toy();
        let c = metric_curve(&rec, &truth).unwrap();
        assert_eq!(c.thresholds[0], 0.0);
        assert!((c.precision[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.recall[0] - 4.0 / 9.0).abs() < 1e-15);
        assert!((c.f1[0] - 8.0 / 15.0).abs() < 1e-15);
        assert_eq!(c.thresholds, vec![0.0, 0.6, 0.8, 0.9, 1.0]);
        let lt = metric_curve_with(&rec, &truth, PrecisionMode::PredictionPresent).unwrap();
        assert!((lt.precision[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_absent_trackers() {
        let g = b(3.0, 3.0, 4.0, 4.0);
        let truth = vec![Some(g); 5];
        let perfect = TrackRecord::from_frames("s", 0, 0, (0..5).map(|i| frame(i, Some(g), 1.0)).collect()).unwrap();
        let c = metric_curve(&perfect, &truth).unwrap();
        assert!(c.f1.iter().all(|f| *f == 1.0));
        let absent = TrackRecord::from_frames("s", 0, 0, (0..5).map(RecordFrame::absent).collect()).unwrap();
        let c = metric_curve(&absent, &truth).unwrap();
        assert!(c.recall.iter().chain(&c.f1).all(|v| *v == 0.0));
    }

    #[test]
    fn record_validation() {
        let mut r = TrackRecord::new("s", 1, 0);
        r.push(frame(3, None, 0.5)).unwrap();
        assert!(matches!(r.push(frame(3, None, 0.5)), Err(EvalError::NonMonotonicFrames { .. })));
        assert!(matches!(r.push(frame(4, None, 1.5)), Err(EvalError::ConfidenceOutOfRange(_))));
        assert!(metric_curve(&r, &[]).is_err());
    }

    #[test]
    fn final_score_examples() {
        let e = |object, run, f_max| FmaxEntry { object, run, f_max };
        let ones = final_f1(&[e(0, 0, 1.0), e(0, 1, 1.0)]).unwrap();
        assert_eq!((ones.f_final, ones.std), (1.0, 0.0));
        let half = final_f1(&[e(0, 0, 1.0), e(0, 1, 1.0), e(1, 0, 0.0), e(1, 1, 0.0)]).unwrap();
        assert_eq!(half.f_final, 0.5);
        assert_eq!(half.std, 0.5);
        assert_eq!(final_f1(&[e(0, 0, 1.0), e(1, 1, 1.0)]).unwrap_err(), EvalError::IncompleteGrid { object: 0, run: 1 });
        assert!(matches!(final_f1(&[e(0, 0, 1.0), e(0, 0, 1.0)]), Err(EvalError::DuplicateEntry { .. })));
        assert_eq!(final_f1(&[]).unwrap_err(), EvalError::Empty);
    }

    #[test]
    fn final_score_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut entries = Vec::new();
        let mut brute = 0.0;
        for o in 0..7 {
            let mut inner = 0.0;
            for r in 0..5 {
                let v: f64 = rng.random();
                inner += v;
                entries.push(FmaxEntry { object: o, run: r, f_max: v });
            }
            brute += inner;
        }
        let got = final_f1(&entries).unwrap();
        assert!((got.f_final - brute / 35.0).abs() < 1e-15);
    }

    #[test]
    fn heat_grid_examples() {
        let full = vec![vec![b(0.0, 0.0, 8.0, 6.0)]; 3];
        assert!(bbox_distribution(&full, 8, 6).unwrap().values.iter().all(|v| *v == 1.0));
        let one = bbox_distribution(&[vec![b(2.0, 1.0, 3.0, 2.0)]], 8, 6).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let inside = (2..5).contains(&x) && (1..3).contains(&y);
                assert_eq!(one.get(x, y), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn heat_grid_matches_rasterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames: Vec<Vec<BoundingBox>> = (0..20)
            .map(|_| {
                (0..rng.random_range(0..3))
                    .map(|_| b(rng.random_range(-5.0..30.0), rng.random_range(-5.0..20.0), rng.random_range(0.5..12.0), rng.random_range(0.5..9.0)))
                    .collect()
            })
            .collect();
        let grid = bbox_distribution(&frames, 32, 24).unwrap();
        for y in 0..24 {
            for x in 0..32 {
                let (px, py) = (x as f64, y as f64);
                let hits = frames.iter().filter(|bs| bs.iter().any(|b| px >= b.x && px < b.right() && py >= b.y && py < b.bottom())).count();
                assert_eq!(grid.get(x, y), hits as f64 / 20.0);
            }
        }
    }

    fn arb_record() -> impl Strategy<Value = (TrackRecord, Vec<Option<BoundingBox>>)> {
        let row = (
            prop::option::of((0.0..50.0f64, 0.0..50.0f64, 1.0..20.0f64, 1.0..20.0f64)),
            prop::option::of((0.0..50.0f64, 0.0..50.0f64, 1.0..20.0f64, 1.0..20.0f64)),
            prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 0.7, 0.9, 1.0]),
        );
        prop::collection::vec(row, 1..30).prop_map(|rows| {
            let mut rec = TrackRecord::new("p", 0, 0);
            let mut truth = Vec::new();
            for (i, (a, g, c)) in rows.into_iter().enumerate() {
                rec.push(frame(i as u32, a.map(|(x, y, w, h)| b(x, y, w, h)), c)).unwrap();
                truth.push(g.map(|(x, y, w, h)| b(x, y, w, h)));
            }
            (rec, truth)
        })
    }

    proptest! {
        #[test]
        fn curve_invariants((rec, truth) in arb_record()) {
            let c = metric_curve(&rec, &truth).unwrap();
            for w in c.recall.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for i in 0..c.thresholds.len() {
                let (p, r, f) = (c.precision[i], c.recall[i], c.f1[i]);
                prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&f));
                prop_assert!(f <= p.max(r) + 1e-12);
            }
            prop_assert_eq!(c.f_max, c.f1.iter().copied().fold(0.0, f64::max));
        }

        #[test]
        fn sparse_thresholds_give_exact_fmax((rec, truth) in arb_record()) {
            let c = metric_curve(&rec, &truth).unwrap();
            // dense sweep between the observed levels never beats the sparse maximum
            let n_truth = truth.iter().filter(|g| g.is_some()).count();
            for k in 0..=100 {
                let tau = k as f64 / 100.0;
                let (mut sum, mut n) = (0.0, 0);
                for (f, g) in rec.frames().iter().zip(&truth) {
                    if f.bbox.is_some() && f.confidence >= tau {
                        sum += iou_opt(f.bbox.as_ref(), g.as_ref());
                        if g.is_some() { n += 1; }
                    }
                }
                let pr = if n > 0 { sum / n as f64 } else { 0.0 };
                let re = if n_truth > 0 { sum / n_truth as f64 } else { 0.0 };
                prop_assert!(f_score(pr, re) <= c.f_max + 1e-12);
            }
        }

        #[test]
        fn final_score_is_permutation_invariant(values in prop::collection::vec(0.0..1.0f64, 12), seed in any::<u64>()) {
            let entries: Vec<FmaxEntry> = values.iter().enumerate().map(|(i, v)| FmaxEntry { object: (i / 4) as u32, run: (i % 4) as u32, f_max: *v }).collect();
            let mut shuffled = entries.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert_eq!(final_f1(&entries).unwrap(), final_f1(&shuffled).unwrap());
        }
    }
}
