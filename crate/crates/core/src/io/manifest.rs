//! Sequence manifests and the on-disk sequence layout.
//!
//! A manifest is a `key = value` file:
//!
//! ```text
//! sequence_id = scenario-7
//! n_frames = 50
//! width = 480
//! height = 360
//! fps = 30
//! poses = poses.txt
//! cloud = cloud.ply
//! depth_maps = depth          # optional: <dir>/<frame:06>.dmap
//! annotations = annotations.csv
//! observations = observations.json   # synthetic observation truth, or
//! score_maps = maps                  # <dir>/<object>/<frame:06>.smap
//! plane = 0 0 1 0             # optional: n · p = d, else fitted to the cloud
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    Annotation, IoError, KeyValues, ReplayProvider, load_annotations, load_depth_map, load_ply, load_poses, save_annotations, save_depth_map, save_ply,
    save_poses, write_file,
};
use crate::appearance::{Bump, FrameTruth, ScoreMapProvider, SyntheticParams, SyntheticProvider, frame_seed};
use crate::evaluation::{RecordFrame, TrackRecord};
use crate::geometry::{BoundingBox, CameraFrame, GroundPlane};
use crate::scene::{ConditioningParams, DEFAULT_SPLAT_RADIUS, PointCloud, condition_cloud, render_depth_map};
use crate::simulator::{EpisodeConfig, PreparedScenario, Scenario};
use crate::tracker::{FrameContext, TrackerConfig, Variant, initialize, step};

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub n_frames: u32,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub poses: PathBuf,
    pub cloud: PathBuf,
    pub depth_maps: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub score_maps: Option<PathBuf>,
    pub plane: Option<GroundPlane>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl SequenceManifest {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let mut kv = KeyValues::load(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let plane = match kv.take_list::<f64>("plane")? {
            None => None,
            Some(v) if v.len() == 4 => Some(GroundPlane::new(Vector3::new(v[0], v[1], v[2]), v[3]).map_err(|e| IoError::schema(path, e.to_string()))?),
            Some(_) => return Err(IoError::schema(path, "`plane` needs four values")),
        };
        let m = Self {
            sequence_id: kv.require("sequence_id")?,
            n_frames: kv.require("n_frames")?,
            width: kv.require("width")?,
            height: kv.require("height")?,
            fps: kv.take("fps")?.unwrap_or(30.0),
            poses: kv.require("poses")?,
            cloud: kv.require("cloud")?,
            depth_maps: kv.take("depth_maps")?,
            annotations: kv.take("annotations")?,
            observations: kv.take("observations")?,
            score_maps: kv.take("score_maps")?,
            plane,
            base_dir,
        };
        kv.finish()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let mut kv = KeyValues::new();
        kv.set("sequence_id", &self.sequence_id);
        kv.set("n_frames", self.n_frames);
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("fps", self.fps);
        kv.set("poses", self.poses.display());
        kv.set("cloud", self.cloud.display());
        let optional = [("depth_maps", &self.depth_maps), ("annotations", &self.annotations), ("observations", &self.observations), ("score_maps", &self.score_maps)];
        for (key, p) in optional {
            if let Some(p) = p {
                kv.set(key, p.display());
            }
        }
        if let Some(p) = &self.plane {
            kv.set("plane", format!("{} {} {} {}", p.normal.x, p.normal.y, p.normal.z, p.offset));
        }
        let text = kv.to_text();
        write_file(path, |out| out.write_all(text.as_bytes()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

/// Where a sequence's observations come from.
#[derive(Debug, Clone)]
pub enum ObservationSource {
    /// Per-object truth for the synthetic appearance model.
    Synthetic(BTreeMap<u32, Vec<FrameTruth>>),
    /// Directory of recorded score maps, one subdirectory per object.
    Recorded(PathBuf),
}

/// A loaded and validated sequence, ready for tracking.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub manifest: SequenceManifest,
    pub contexts: Vec<FrameContext>,
    pub cloud: PointCloud,
    pub annotations: Vec<Annotation>,
    pub observations: Option<ObservationSource>,
}

/// Loads everything a manifest references and checks that the pieces agree
/// on frame count and image size.
pub fn load_sequence(manifest_path: &Path) -> Result<Sequence, IoError> {
    let m = SequenceManifest::load(manifest_path)?;
    let invalid = |msg: String| Err(IoError::Validation(format!("{}: {msg}", manifest_path.display())));
    let frames = load_poses(&m.resolve(&m.poses), m.width, m.height)?;
    if frames.len() != m.n_frames as usize {
        return invalid(format!("{} poses for {} frames", frames.len(), m.n_frames));
    }
    if let Some(bad) = frames.iter().enumerate().find(|(i, f)| f.frame_index != *i as u32) {
        return invalid(format!("pose {} has frame index {}; frames must be numbered 0..n", bad.0, bad.1.frame_index));
    }
    let cloud = load_ply(&m.resolve(&m.cloud))?;
    let plane = match m.plane {
        Some(p) => p,
        None => condition_cloud(&cloud, &frames, &ConditioningParams::for_cloud(&cloud)).map_err(|e| IoError::Validation(e.to_string()))?.1,
    };
    let depth_maps = match &m.depth_maps {
        Some(dir) => {
            let dir = m.resolve(dir);
            let count = std::fs::read_dir(&dir).map_err(|e| IoError::io(&dir, e))?.filter_map(Result::ok).filter(|e| e.path().extension().is_some_and(|x| x == "dmap")).count();
            if count != m.n_frames as usize {
                return invalid(format!("{count} depth maps for {} frames", m.n_frames));
            }
            frames.iter().map(|f| load_depth_map(&dir.join(format!("{:06}.dmap", f.frame_index)))).collect::<Result<Vec<_>, _>>()?
        }
        None => frames
            .iter()
            .map(|f| render_depth_map(&cloud, &plane, f, DEFAULT_SPLAT_RADIUS))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Validation(e.to_string()))?,
    };
    let contexts = frames
        .iter()
        .zip(depth_maps)
        .map(|(f, d)| {
            if d.frame_index != f.frame_index {
                return Err(IoError::Validation(format!("depth map for frame {} is labeled {}", f.frame_index, d.frame_index)));
            }
            FrameContext::new(*f, d, plane).map_err(|e| IoError::Validation(format!("frame {}: {e}", f.frame_index)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let annotations = match &m.annotations {
        Some(p) => load_annotations(&m.resolve(p))?,
        None => Vec::new(),
    };
    if let Some(a) = annotations.iter().find(|a| a.frame >= m.n_frames) {
        return invalid(format!("annotation for frame {} beyond {} frames", a.frame, m.n_frames));
    }
    let observations = match (&m.observations, &m.score_maps) {
        (Some(_), Some(_)) => return invalid("give either observations or score_maps, not both".into()),
        (Some(p), None) => {
            let truth = load_observations(&m.resolve(p))?;
            if let Some((o, t)) = truth.iter().find(|(_, t)| t.len() != m.n_frames as usize) {
                return invalid(format!("object {o} has observation truth for {} of {} frames", t.len(), m.n_frames));
            }
            Some(ObservationSource::Synthetic(truth))
        }
        (None, Some(p)) => Some(ObservationSource::Recorded(m.resolve(p))),
        (None, None) => None,
    };
    Ok(Sequence { manifest: m, contexts, cloud, annotations, observations })
}

impl Sequence {
    /// Object ids in the annotations, ascending.
    pub fn object_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.annotations.iter().map(|a| a.object_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn provider(&self, object_id: u32, params: SyntheticParams, seed: u64) -> Result<Box<dyn ScoreMapProvider>, IoError> {
        match &self.observations {
            Some(ObservationSource::Synthetic(truth)) => {
                let t = truth.get(&object_id).ok_or_else(|| IoError::Validation(format!("no observation truth for object {object_id}")))?;
                Ok(Box::new(SyntheticProvider::new(t.clone(), params, seed)))
            }
            Some(ObservationSource::Recorded(dir)) => Ok(Box::new(ReplayProvider::from_dir(&dir.join(object_id.to_string()))?)),
            None => Err(IoError::Validation("the manifest lists neither observations nor score_maps".into())),
        }
    }

    /// Tracks `object_id` from its first annotated frame to the end of the
    /// sequence. Run `run` draws its randomness from `seed` and `run`.
    pub fn track(&self, object_id: u32, variant: Variant, cfg: &EpisodeConfig, seed: u64, run: u32) -> Result<TrackRecord, IoError> {
        let start = self
            .annotations
            .iter()
            .filter(|a| a.object_id == object_id)
            .min_by_key(|a| a.frame)
            .ok_or_else(|| IoError::Validation(format!("object {object_id} is never annotated")))?;
        let run_seed = frame_seed(seed ^ (object_id as u64).rotate_left(32), run);
        let provider = self.provider(object_id, cfg.provider, run_seed)?;
        let tracker_cfg = TrackerConfig { seed: run_seed, ..cfg.tracker.clone() };
        let fail = |e: &dyn std::fmt::Display| IoError::Validation(format!("object {object_id}, run {run}: {e}"));
        let first = start.frame as usize;
        let mut state = initialize(&start.bbox, &self.contexts[first], &tracker_cfg, variant).map_err(|e| fail(&e))?;
        let mut record = TrackRecord::new(self.manifest.sequence_id.clone(), object_id, run);
        let push = |record: &mut TrackRecord, f: RecordFrame| record.push(f).map_err(|e| fail(&e));
        push(&mut record, RecordFrame { frame: start.frame, bbox: Some(start.bbox), confidence: 1.0, occluded: false, position: Some(state.estimate.position) })?;
        for ctx in &self.contexts[first + 1..] {
            let (next, out) = step(&state, ctx, provider.as_ref()).map_err(|e| fail(&e))?;
            push(
                &mut record,
                RecordFrame { frame: out.frame_index, bbox: out.bbox, confidence: out.confidence.clamp(0.0, 1.0), occluded: out.occluded, position: Some(out.state_3d.position) },
            )?;
            state = next;
        }
        Ok(record)
    }

    pub fn frames(&self) -> Vec<CameraFrame> {
        self.contexts.iter().map(|c| c.frame).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TruthRow {
    object_pixel: Option<[f64; 2]>,
    object_box: [f64; 4],
    occluded_fraction: f64,
    /// `[x, y, gain]` per distractor.
    distractors: Vec<[f64; 3]>,
}

impl From<&FrameTruth> for TruthRow {
    fn from(t: &FrameTruth) -> Self {
        let b = t.object_box;
        Self {
            object_pixel: t.object_pixel.map(|p| [p.x, p.y]),
            object_box: [b.x, b.y, b.w, b.h],
            occluded_fraction: t.occluded_fraction,
            distractors: t.distractors.iter().map(|d| [d.pixel.x, d.pixel.y, d.gain]).collect(),
        }
    }
}

impl From<TruthRow> for FrameTruth {
    fn from(r: TruthRow) -> Self {
        let [x, y, w, h] = r.object_box;
        Self {
            object_pixel: r.object_pixel.map(|[x, y]| Vector2::new(x, y)),
            object_box: BoundingBox::new(x, y, w, h),
            occluded_fraction: r.occluded_fraction,
            distractors: r.distractors.into_iter().map(|[x, y, gain]| Bump { pixel: Vector2::new(x, y), gain }).collect(),
        }
    }
}

/// Synthetic observation truth as JSON: object id to per-frame rows.
pub fn save_observations(truth: &BTreeMap<u32, Vec<FrameTruth>>, path: &Path) -> Result<(), IoError> {
    let rows: BTreeMap<u32, Vec<TruthRow>> = truth.iter().map(|(k, v)| (*k, v.iter().map(TruthRow::from).collect())).collect();
    super::save_report_json(&rows, path)
}

pub fn load_observations(path: &Path) -> Result<BTreeMap<u32, Vec<FrameTruth>>, IoError> {
    let text = super::read_text(path)?;
    let rows: BTreeMap<u32, Vec<TruthRow>> = serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.line(), e.to_string()))?;
    Ok(rows.into_iter().map(|(k, v)| (k, v.into_iter().map(FrameTruth::from).collect())).collect())
}

/// Writes a simulated scenario as a sequence directory and returns the path
/// of its manifest. The target is object 0.
pub fn save_scenario(s: &Scenario, prepared: &PreparedScenario, dir: &Path) -> Result<PathBuf, IoError> {
    let frames: Vec<CameraFrame> = prepared.contexts.iter().map(|c| c.frame).collect();
    save_poses(&frames, &dir.join("poses.txt"))?;
    save_ply(&s.cloud, &dir.join("cloud.ply"))?;
    for c in &prepared.contexts {
        save_depth_map(&c.depth_map, &dir.join("depth").join(format!("{:06}.dmap", c.frame.frame_index)))?;
    }
    let annotations: Vec<Annotation> = prepared
        .ground_truth
        .frames
        .iter()
        .enumerate()
        .filter_map(|(t, g)| g.bbox.map(|bbox| Annotation { frame: t as u32, object_id: 0, bbox, occluded: g.occluded }))
        .collect();
    save_annotations(&annotations, &dir.join("annotations.csv"))?;
    save_observations(&BTreeMap::from([(0, prepared.truth.clone())]), &dir.join("observations.json"))?;
    let manifest = SequenceManifest {
        sequence_id: format!("scenario-{}", s.seed),
        n_frames: s.n_frames,
        width: s.config.image_width,
        height: s.config.image_height,
        fps: 30.0,
        poses: "poses.txt".into(),
        cloud: "cloud.ply".into(),
        depth_maps: Some("depth".into()),
        annotations: Some("annotations.csv".into()),
        observations: Some("observations.json".into()),
        score_maps: None,
        plane: Some(s.plane),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.txt");
    manifest.save(&path)?;
    Ok(path)
}
