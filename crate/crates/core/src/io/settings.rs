//! `key = value` run settings shared by every CLI command.
//!
//! One file may mix scenario, tracker, observation and run keys; unknown
//! keys are an error so typos do not pass silently.

use std::path::Path;

use super::{IoError, KeyValues};
use crate::appearance::OcclusionResponse;
use crate::evaluation::PrecisionMode;
use crate::simulator::{CameraMotion, EpisodeConfig, ScenarioConfig};
use crate::tracker::{Anchor, Variant};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    /// Start from [`ScenarioConfig::benchmark`] instead of the defaults.
    pub benchmark_scenario: bool,
    pub scenario: ScenarioOverrides,
    pub episode: EpisodeConfig,
    pub seed: Option<u64>,
    pub runs: Option<u32>,
    pub variant: Option<Variant>,
    pub object: Option<u32>,
    pub scenarios: Option<usize>,
}

/// Scenario keys found in a settings file, applied on top of a base config.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioOverrides {
    kv: KeyValues,
}

fn range<T: std::str::FromStr + Copy>(kv: &mut KeyValues, key: &str, slot: &mut (T, T)) -> Result<(), IoError> {
    if let Some(v) = kv.take_list::<T>(key)? {
        match v.as_slice() {
            [a, b] => *slot = (*a, *b),
            _ => return Err(IoError::schema(kv.path(), format!("`{key}` needs two values"))),
        }
    }
    Ok(())
}

fn parse_with<T>(kv: &mut KeyValues, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>, IoError> {
    match kv.take::<String>(key)? {
        None => Ok(None),
        Some(raw) => f(&raw).map(Some).ok_or_else(|| IoError::schema(kv.path(), format!("bad value `{raw}` for `{key}`"))),
    }
}

fn windows(raw: &str) -> Option<Vec<(u32, u32)>> {
    raw.split_whitespace()
        .map(|w| {
            let (a, b) = w.split_once('-')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect()
}

const SCENARIO_KEYS: [&str; 21] = [
    "n_frames",
    "altitude_range",
    "pitch_range_deg",
    "object_speed_range",
    "object_extent",
    "stop_and_go",
    "n_distractors",
    "distractor_gain",
    "distractor_distance_range",
    "distractor_speed_range",
    "distractor_frame_range",
    "occlusion_windows",
    "camera_motion",
    "camera_speed",
    "camera_maneuver_persists",
    "distractor_min_relative_speed",
    "canopy_height_range",
    "image_width",
    "image_height",
    "focal",
    "cloud_spacing",
];

impl ScenarioOverrides {
    /// Applies the stored keys to `base`.
    pub fn apply(&self, base: ScenarioConfig) -> Result<ScenarioConfig, IoError> {
        let mut kv = self.kv.clone();
        let mut c = base;
        kv.take_into("n_frames", &mut c.n_frames)?;
        range(&mut kv, "altitude_range", &mut c.altitude_range)?;
        range(&mut kv, "pitch_range_deg", &mut c.pitch_range_deg)?;
        range(&mut kv, "object_speed_range", &mut c.object_speed_range)?;
        kv.take_into("object_extent", &mut c.object_extent)?;
        kv.take_into("stop_and_go", &mut c.stop_and_go)?;
        kv.take_into("n_distractors", &mut c.n_distractors)?;
        kv.take_into("distractor_gain", &mut c.distractor_gain)?;
        range(&mut kv, "distractor_distance_range", &mut c.distractor_distance_range)?;
        range(&mut kv, "distractor_speed_range", &mut c.distractor_speed_range)?;
        range(&mut kv, "distractor_frame_range", &mut c.distractor_frame_range)?;
        if let Some(w) = parse_with(&mut kv, "occlusion_windows", windows)? {
            c.occlusion_windows = w;
        }
        if let Some(m) = parse_with(&mut kv, "camera_motion", |s| match s {
            "static" => Some(CameraMotion::Static),
            "follow" => Some(CameraMotion::Follow),
            _ => None,
        })? {
            c.camera_motion = m;
        }
        kv.take_into("camera_speed", &mut c.camera_speed)?;
        kv.take_into("camera_maneuver_persists", &mut c.camera_maneuver_persists)?;
        kv.take_into("distractor_min_relative_speed", &mut c.distractor_min_relative_speed)?;
        range(&mut kv, "canopy_height_range", &mut c.canopy_height_range)?;
        kv.take_into("image_width", &mut c.image_width)?;
        kv.take_into("image_height", &mut c.image_height)?;
        kv.take_into("focal", &mut c.focal)?;
        kv.take_into("cloud_spacing", &mut c.cloud_spacing)?;
        kv.finish()?;
        Ok(c)
    }
}

/// Writes `c` in the settings format; reading it back reproduces `c`.
pub fn scenario_to_text(c: &ScenarioConfig) -> String {
    let pair = |(a, b): (f64, f64)| format!("{a} {b}");
    let mut kv = KeyValues::new();
    kv.set("n_frames", c.n_frames);
    kv.set("altitude_range", pair(c.altitude_range));
    kv.set("pitch_range_deg", pair(c.pitch_range_deg));
    kv.set("object_speed_range", pair(c.object_speed_range));
    kv.set("object_extent", c.object_extent);
    kv.set("stop_and_go", c.stop_and_go);
    kv.set("n_distractors", c.n_distractors);
    kv.set("distractor_gain", c.distractor_gain);
    kv.set("distractor_distance_range", pair(c.distractor_distance_range));
    kv.set("distractor_speed_range", pair(c.distractor_speed_range));
    kv.set("distractor_frame_range", format!("{} {}", c.distractor_frame_range.0, c.distractor_frame_range.1));
    kv.set("occlusion_windows", c.occlusion_windows.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(" "));
    kv.set("camera_motion", if c.camera_motion == CameraMotion::Static { "static" } else { "follow" });
    kv.set("camera_speed", c.camera_speed);
    kv.set("camera_maneuver_persists", c.camera_maneuver_persists);
    kv.set("distractor_min_relative_speed", c.distractor_min_relative_speed);
    kv.set("canopy_height_range", pair(c.canopy_height_range));
    kv.set("image_width", c.image_width);
    kv.set("image_height", c.image_height);
    kv.set("focal", c.focal);
    kv.set("cloud_spacing", c.cloud_spacing);
    kv.to_text()
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_kv(KeyValues::load(path)?)
    }

    pub fn from_kv(mut kv: KeyValues) -> Result<Self, IoError> {
        let mut s = Settings { seed: kv.take("seed")?, runs: kv.take("runs")?, object: kv.take("object")?, scenarios: kv.take("scenarios")?, ..Default::default() };
        s.variant = parse_with(&mut kv, "variant", |v| v.parse().ok())?;
        s.benchmark_scenario = match kv.take::<String>("scenario_preset")?.as_deref() {
            None | Some("default") => false,
            Some("benchmark") => true,
            Some(other) => return Err(IoError::schema(kv.path(), format!("unknown scenario_preset `{other}`"))),
        };

        let mut scenario = KeyValues::parse("", kv.path())?;
        for key in SCENARIO_KEYS {
            if let Some(v) = kv.take::<String>(key)? {
                scenario.set(key, v);
            }
        }
        s.scenario = ScenarioOverrides { kv: scenario };
        s.scenario.apply(ScenarioConfig::default())?;

        let t = &mut s.episode.tracker;
        kv.take_into("particles", &mut t.particles)?;
        kv.take_into("search_scale", &mut t.search_scale)?;
        kv.take_into("redistribution", &mut t.redistribution)?;
        kv.take_into("resample_ratio", &mut t.resample_ratio)?;
        kv.take_into("depth_tol", &mut t.depth_tol)?;
        kv.take_into("link_radius_rel", &mut t.link_radius_rel)?;
        kv.take_into("flatness_ratio", &mut t.flatness_ratio)?;
        kv.take_into("visibility_threshold", &mut t.visibility_threshold)?;
        kv.take_into("reappear_threshold", &mut t.reappear_threshold)?;
        kv.take_into("reappear_radius_rel", &mut t.reappear_radius_rel)?;
        kv.take_into("occluded_share", &mut t.occluded_share)?;
        kv.take_into("noise_pos_rel", &mut t.noise_pos_rel)?;
        kv.take_into("noise_vel_ratio", &mut t.noise_vel_ratio)?;
        kv.take_into("cluster_weight_floor", &mut t.cluster_weight_floor)?;
        kv.take_into("velocity_window", &mut t.velocity_window)?;
        kv.take_into("anchor_particle_velocity", &mut t.anchor_particle_velocity)?;
        kv.take_into("min_cluster_weight", &mut t.min_cluster_weight)?;
        kv.take_into("dt", &mut t.dt)?;
        if let Some(a) = parse_with(&mut kv, "anchor", |v| match v {
            "center" => Some(Anchor::Center),
            "bottom_center" => Some(Anchor::BottomCenter),
            _ => None,
        })? {
            t.anchor = a;
        }

        let p = &mut s.episode.provider;
        kv.take_into("peak_sigma_rel", &mut p.peak_sigma_rel)?;
        kv.take_into("min_peak_sigma", &mut p.min_peak_sigma)?;
        kv.take_into("noise_sigma", &mut p.noise_sigma)?;
        if let Some(r) = parse_with(&mut kv, "occlusion_response", |v| match v.split_once(':') {
            None if v == "attenuate" => Some(OcclusionResponse::Attenuate),
            None if v == "flat" => Some(OcclusionResponse::default()),
            Some(("flat", level)) => level.parse().ok().map(|level| OcclusionResponse::Flat { level }),
            _ => None,
        })? {
            p.occlusion_response = r;
        }
        kv.take_into("visible_cutoff", &mut s.episode.visible_cutoff)?;
        if let Some(m) = parse_with(&mut kv, "precision", |v| match v {
            "both_present" => Some(PrecisionMode::BothPresent),
            "prediction_present" => Some(PrecisionMode::PredictionPresent),
            _ => None,
        })? {
            s.episode.precision = m;
        }
        kv.finish()?;
        Ok(s)
    }

    /// Scenario configuration for `seed`.
    pub fn scenario_config(&self, seed: u64) -> Result<ScenarioConfig, IoError> {
        let base = if self.benchmark_scenario { ScenarioConfig::benchmark(seed) } else { ScenarioConfig { seed, ..ScenarioConfig::default() } };
        self.scenario.apply(base)
    }
}
