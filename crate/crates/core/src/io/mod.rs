//! File formats and dataset adapters.
//!
//! Everything is plain text except depth maps and score maps, which are
//! little-endian `f32` rasters. Loaders are pure functions of their input.

mod annotations;
mod colmap;
mod config;
mod manifest;
mod ply;
mod plot;
mod poses;
mod raster;
mod record;
mod report;
mod settings;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use annotations::{Annotation, load_annotations, parse_annotations, save_annotations, truth_boxes, write_annotations};
pub use colmap::{ColmapImport, import_colmap, parse_colmap};
pub use config::KeyValues;
pub use manifest::{ObservationSource, Sequence, SequenceManifest, load_observations, load_sequence, save_observations, save_scenario};
pub use ply::{load_ply, parse_ply, save_ply, write_ply};
pub use plot::{save_heat_grid_png, save_trajectory_png};
pub use poses::{ParsedPoses, load_poses, parse_poses, save_poses, write_poses};
pub use raster::{
    ReplayProvider, load_depth_map, load_score_map, read_depth_map, read_score_map, save_depth_map, save_score_map, write_depth_map,
    write_score_map,
};
pub use record::{load_track_record, parse_track_record, save_track_record, write_track_record};
pub use report::{EvalReport, RecordSummary, save_report_csv, save_report_json};
pub use settings::{ScenarioOverrides, Settings, scenario_to_text};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}:{line}: frame {frame} does not follow frame {previous}", path.display())]
    Order { path: PathBuf, line: usize, previous: u32, frame: u32 },
    #[error("{}:{line}: duplicate annotation for frame {frame}, object {object_id}", path.display())]
    Duplicate { path: PathBuf, line: usize, frame: u32, object_id: u32 },
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("invalid sequence: {0}")]
    Validation(String),
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }

    pub(crate) fn schema(path: &Path, message: impl Into<String>) -> Self {
        IoError::Schema { path: path.to_path_buf(), message: message.into() }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    std::fs::File::create(path).map(std::io::BufWriter::new).map_err(|e| IoError::io(path, e))
}

/// Writes through `f` into a new file at `path`.
pub(crate) fn write_file<F>(path: &Path, f: F) -> Result<(), IoError>
where
    F: FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
{
    use std::io::Write;
    let mut out = create_file(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(|e| IoError::io(path, e))
}

/// Parses one whitespace-separated field, naming it in the error.
pub(crate) fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: Option<&str>) -> Result<T, IoError> {
    let raw = raw.ok_or_else(|| IoError::parse(path, line, format!("missing field `{name}`")))?;
    raw.parse().map_err(|_| IoError::parse(path, line, format!("bad {name} `{raw}`")))
}
