//! Binary rasters, all little-endian.
//!
//! Depth map (`.dmap`): `b"DMAP"`, `u32` version, `u32` width, `u32` height,
//! `u32` frame, then `width * height` row-major `f32` depths (`+inf` where
//! nothing was hit).
//!
//! Score map (`.smap`): `b"SMAP"`, `u32` version, `u32` frame, `i64` origin
//! x and y, `u32` width, `u32` height, `f64` proposal x, y, w, h, `f64`
//! confidence, then the row-major `f32` grid.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{IoError, write_file};
use crate::appearance::{Observation, ObserveError, ScoreMap, ScoreMapProvider};
use crate::geometry::BoundingBox;
use crate::scene::DepthMap;

const VERSION: u32 = 1;

fn bad(message: impl Into<String>) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, message.into())
}

fn read_array<const N: usize>(r: &mut dyn Read) -> std::io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut dyn Read) -> std::io::Result<u32> {
    read_array(r).map(u32::from_le_bytes)
}

fn read_i64(r: &mut dyn Read) -> std::io::Result<i64> {
    read_array(r).map(i64::from_le_bytes)
}

fn read_f64(r: &mut dyn Read) -> std::io::Result<f64> {
    read_array(r).map(f64::from_le_bytes)
}

fn read_f32s(r: &mut dyn Read, n: usize) -> std::io::Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let mut rest = Vec::new();
    if r.read_to_end(&mut rest)? > 0 {
        return Err(bad("trailing bytes after raster"));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn read_header(r: &mut dyn Read, magic: &[u8; 4]) -> std::io::Result<()> {
    if &read_array::<4>(r)? != magic {
        return Err(bad(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    match read_u32(r)? {
        VERSION => Ok(()),
        v => Err(bad(format!("unsupported version {v}"))),
    }
}

fn cells(width: u32, height: u32) -> std::io::Result<usize> {
    let n = width as u64 * height as u64;
    if n == 0 || n > 1 << 30 {
        return Err(bad(format!("implausible raster size {width}x{height}")));
    }
    Ok(n as usize)
}

pub fn write_depth_map(map: &DepthMap, out: &mut dyn Write) -> std::io::Result<()> {
    out.write_all(b"DMAP")?;
    for v in [VERSION, map.width, map.height, map.frame_index] {
        out.write_all(&v.to_le_bytes())?;
    }
    let bytes: Vec<u8> = map.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    out.write_all(&bytes)
}

pub fn read_depth_map(r: &mut dyn Read) -> std::io::Result<DepthMap> {
    read_header(r, b"DMAP")?;
    let (width, height, frame) = (read_u32(r)?, read_u32(r)?, read_u32(r)?);
    let values = read_f32s(r, cells(width, height)?)?;
    DepthMap::from_values(width, height, frame, values).map_err(|e| bad(e.to_string()))
}

pub fn save_depth_map(map: &DepthMap, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_depth_map(map, out))
}

pub fn load_depth_map(path: &Path) -> Result<DepthMap, IoError> {
    let mut f = std::fs::File::open(path).map(std::io::BufReader::new).map_err(|e| IoError::io(path, e))?;
    read_depth_map(&mut f).map_err(|e| raster_error(path, e))
}

fn raster_error(path: &Path, e: std::io::Error) -> IoError {
    match e.kind() {
        std::io::ErrorKind::InvalidData | std::io::ErrorKind::UnexpectedEof => IoError::schema(path, e.to_string()),
        _ => IoError::io(path, e),
    }
}

/// Scores are stored as `f32`, so values round to single precision.
pub fn write_score_map(obs: &Observation, out: &mut dyn Write) -> std::io::Result<()> {
    let map = &obs.score_map;
    let area = map.search_area();
    out.write_all(b"SMAP")?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&map.frame_index.to_le_bytes())?;
    out.write_all(&(area.x as i64).to_le_bytes())?;
    out.write_all(&(area.y as i64).to_le_bytes())?;
    out.write_all(&map.width().to_le_bytes())?;
    out.write_all(&map.height().to_le_bytes())?;
    let p = &obs.proposal;
    for v in [p.x, p.y, p.w, p.h, obs.confidence] {
        out.write_all(&v.to_le_bytes())?;
    }
    let bytes: Vec<u8> = map.grid().iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    out.write_all(&bytes)
}

pub fn read_score_map(r: &mut dyn Read) -> std::io::Result<Observation> {
    read_header(r, b"SMAP")?;
    let frame = read_u32(r)?;
    let origin = (read_i64(r)?, read_i64(r)?);
    let (width, height) = (read_u32(r)?, read_u32(r)?);
    let proposal = BoundingBox::new(read_f64(r)?, read_f64(r)?, read_f64(r)?, read_f64(r)?);
    let confidence = read_f64(r)?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(bad(format!("confidence {confidence} outside [0, 1]")));
    }
    let grid = read_f32s(r, cells(width, height)?)?.into_iter().map(f64::from).collect();
    let score_map = ScoreMap::new(frame, origin, width, height, grid).map_err(|e| bad(e.to_string()))?;
    Ok(Observation { score_map, proposal, confidence })
}

pub fn save_score_map(obs: &Observation, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_score_map(obs, out))
}

pub fn load_score_map(path: &Path) -> Result<Observation, IoError> {
    let mut f = std::fs::File::open(path).map(std::io::BufReader::new).map_err(|e| IoError::io(path, e))?;
    read_score_map(&mut f).map_err(|e| raster_error(path, e))
}

/// Replays recorded observations, e.g. score maps exported from an external
/// tracker. Each map keeps the search area it was recorded with; the area
/// requested by the caller is not used.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    observations: BTreeMap<u32, Observation>,
}

impl ReplayProvider {
    pub fn new(observations: impl IntoIterator<Item = Observation>) -> Self {
        Self { observations: observations.into_iter().map(|o| (o.score_map.frame_index, o)).collect() }
    }

    /// Loads every `*.smap` file in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, IoError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| IoError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "smap"))
            .collect();
        paths.sort();
        let observations = paths.iter().map(|p| load_score_map(p)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(observations))
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

impl ScoreMapProvider for ReplayProvider {
    fn observe(&self, frame_index: u32, _search_area: &BoundingBox) -> Result<Observation, ObserveError> {
        match self.observations.get(&frame_index) {
            Some(o) => Ok(o.clone()),
            None if self.observations.keys().next_back().is_none_or(|&last| frame_index > last) => Err(ObserveError::EndOfSequence(frame_index)),
            None => Err(ObserveError::InvalidMap(format!("no recorded map for frame {frame_index}"))),
        }
    }
}
