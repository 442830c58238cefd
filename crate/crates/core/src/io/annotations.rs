//! Per-frame box annotations: CSV with header `frame,object_id,x,y,w,h,occluded`.
//! A row means the object is visible in that frame; `occluded = 1` marks a
//! partially hidden object.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IoError, read_text, write_file};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub frame: u32,
    pub object_id: u32,
    pub bbox: BoundingBox,
    pub occluded: bool,
}

#[derive(Serialize, Deserialize)]
struct Row {
    frame: u32,
    object_id: u32,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    occluded: u8,
}

const HEADER: [&str; 7] = ["frame", "object_id", "x", "y", "w", "h", "occluded"];

pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>, IoError> {
    parse_annotations(&read_text(path)?, path)
}

pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<Annotation>, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| IoError::parse(path, 1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(IoError::schema(path, format!("expected header {}", HEADER.join(","))));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IoError::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row: Row = rec.deserialize(None).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        if row.occluded > 1 {
            return Err(IoError::parse(path, line, format!("occluded must be 0 or 1, got {}", row.occluded)));
        }
        let bbox = BoundingBox::new(row.x, row.y, row.w, row.h);
        if ![row.x, row.y, row.w, row.h].iter().all(|v| v.is_finite()) || bbox.w < 0.0 || bbox.h < 0.0 {
            return Err(IoError::parse(path, line, "box must be finite with non-negative size"));
        }
        if !seen.insert((row.frame, row.object_id)) {
            return Err(IoError::Duplicate { path: path.to_path_buf(), line, frame: row.frame, object_id: row.object_id });
        }
        out.push(Annotation { frame: row.frame, object_id: row.object_id, bbox, occluded: row.occluded == 1 });
    }
    Ok(out)
}

pub fn write_annotations(annotations: &[Annotation], out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for a in annotations {
        let b = a.bbox;
        w.serialize(Row { frame: a.frame, object_id: a.object_id, x: b.x, y: b.y, w: b.w, h: b.h, occluded: a.occluded as u8 })?;
    }
    w.flush()
}

pub fn save_annotations(annotations: &[Annotation], path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_annotations(annotations, out))
}

/// Ground-truth boxes of one object over `n_frames` frames.
pub fn truth_boxes(annotations: &[Annotation], object_id: u32, n_frames: usize) -> Vec<Option<BoundingBox>> {
    let mut out = vec![None; n_frames];
    for a in annotations.iter().filter(|a| a.object_id == object_id) {
        if let Some(slot) = out.get_mut(a.frame as usize) {
            *slot = Some(a.bbox);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("ann.csv")
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_annotations("frame,object_id,x,y,w,h,occluded\n", p()).unwrap().is_empty());
        let mut buf = Vec::new();
        write_annotations(&[], &mut buf).unwrap();
        assert!(parse_annotations(std::str::from_utf8(&buf).unwrap(), p()).unwrap().is_empty());
    }

    #[test]
    fn one_row() {
        let a = parse_annotations("frame,object_id,x,y,w,h,occluded\n3,7,10.5,20,4,6,1\n", p()).unwrap();
        assert_eq!(a, vec![Annotation { frame: 3, object_id: 7, bbox: BoundingBox::new(10.5, 20.0, 4.0, 6.0), occluded: true }]);
    }

    #[test]
    fn rejects_duplicates_and_bad_flags() {
        let dup = "frame,object_id,x,y,w,h,occluded\n1,2,0,0,1,1,0\n1,3,0,0,1,1,0\n1,2,5,5,1,1,0\n";
        assert!(matches!(parse_annotations(dup, p()), Err(IoError::Duplicate { line: 4, frame: 1, object_id: 2, .. })));
        assert!(matches!(parse_annotations("frame,object_id,x,y,w,h,occluded\n1,2,0,0,1,1,2\n", p()), Err(IoError::Parse { line: 2, .. })));
        assert!(matches!(parse_annotations("frame,id,x,y,w,h,occluded\n", p()), Err(IoError::Schema { .. })));
    }

    #[test]
    fn round_trip_and_truth_boxes() {
        let anns: Vec<Annotation> = (0..6)
            .map(|i| Annotation { frame: i / 2, object_id: i % 2, bbox: BoundingBox::new(i as f64 * 1.1, 0.3, 5.0, 2.25), occluded: i == 3 })
            .collect();
        let mut buf = Vec::new();
        write_annotations(&anns, &mut buf).unwrap();
        assert_eq!(parse_annotations(std::str::from_utf8(&buf).unwrap(), p()).unwrap(), anns);
        let boxes = truth_boxes(&anns, 1, 4);
        assert_eq!(boxes.iter().filter(|b| b.is_some()).count(), 3);
        assert_eq!(boxes[3], None);
    }
}
