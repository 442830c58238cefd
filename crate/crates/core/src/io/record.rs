//! Tracker output as CSV. Identity lines come first as comments:
//!
//! ```text
//! # sequence_id: scenario-7
//! # object_id: 0
//! # run: 2
//! frame,present,x,y,w,h,confidence,occluded_flag,xw,yw,zw
//! ```
//!
//! Absent boxes and positions leave their fields empty.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{IoError, read_text, write_file};
use crate::evaluation::{RecordFrame, TrackRecord};
use crate::geometry::BoundingBox;

const HEADER: [&str; 11] = ["frame", "present", "x", "y", "w", "h", "confidence", "occluded_flag", "xw", "yw", "zw"];

#[derive(Serialize, Deserialize)]
struct Row {
    frame: u32,
    present: u8,
    x: Option<f64>,
    y: Option<f64>,
    w: Option<f64>,
    h: Option<f64>,
    confidence: f64,
    occluded_flag: u8,
    xw: Option<f64>,
    yw: Option<f64>,
    zw: Option<f64>,
}

pub fn write_track_record(record: &TrackRecord, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# sequence_id: {}", record.sequence_id)?;
    writeln!(out, "# object_id: {}", record.object_id)?;
    writeln!(out, "# run: {}", record.run)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for f in record.frames() {
        let b = f.bbox;
        let p = f.position;
        w.serialize(Row {
            frame: f.frame,
            present: b.is_some() as u8,
            x: b.map(|b| b.x),
            y: b.map(|b| b.y),
            w: b.map(|b| b.w),
            h: b.map(|b| b.h),
            confidence: f.confidence,
            occluded_flag: f.occluded as u8,
            xw: p.map(|p| p.x),
            yw: p.map(|p| p.y),
            zw: p.map(|p| p.z),
        })?;
    }
    w.flush()
}

pub fn save_track_record(record: &TrackRecord, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| write_track_record(record, out))
}

pub fn load_track_record(path: &Path) -> Result<TrackRecord, IoError> {
    parse_track_record(&read_text(path)?, path)
}

pub fn parse_track_record(text: &str, path: &Path) -> Result<TrackRecord, IoError> {
    let mut sequence_id = None;
    let mut object_id = None;
    let mut run = None;
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        let Some(meta) = line.strip_prefix('#') else { break };
        skipped += line.len() + 1;
        let Some((key, value)) = meta.split_once(':') else { continue };
        let value = value.trim();
        let num = |v: &str| v.parse::<u32>().map_err(|_| IoError::parse(path, i + 1, format!("bad {} `{v}`", key.trim())));
        match key.trim() {
            "sequence_id" => sequence_id = Some(value.to_string()),
            "object_id" => object_id = Some(num(value)?),
            "run" => run = Some(num(value)?),
            _ => {}
        }
    }
    let header_line = text[..skipped.min(text.len())].lines().count() + 1;
    let missing = |what: &str| IoError::schema(path, format!("missing `# {what}:` line"));
    let mut record = TrackRecord::new(sequence_id.ok_or_else(|| missing("sequence_id"))?, object_id.ok_or_else(|| missing("object_id"))?, run.ok_or_else(|| missing("run"))?);

    let body = &text[skipped.min(text.len())..];
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| IoError::parse(path, header_line, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(IoError::schema(path, format!("expected header {}", HEADER.join(","))));
    }
    for rec in reader.records() {
        let offset = header_line - 1;
        let rec = rec.map_err(|e| IoError::parse(path, offset + e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = offset + rec.position().map_or(0, |p| p.line() as usize);
        let row: Row = rec.deserialize(None).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        let err = |m: &str| IoError::parse(path, line, m.to_string());
        if row.present > 1 || row.occluded_flag > 1 {
            return Err(err("present and occluded_flag must be 0 or 1"));
        }
        let bbox = match (row.present, row.x, row.y, row.w, row.h) {
            (1, Some(x), Some(y), Some(w), Some(h)) => Some(BoundingBox::new(x, y, w, h)),
            (0, None, None, None, None) => None,
            (1, ..) => return Err(err("present row needs x, y, w and h")),
            _ => return Err(err("absent row must leave the box empty")),
        };
        let position = match (row.xw, row.yw, row.zw) {
            (Some(x), Some(y), Some(z)) => Some(Vector3::new(x, y, z)),
            (None, None, None) => None,
            _ => return Err(err("xw, yw and zw must be all set or all empty")),
        };
        record
            .push(RecordFrame { frame: row.frame, bbox, confidence: row.confidence, occluded: row.occluded_flag == 1, position })
            .map_err(|e| IoError::parse(path, line, e.to_string()))?;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("rec.csv")
    }

    fn text(rows: &str) -> String {
        format!("# sequence_id: s\n# object_id: 1\n# run: 0\n{}\n{rows}", HEADER.join(","))
    }

    #[test]
    fn absent_rows_leave_fields_empty() {
        let mut rec = TrackRecord::new("s", 1, 0);
        rec.push(RecordFrame::absent(0)).unwrap();
        let mut buf = Vec::new();
        write_track_record(&rec, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.ends_with("0,0,,,,,0.0,0,,,\n"), "{s}");
        assert_eq!(parse_track_record(&s, p()).unwrap(), rec);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let err = parse_track_record(&text("0,1,0,0,1,1,1.5,0,,,\n"), p()).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 5, .. }), "{err}");
        assert!(parse_track_record(&text("0,1,0,0,1,1,-0.1,0,,,\n"), p()).is_err());
        assert!(parse_track_record(&text("0,1,0,0,1,1,NaN,0,,,\n"), p()).is_err());
    }

    #[test]
    fn rejects_schema_mismatches() {
        assert!(matches!(parse_track_record(&text("0,1,0,0,1,,0.5,0,,,\n"), p()), Err(IoError::Parse { .. })));
        assert!(matches!(parse_track_record(&text("0,0,1,,,,0.5,0,,,\n"), p()), Err(IoError::Parse { .. })));
        assert!(matches!(parse_track_record(&text("0,1,0,0,1,1,0.5,0,1,,\n"), p()), Err(IoError::Parse { .. })));
        assert!(matches!(parse_track_record(&text("1,0,,,,,0,0,,,\n0,0,,,,,0,0,,,\n"), p()), Err(IoError::Parse { line: 6, .. })));
        assert!(matches!(parse_track_record("frame,present\n", p()), Err(IoError::Schema { .. })));
        let wrong = "# sequence_id: s\n# object_id: 1\n# run: 0\nframe,x\n";
        assert!(matches!(parse_track_record(wrong, p()), Err(IoError::Schema { .. })));
    }

    /// Box, confidence, occluded flag, position.
    type RawFrame = (Option<(f64, f64, f64, f64)>, f64, bool, Option<(f64, f64, f64)>);

    fn arb_frame() -> impl Strategy<Value = RawFrame> {
        (
            prop::option::of((-1e4f64..1e4, -1e4f64..1e4, 0.0f64..1e3, 0.0f64..1e3)),
            0.0f64..=1.0,
            any::<bool>(),
            prop::option::of((-1e5f64..1e5, -1e5f64..1e5, -1e2f64..1e2)),
        )
    }

    proptest! {
        #[test]
        fn round_trip(frames in prop::collection::vec(arb_frame(), 0..40), run in 0u32..10) {
            let mut rec = TrackRecord::new("seq 0, north", 3, run);
            for (i, (b, c, o, p)) in frames.into_iter().enumerate() {
                rec.push(RecordFrame {
                    frame: i as u32 * 2,
                    bbox: b.map(|(x, y, w, h)| BoundingBox::new(x, y, w, h)),
                    confidence: c,
                    occluded: o,
                    position: p.map(|(x, y, z)| Vector3::new(x, y, z)),
                }).unwrap();
            }
            let mut buf = Vec::new();
            write_track_record(&rec, &mut buf).unwrap();
            prop_assert_eq!(parse_track_record(std::str::from_utf8(&buf).unwrap(), p()).unwrap(), rec);
        }
    }
}
