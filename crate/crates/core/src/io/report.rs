use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, IoError, write_file};
use crate::evaluation::{FmaxEntry, MetricCurve, PrecisionMode, SequenceReport, TrackRecord, metric_curve_with};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub object_id: u32,
    pub run: u32,
    pub f_max: f64,
    pub curve: MetricCurve,
}

/// Evaluation of a set of track records against annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision_mode: PrecisionMode,
    pub summary: SequenceReport,
    pub records: Vec<RecordSummary>,
}

impl EvalReport {
    /// Scores every record on the annotations of its object. All records must
    /// come from one sequence and form a complete object × run grid.
    pub fn build(records: &[TrackRecord], annotations: &[Annotation], mode: PrecisionMode) -> Result<Self, IoError> {
        let first = records.first().ok_or_else(|| IoError::Validation("no records to evaluate".into()))?;
        if let Some(other) = records.iter().find(|r| r.sequence_id != first.sequence_id) {
            return Err(IoError::Validation(format!("records mix sequences `{}` and `{}`", first.sequence_id, other.sequence_id)));
        }
        let boxes: HashMap<(u32, u32), BoundingBox> = annotations.iter().map(|a| ((a.object_id, a.frame), a.bbox)).collect();
        let mut summaries = Vec::with_capacity(records.len());
        for r in records {
            let truth: Vec<Option<BoundingBox>> = r.frames().iter().map(|f| boxes.get(&(r.object_id, f.frame)).copied()).collect();
            let curve = metric_curve_with(r, &truth, mode).map_err(|e| IoError::Validation(format!("object {}, run {}: {e}", r.object_id, r.run)))?;
            summaries.push(RecordSummary { object_id: r.object_id, run: r.run, f_max: curve.f_max, curve });
        }
        summaries.sort_by_key(|s| (s.object_id, s.run));
        let entries: Vec<FmaxEntry> = summaries.iter().map(|s| FmaxEntry { object: s.object_id, run: s.run, f_max: s.f_max }).collect();
        let summary = SequenceReport::from_entries(first.sequence_id.clone(), &entries).map_err(|e| IoError::Validation(e.to_string()))?;
        Ok(Self { precision_mode: mode, summary, records: summaries })
    }
}

pub fn save_report_json<T: Serialize>(report: &T, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, report)?;
        writeln!(out)
    })
}

/// One row per curve point: `object_id,run,threshold,precision,recall,f1,f_max`.
pub fn save_report_csv(report: &EvalReport, path: &Path) -> Result<(), IoError> {
    write_file(path, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["object_id", "run", "threshold", "precision", "recall", "f1", "f_max"])?;
        for r in &report.records {
            let c = &r.curve;
            for i in 0..c.thresholds.len() {
                w.serialize((r.object_id, r.run, c.thresholds[i], c.precision[i], c.recall[i], c.f1[i], r.f_max))?;
            }
        }
        w.flush()
    })
}
