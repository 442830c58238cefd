//! Long-term tracking metrics on a hand-made four-frame record, and the
//! object-then-run averaged final score.
//!
//! cargo run --example metrics

use groundtrack::evaluation::{final_f1, metric_curve, FmaxEntry, RecordFrame, TrackRecord};
use groundtrack::geometry::BoundingBox;

fn main() {
    let g = BoundingBox::new(0.0, 0.0, 2.0, 2.0);
    let truth = vec![Some(g), Some(g), None, Some(g)];
    let frame = |i, bbox, confidence| RecordFrame { frame: i, bbox, confidence, occluded: false, position: None };
    let record = TrackRecord::from_frames(
        "toy",
        0,
        0,
        vec![frame(0, Some(g), 0.9), frame(1, Some(BoundingBox::new(1.0, 0.0, 2.0, 2.0)), 0.6), frame(2, Some(g), 0.8), frame(3, None, 0.0)],
    )
    .unwrap();

    let curve = metric_curve(&record, &truth).unwrap();
    println!("{:>9} {:>9} {:>9} {:>9}", "threshold", "precision", "recall", "f1");
    for i in 0..curve.thresholds.len() {
        println!("{:>9.2} {:>9.4} {:>9.4} {:>9.4}", curve.thresholds[i], curve.precision[i], curve.recall[i], curve.f1[i]);
    }
    println!("f_max {:.4}", curve.f_max);

    let grid = [[0.8, 0.6, 0.7], [0.5, 0.9, 0.4]];
    let entries: Vec<FmaxEntry> =
        grid.iter().enumerate().flat_map(|(o, runs)| runs.iter().enumerate().map(move |(r, &f)| FmaxEntry { object: o as u32, run: r as u32, f_max: f })).collect();
    let score = final_f1(&entries).unwrap();
    println!("f_final over {} objects x {} runs: {:.4} (std {:.4})", score.objects, score.runs, score.f_final, score.std);
}
