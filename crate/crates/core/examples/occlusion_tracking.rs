//! Tracks a vehicle through a full occlusion behind a canopy with all three
//! variants and prints the per-frame overlap with the ground truth.
//!
//! cargo run --release --example occlusion_tracking

use groundtrack::evaluation::{iou_opt, metric_curve};
use groundtrack::simulator::{generate_scenario, prepare_scenario, run_prepared, CameraMotion, EpisodeConfig, ScenarioConfig};
use groundtrack::tracker::Variant;

fn main() {
    let seed = 4;
    let cfg = ScenarioConfig { n_frames: 45, occlusion_windows: vec![(15, 27)], n_distractors: 1, camera_motion: CameraMotion::Follow, ..ScenarioConfig::default() };
    let scenario = generate_scenario(&cfg, seed).unwrap();
    let episode = EpisodeConfig::default();
    let prepared = prepare_scenario(&scenario, &episode).unwrap();
    let truth = prepared.ground_truth.boxes();

    let runs: Vec<_> = Variant::ALL.iter().map(|&v| (v, run_prepared(&prepared, v, &episode, seed, 0, 0).unwrap())).collect();
    print!("frame  hidden");
    for (v, _) in &runs {
        print!("  {:>5}", format!("iou {v}"));
    }
    println!();
    for t in (0..truth.len()).step_by(3) {
        print!("{t:>5}  {:>6}", if prepared.ground_truth.frames[t].occluded { "yes" } else { "" });
        for (_, ep) in &runs {
            let f = &ep.record.frames()[t];
            let shown = if f.occluded { "  occl".to_string() } else { format!("{:>6.2}", iou_opt(f.bbox.as_ref(), truth[t].as_ref())) };
            print!("  {shown:>6}");
        }
        println!();
    }
    for (v, ep) in &runs {
        println!("{v}: f_max {:.3}", metric_curve(&ep.record, &truth).unwrap().f_max);
    }
}
