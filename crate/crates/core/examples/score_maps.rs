//! Synthetic score maps: a target peak beside a distractor, then the same
//! search area with the target half and fully occluded. Writes the maps as
//! `.smap` rasters to a temporary directory.
//!
//! cargo run --example score_maps

use groundtrack::appearance::{synthetic_score_map, Observation, OcclusionResponse, SyntheticMapSpec};
use groundtrack::geometry::BoundingBox;
use groundtrack::io::{load_score_map, save_score_map};
use nalgebra::Vector2;

fn main() {
    let area = BoundingBox::new(100.0, 80.0, 120.0, 90.0);
    let target = Vector2::new(150.0, 120.0);
    let base = SyntheticMapSpec { noise_sigma: 0.02, occlusion_response: OcclusionResponse::Flat { level: 0.1 }, ..SyntheticMapSpec::new(target, 6.0) }
        .with_distractors(&[Vector2::new(195.0, 140.0)], 1.2);
    let dir = tempfile::tempdir().unwrap();

    println!("{:>9} {:>16} {:>8} {:>13}", "occluded", "argmax", "max", "peak/mean");
    for (i, occluded) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let map_spec = SyntheticMapSpec { occluded_fraction: occluded, ..base.clone() };
        let map = synthetic_score_map(&map_spec, &area, i as u32, 5).unwrap();
        let peak = map.argmax_pixel();
        println!("{occluded:>9.1} ({:>6.1}, {:>6.1}) {:>8.3} {:>13.2}", peak.x, peak.y, map.max(), map.peak_to_mean());
        let obs = Observation::new(map, BoundingBox::from_center(peak, 20.0, 15.0));
        let path = dir.path().join(format!("{i:06}.smap"));
        save_score_map(&obs, &path).unwrap();
        // the grid is stored as f32
        let back = load_score_map(&path).unwrap();
        let err = back.score_map.grid().iter().zip(obs.score_map.grid()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6 && back.proposal == obs.proposal);
    }
    println!("maps written to and reread from {}", dir.path().display());
}
