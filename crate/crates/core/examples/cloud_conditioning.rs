//! Cleans a noisy reconstruction and fits the ground plane: near-camera
//! points, statistical outliers and points below the ground are removed.
//!
//! cargo run --release --example cloud_conditioning

use groundtrack::geometry::{look_down_rotation, CameraFrame, Intrinsics, RigidTransform};
use groundtrack::scene::{condition_cloud, ConditioningParams, PointCloud};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // a slightly tilted ground with some buildings, plus junk
    let tilt = Vector3::new(0.03, -0.02, 1.0).normalize();
    let height = |x: f64, y: f64| -(tilt.x * x + tilt.y * y) / tilt.z;
    let mut points = Vec::new();
    for _ in 0..3000 {
        let (x, y) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        points.push(Vector3::new(x, y, height(x, y) + rng.random_range(-0.05..0.05)));
    }
    for _ in 0..600 {
        let (x, y) = (rng.random_range(10.0..20.0), rng.random_range(-5.0..5.0));
        points.push(Vector3::new(x, y, height(x, y) + rng.random_range(0.0..8.0)));
    }
    for _ in 0..150 {
        points.push(Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-30.0..60.0)));
    }
    let cloud = PointCloud::new(points).unwrap();

    let k = Intrinsics::centered(700.0, 640, 480).unwrap();
    let frames: Vec<CameraFrame> = (0..5)
        .map(|i| {
            let pose = RigidTransform::new(look_down_rotation(0.0, 1.0), Vector3::new(-20.0 + 10.0 * i as f64, -30.0, 35.0)).unwrap();
            CameraFrame::new(i, pose, k)
        })
        .collect();

    let params = ConditioningParams::for_cloud(&cloud);
    let (clean, plane) = condition_cloud(&cloud, &frames, &params).unwrap();
    let angle = plane.normal.dot(&tilt).clamp(-1.0, 1.0).acos().to_degrees();
    println!("input points:  {}", cloud.len());
    println!("kept points:   {}", clean.len());
    println!("plane normal:  {:.4?} ({angle:.3}° from truth)", plane.normal.as_slice());
    println!("plane offset:  {:.4}", plane.offset);
}
