//! Backprojects pixels of an oblique aerial camera onto the ground plane and
//! projects them back.
//!
//! cargo run --example plane_geometry

use groundtrack::geometry::{
    backproject_to_plane, look_down_rotation, plane_depth_at_pixel, CameraFrame, GroundPlane, Intrinsics, RigidTransform,
};
use nalgebra::{Vector2, Vector3};

fn main() {
    let k = Intrinsics::centered(800.0, 640, 480).unwrap();
    // 40 m up, heading 30°, looking 55° below the horizon
    let pose = RigidTransform::new(look_down_rotation(30f64.to_radians(), 55f64.to_radians()), Vector3::new(0.0, 0.0, 40.0)).unwrap();
    let cam = CameraFrame::new(0, pose, k);
    let ground = GroundPlane::horizontal(0.0);
    let plane_cam = cam.plane_in_camera(&ground).unwrap();

    println!("{:>12} {:>28} {:>10} {:>12}", "pixel", "ground point", "depth", "reproj err");
    for pixel in [Vector2::new(320.0, 240.0), Vector2::new(40.0, 460.0), Vector2::new(600.0, 300.0), Vector2::new(320.0, 60.0)] {
        let p = backproject_to_plane(pixel, &cam, &ground).unwrap();
        let depth = plane_depth_at_pixel(pixel, &k, &plane_cam).unwrap();
        let (back, _) = cam.project(&p).unwrap();
        println!(
            "({:>4.0},{:>4.0}) ({:>8.2}, {:>8.2}, {:>6.2}) {depth:>10.3} {:>12.2e}",
            pixel.x,
            pixel.y,
            p.x,
            p.y,
            p.z,
            (back - pixel).norm()
        );
    }
    match backproject_to_plane(Vector2::new(320.0, -2000.0), &cam, &ground) {
        Ok(p) => println!("far above the horizon: {p:?}"),
        Err(e) => println!("far above the horizon: {e}"),
    }
}
