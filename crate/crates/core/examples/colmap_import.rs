//! Converts a COLMAP text export into the pose and PLY formats, then fits the
//! ground plane of the imported cloud. A tiny export is written first so the
//! example is self-contained; pass a directory to import a real one.
//!
//! cargo run --example colmap_import -- [colmap_text_dir]

use std::fmt::Write as _;
use std::path::PathBuf;

use groundtrack::io::{import_colmap, load_poses};
use groundtrack::scene::{condition_cloud, ConditioningParams};

fn write_demo_export(dir: &std::path::Path) {
    std::fs::write(dir.join("cameras.txt"), "# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n1 PINHOLE 640 480 700 700 320 240\n").unwrap();
    let mut images = String::from("# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n");
    // cameras 30 m above a flat field, looking straight down, moving along x
    for i in 0..4 {
        let x = 5.0 * i as f64;
        // camera_from_world with a 180° turn about x: (x, y, z) -> (x, -y, -z)
        writeln!(images, "{} 0 1 0 0 {} 0 30 1 frame_{i:03}.jpg\n", i + 1, -x).unwrap();
    }
    std::fs::write(dir.join("images.txt"), images).unwrap();
    let mut points = String::from("# POINT3D_ID X Y Z R G B ERROR TRACK[]\n");
    let mut id = 0;
    for gx in -20..=20 {
        for gy in -20..=20 {
            id += 1;
            let z = if (gx * 7 + gy * 13) % 29 == 0 { 4.0 } else { 0.0 };
            writeln!(points, "{id} {gx} {gy} {z} 90 120 60 0.5").unwrap();
        }
    }
    std::fs::write(dir.join("points3D.txt"), points).unwrap();
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            write_demo_export(tmp.path());
            tmp.path().to_path_buf()
        }
    };
    let import = import_colmap(&dir).unwrap();
    println!("{} frames of {}x{}, {} points", import.frames.len(), import.width, import.height, import.cloud.len());
    for (f, name) in import.frames.iter().zip(&import.names) {
        let c = f.center();
        println!("  frame {} {name}: camera at ({:.2}, {:.2}, {:.2})", f.frame_index, c.x, c.y, c.z);
    }

    let out = tmp.path().join("converted");
    let (poses, cloud) = import.save(&out).unwrap();
    let reloaded = load_poses(&poses, import.width, import.height).unwrap();
    assert_eq!(reloaded.len(), import.frames.len());
    println!("wrote {} and {}", poses.display(), cloud.display());

    let (clean, plane) = condition_cloud(&import.cloud, &import.frames, &ConditioningParams::for_cloud(&import.cloud)).unwrap();
    println!("ground plane normal {:.3?}, offset {:.3}, {} points kept", plane.normal.as_slice(), plane.offset, clean.len());
}
