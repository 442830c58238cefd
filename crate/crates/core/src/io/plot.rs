//! Static PNG figures: top-down trajectories and box-location heat maps.

use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::Vector2;

use super::IoError;
use crate::evaluation::HeatGrid;

const PALETTE: [[u8; 3]; 6] = [[31, 119, 180], [214, 39, 40], [44, 160, 44], [255, 127, 14], [148, 103, 189], [23, 190, 207]];

fn save(img: &RgbImage, path: &Path) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    img.save(path).map_err(|e| IoError::Image { path: path.to_path_buf(), message: e.to_string() })
}

fn draw_line(img: &mut RgbImage, a: Vector2<f64>, b: Vector2<f64>, color: Rgb<u8>) {
    let steps = (b - a).abs().max().ceil().max(1.0) as usize;
    for i in 0..=steps {
        let p = a + (b - a) * (i as f64 / steps as f64);
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Draws each polyline in its own color, scaled to fit with a common aspect
/// ratio. `y` points up.
pub fn save_trajectory_png(tracks: &[Vec<Vector2<f64>>], size: u32, path: &Path) -> Result<(), IoError> {
    let size = size.max(16);
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
    let all: Vec<&Vector2<f64>> = tracks.iter().flatten().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
    if let Some(first) = all.first() {
        let (mut lo, mut hi) = (**first, **first);
        for p in &all {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let margin = 0.05 * size as f64;
        let span = (hi - lo).max().max(1e-9);
        let scale = (size as f64 - 2.0 * margin) / span;
        let center = (lo + hi) / 2.0;
        let half = size as f64 / 2.0;
        let to_px = |p: &Vector2<f64>| Vector2::new(half + (p.x - center.x) * scale, half - (p.y - center.y) * scale);
        for (i, t) in tracks.iter().enumerate() {
            let color = Rgb(PALETTE[i % PALETTE.len()]);
            for w in t.windows(2) {
                draw_line(&mut img, to_px(&w[0]), to_px(&w[1]), color);
            }
            if let Some(p) = t.first() {
                let c = to_px(p);
                for d in [Vector2::new(-2.0, 0.0), Vector2::new(0.0, -2.0)] {
                    draw_line(&mut img, c + d, c - d, color);
                }
            }
        }
    }
    save(&img, path)
}

/// Black-red-yellow-white ramp over `[0, max]`.
fn heat_color(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * 3.0;
    let c = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    Rgb([c(t), c(t - 1.0), c(t - 2.0)])
}

pub fn save_heat_grid_png(grid: &HeatGrid, path: &Path) -> Result<(), IoError> {
    let max = grid.values.iter().copied().fold(0.0, f64::max);
    let img = RgbImage::from_fn(grid.width, grid.height, |x, y| {
        let v = grid.values[(y * grid.width + x) as usize];
        heat_color(if max > 0.0 { v / max } else { 0.0 })
    });
    save(&img, path)
}
