//! Single-object tracking in aerial video with a particle filter that lives
//! on the ground plane of a reconstructed scene.
//!
//! The scene's point cloud yields a ground plane and per-frame depth maps.
//! Particles move in 3D, are weighted by an appearance score map, and are
//! marked occluded when the scene lies in front of them, so a hidden target
//! is extrapolated in world coordinates rather than in the image.
//!
//! [`simulator`] builds synthetic scenarios with ground truth,
//! [`evaluation`] scores track records, and [`io`] and [`cli`] cover files
//! and the command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appearance;
pub mod cli;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod particle_filter;
pub mod scene;
pub mod simulator;
pub mod tracker;
