//! Round trips and malformed input across the on-disk formats.

use std::path::Path;

use groundtrack::appearance::{Observation, ScoreMap};
use groundtrack::geometry::{BoundingBox, CameraFrame, Intrinsics, RigidTransform};
use groundtrack::io::{parse_annotations, parse_poses, read_depth_map, read_score_map, write_annotations, write_depth_map, write_poses, write_score_map, Annotation};
use groundtrack::scene::DepthMap;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (-500.0..500.0f64, -500.0..500.0f64, 0.5..200.0f64, 0.5..200.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
}

fn annotations() -> impl Strategy<Value = Vec<Annotation>> {
    prop::collection::btree_map((0u32..60, 0u32..4), (bbox(), any::<bool>()), 0..40)
        .prop_map(|m| m.into_iter().map(|((frame, object_id), (bbox, occluded))| Annotation { frame, object_id, bbox, occluded }).collect())
}

fn depth_map() -> impl Strategy<Value = DepthMap> {
    (1u32..12, 1u32..12, 0u32..1000).prop_flat_map(|(w, h, f)| {
        let cell = prop_oneof![4 => 1e-3f32..1e4f32, 1 => Just(f32::INFINITY)];
        prop::collection::vec(cell, (w * h) as usize).prop_map(move |v| DepthMap::from_values(w, h, f, v).unwrap())
    })
}

fn observation() -> impl Strategy<Value = Observation> {
    (1u32..10, 1u32..10, -50i64..500, -50i64..500, 0u32..100, bbox()).prop_flat_map(|(w, h, x0, y0, f, proposal)| {
        prop::collection::vec(0.0..1.0f64, (w * h) as usize).prop_map(move |grid| Observation::new(ScoreMap::new(f, (x0, y0), w, h, grid).unwrap(), proposal))
    })
}

fn camera_path() -> impl Strategy<Value = Vec<CameraFrame>> {
    let pose = (-3.2..3.2f64, -1.5..1.5f64, -3.2..3.2f64, prop::array::uniform3(-100.0..100.0f64));
    prop::collection::vec(pose, 1..12).prop_map(|poses| {
        let k = Intrinsics::new(480.0, 240.0, 180.0, 480, 360).unwrap();
        poses
            .into_iter()
            .enumerate()
            .map(|(i, (r, p, y, t))| CameraFrame::new(i as u32, RigidTransform::from_quaternion(UnitQuaternion::from_euler_angles(r, p, y), Vector3::from(t)), k))
            .collect()
    })
}

fn bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    write(&mut out).unwrap();
    out
}

proptest! {
    #[test]
    fn annotations_round_trip_exactly(a in annotations()) {
        let text = String::from_utf8(bytes(|o| write_annotations(&a, o))).unwrap();
        prop_assert_eq!(parse_annotations(&text, Path::new("a.csv")).unwrap(), a);
    }

    #[test]
    fn depth_maps_round_trip_exactly(m in depth_map()) {
        let raw = bytes(|o| write_depth_map(&m, o));
        prop_assert_eq!(read_depth_map(&mut raw.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncated_depth_maps_are_rejected(m in depth_map(), cut in 1usize..64) {
        let raw = bytes(|o| write_depth_map(&m, o));
        let keep = raw.len().saturating_sub(cut);
        prop_assert!(read_depth_map(&mut &raw[..keep]).is_err());
    }

    #[test]
    fn score_maps_keep_layout_and_single_precision_scores(obs in observation()) {
        let raw = bytes(|o| write_score_map(&obs, o));
        let back = read_score_map(&mut raw.as_slice()).unwrap();
        prop_assert_eq!(back.proposal, obs.proposal);
        prop_assert_eq!(back.confidence, obs.confidence);
        prop_assert_eq!(back.score_map.search_area(), obs.score_map.search_area());
        prop_assert_eq!(back.score_map.frame_index, obs.score_map.frame_index);
        for (a, b) in back.score_map.grid().iter().zip(obs.score_map.grid()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
        // a second pass loses nothing more
        let again = bytes(|o| write_score_map(&back, o));
        prop_assert_eq!(again, raw);
    }

    #[test]
    fn poses_round_trip_and_reach_a_fixed_point(frames in camera_path()) {
        let text = String::from_utf8(bytes(|o| write_poses(&frames, o))).unwrap();
        let parsed = parse_poses(&text, Path::new("poses.txt"), 480, 360).unwrap();
        prop_assert!(parsed.renormalized.is_empty());
        prop_assert_eq!(parsed.frames.len(), frames.len());
        for (a, b) in parsed.frames.iter().zip(&frames) {
            prop_assert_eq!(a.frame_index, b.frame_index);
            prop_assert!((a.world_from_camera.rotation() - b.world_from_camera.rotation()).norm() < 1e-12);
            prop_assert!((a.world_from_camera.translation() - b.world_from_camera.translation()).norm() < 1e-9);
            prop_assert_eq!(a.intrinsics, b.intrinsics);
        }
        let again = String::from_utf8(bytes(|o| write_poses(&parsed.frames, o))).unwrap();
        prop_assert_eq!(again, text);
    }
}

#[test]
fn malformed_text_is_reported_with_a_line_number() {
    let err = parse_annotations("frame,object_id,x,y,w,h,occluded\n0,0,1,2,3,4,0\n1,0,1,2,x,4,0\n", Path::new("a.csv")).unwrap_err();
    assert!(err.to_string().contains("a.csv:3"), "{err}");
    let err = parse_poses("0 1 0 0 0 0 0 0 480 240\n", Path::new("p.txt"), 480, 360).unwrap_err();
    assert!(err.to_string().starts_with("p.txt:1"), "{err}");
}
