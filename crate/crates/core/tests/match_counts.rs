use nalgebra::{Matrix3, Vector3};
use reloc_core::camera::{DepthGrid, Intrinsics};
use reloc_core::correlation::{pixel_match_counts, MatchLayout, PixelMatchCounts};
use reloc_core::pose::Pose;
use reloc_core::scene::{render_depth, sample_poses, PoseSampling, SamplingMode, SceneConfig, SyntheticScene};

const RES: usize = 32;

fn rot(p: &Pose) -> Matrix3<f64> {
    p.rotation.to_rotation_matrix()
}

/// Straight per-pixel warp with explicit matrices, extensive layout.
fn brute_force(d1: &DepthGrid, d2: &DepthGrid, p1: &Pose, p2: &Pose, k: &Intrinsics, side: usize) -> Vec<u32> {
    let (fx, fy) = (k.fx * RES as f64 / k.width as f64, k.fy * RES as f64 / k.height as f64);
    let (cx, cy) = (k.cx * RES as f64 / k.width as f64, k.cy * RES as f64 / k.height as f64);
    let cell = RES / side;
    let mut n = vec![0u32; side * side * side * side];
    for row in 0..RES {
        for col in 0..RES {
            let z = d1.get(row, col);
            if z <= 0.0 {
                continue;
            }
            let cam1 = Vector3::new((col as f64 + 0.5 - cx) / fx * z, (row as f64 + 0.5 - cy) / fy * z, z);
            let world = rot(p1).transpose() * (cam1 - p1.translation);
            let cam2 = rot(p2) * world + p2.translation;
            if cam2.z <= 0.0 {
                continue;
            }
            let u = fx * cam2.x / cam2.z + cx;
            let v = fy * cam2.y / cam2.z + cy;
            if !(0.0..RES as f64).contains(&u) || !(0.0..RES as f64).contains(&v) {
                continue;
            }
            let (c2, r2) = (u as usize, v as usize);
            let d = d2.get(r2, c2);
            if d <= 0.0 || (cam2.z - d).abs() > 0.05 * d {
                continue;
            }
            let (y1, x1, y2, x2) = (row / cell, col / cell, r2 / cell, c2 / cell);
            n[((y1 * side + x1) * side * side) + x2 * side + y2] += 1;
        }
    }
    n
}

fn scene_and_poses(seed: u64, n: usize) -> (SyntheticScene, Vec<Pose>) {
    let scene = SyntheticScene::generate(seed, &SceneConfig::default()).unwrap();
    let sampling = PoseSampling {
        tilt_jitter_deg: 5.0,
        ..PoseSampling::new(SamplingMode::Sparse)
    };
    let poses = sample_poses(&scene, &Intrinsics::default(), n, &sampling, seed + 100).unwrap();
    (scene, poses)
}

#[test]
fn matches_per_pixel_warp_oracle() {
    let k = Intrinsics::default();
    let (scene, poses) = scene_and_poses(3, 12);
    let depths: Vec<DepthGrid> = poses.iter().map(|p| render_depth(&scene, p, &k, RES).unwrap()).collect();
    let mut nonzero = 0;
    for i in 0..poses.len() {
        let j = (i + 1) % poses.len();
        for side in [4, 8] {
            let n = pixel_match_counts(&depths[i], &depths[j], &poses[i], &poses[j], &k, &MatchLayout::Extensive { side })
                .unwrap();
            let oracle = brute_force(&depths[i], &depths[j], &poses[i], &poses[j], &k, side);
            assert_eq!(n.counts(), oracle.as_slice(), "pair {i}-{j} side {side}");
            nonzero += usize::from(n.total() > 0);
        }
    }
    assert!(nonzero > 4, "oracle cases should include overlapping pairs");
}

#[test]
fn shifting_both_cameras_leaves_counts_unchanged() {
    let k = Intrinsics::default();
    let (scene, poses) = scene_and_poses(8, 8);
    let depths: Vec<DepthGrid> = poses.iter().map(|p| render_depth(&scene, p, &k, RES).unwrap()).collect();
    let shift = |p: &Pose, d: &Vector3<f64>| Pose::from_center(p.rotation, &(p.camera_center() + d));
    for (i, delta) in [Vector3::new(1.0, -2.0, 0.5), Vector3::new(-10.0, 3.25, 7.0), Vector3::new(0.125, 0.0, 0.0)]
        .iter()
        .enumerate()
    {
        let (a, b) = (i, i + 3);
        let layout = MatchLayout::Extensive { side: 8 };
        let n: PixelMatchCounts = pixel_match_counts(&depths[a], &depths[b], &poses[a], &poses[b], &k, &layout).unwrap();
        let shifted = pixel_match_counts(
            &depths[a],
            &depths[b],
            &shift(&poses[a], delta),
            &shift(&poses[b], delta),
            &k,
            &layout,
        )
        .unwrap();
        assert_eq!(n, shifted);
    }
}
