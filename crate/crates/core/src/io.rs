//! On-disk formats.
//!
//! * pose records: `image_id tx ty tz qw qx qy qz`, one per line, world-to-camera
//! * descriptor records: `image_id v1 v2 ... vD`
//! * grids: little-endian `side: u32`, `channels: u32`, then `f32` values in
//!   `(y, x, channel)` order; depth grids use one channel
//! * intrinsics and scenes: JSON

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::camera::{DepthGrid, Intrinsics};
use crate::correlation::FeatureMap;
use crate::error::{Error, Result};
use crate::pose::{Pose, Quaternion};
use crate::retrieval::{DbEntry, Descriptor, SceneDb};
use crate::scene::SyntheticScene;

pub const POSES_FILE: &str = "poses.txt";
pub const DESCRIPTORS_FILE: &str = "descriptors.txt";
pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const SCENE_FILE: &str = "scene.json";
pub const DEPTH_DIR: &str = "depth";
pub const FEATURES_DIR: &str = "features";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn format_pose_line(id: &str, pose: &Pose) -> String {
    let t = pose.translation;
    let q = pose.rotation;
    format!("{id} {} {} {} {} {} {} {}", t.x, t.y, t.z, q.w, q.x, q.y, q.z)
}

/// Parses one pose record; the quaternion is re-normalized.
pub fn parse_pose_line(line: &str) -> std::result::Result<(String, Pose), String> {
    let mut fields = line.split_whitespace();
    let id = fields.next().ok_or("empty record")?.to_string();
    let values: Vec<f64> = fields
        .map(|f| f.parse::<f64>().map_err(|e| format!("{f:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != 7 {
        return Err(format!("expected 7 numbers after the id, got {}", values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    let rotation = Quaternion::try_new(values[3], values[4], values[5], values[6]).map_err(|e| e.to_string())?;
    Ok((id, Pose::new(rotation, Vector3::new(values[0], values[1], values[2]))))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn write_text(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_poses(path: &Path) -> Result<Vec<(String, Pose)>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| parse_pose_line(&line).map_err(|m| parse_err(path, n, m)))
        .collect()
}

pub fn write_poses(path: &Path, poses: &[(String, Pose)]) -> Result<()> {
    write_text(path, poses.iter().map(|(id, p)| format_pose_line(id, p)))
}

pub fn read_descriptors(path: &Path) -> Result<Vec<(String, Descriptor)>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let mut fields = line.split_whitespace();
            let id = fields.next().unwrap_or_default().to_string();
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(path, n, e.to_string()))?;
            Ok((id, Descriptor(values)))
        })
        .collect()
}

pub fn write_descriptors(path: &Path, descriptors: &[(String, Descriptor)]) -> Result<()> {
    write_text(
        path,
        descriptors.iter().map(|(id, d)| {
            let mut line = id.clone();
            for v in &d.0 {
                line.push(' ');
                line.push_str(&v.to_string());
            }
            line
        }),
    )
}

fn write_grid(path: &Path, side: usize, channels: usize, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * values.len());
    buf.extend_from_slice(&(side as u32).to_le_bytes());
    buf.extend_from_slice(&(channels as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_grid(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(parse_err(path, 0, "truncated header"));
    }
    let side = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let channels = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expected = side
        .checked_mul(side)
        .and_then(|v| v.checked_mul(channels))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| parse_err(path, 0, "header overflows"))?;
    if bytes.len() - 8 != expected {
        return Err(parse_err(
            path,
            0,
            format!("{side}x{side}x{channels} grid needs {expected} payload bytes, found {}", bytes.len() - 8),
        ));
    }
    let values = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok((side, channels, values))
}

/// Values are stored as `f32`.
pub fn write_feature_map(path: &Path, map: &FeatureMap) -> Result<()> {
    write_grid(path, map.side(), map.channels(), map.data())
}

pub fn read_feature_map(path: &Path) -> Result<FeatureMap> {
    let (side, channels, values) = read_grid(path)?;
    FeatureMap::new(side, channels, values)
}

pub fn write_depth(path: &Path, depth: &DepthGrid) -> Result<()> {
    write_grid(path, depth.side(), 1, depth.data())
}

pub fn read_depth(path: &Path) -> Result<DepthGrid> {
    let (side, channels, values) = read_grid(path)?;
    if channels != 1 {
        return Err(parse_err(path, 0, format!("depth grid must have 1 channel, found {channels}")));
    }
    DepthGrid::new(side, values)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics> {
    read_json(path)
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics) -> Result<()> {
    write_json(path, k)
}

pub fn read_scene(path: &Path) -> Result<SyntheticScene> {
    read_json(path)
}

pub fn write_scene(path: &Path, scene: &SyntheticScene) -> Result<()> {
    write_json(path, scene)
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Poses joined with descriptors by image id, in pose-file order.
pub fn read_posed_descriptors(dir: &Path) -> Result<Vec<(String, Pose, Descriptor)>> {
    let poses = read_poses(&dir.join(POSES_FILE))?;
    let descriptors: std::collections::HashMap<String, Descriptor> =
        read_descriptors(&dir.join(DESCRIPTORS_FILE))?.into_iter().collect();
    poses
        .into_iter()
        .map(|(id, pose)| {
            let d = descriptors
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::UnknownImage(id.clone()))?;
            Ok((id, pose, d))
        })
        .collect()
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.exists().then_some(path)
}

/// Loads a reference database directory.
pub fn load_db(dir: &Path) -> Result<SceneDb> {
    let intrinsics = read_intrinsics(&dir.join(INTRINSICS_FILE))?;
    let entries = read_posed_descriptors(dir)?
        .into_iter()
        .map(|(image_id, pose, descriptor)| DbEntry {
            depth: optional(dir.join(DEPTH_DIR).join(format!("{image_id}.bin"))),
            features: optional(dir.join(FEATURES_DIR).join(format!("{image_id}.bin"))),
            image_id,
            pose,
            descriptor,
        })
        .collect();
    SceneDb::new(intrinsics, entries)
}
