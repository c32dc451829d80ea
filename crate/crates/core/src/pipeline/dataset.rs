use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::io;
use crate::pose::Pose;
use crate::retrieval::{tiny_image_descriptor, DbEntry, Descriptor, SceneDb};
use crate::scene::{
    look_rotation, render_depth, render_features, render_gray, sample_poses, PoseSampling, SamplingMode,
    SceneConfig, SyntheticScene,
};

use super::QueryRecord;

/// Fixed reference layouts added in front of the sampled references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Four cameras at the horizontal corners of the (margin-shrunk) bounding
    /// box, at mid height, looking at the scene centroid.
    Corners4,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corners4" => Ok(Preset::Corners4),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub scene_seed: u64,
    pub scene: SceneConfig,
    pub n_refs: usize,
    pub n_queries: usize,
    pub mode: SamplingMode,
    pub preset: Option<Preset>,
    pub intrinsics: Intrinsics,
    /// Render resolution of the grayscale images behind the descriptors.
    pub descriptor_resolution: usize,
    pub depth_resolution: usize,
    pub feature_side: usize,
    pub feature_channels: usize,
}

impl SimulationConfig {
    pub fn new(scene_seed: u64, n_refs: usize, n_queries: usize, mode: SamplingMode) -> Self {
        Self {
            scene_seed,
            scene: SceneConfig::default(),
            n_refs,
            n_queries,
            mode,
            preset: None,
            intrinsics: Intrinsics::default(),
            descriptor_resolution: 32,
            depth_resolution: 32,
            feature_side: 8,
            feature_channels: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub pose: Pose,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub config: SimulationConfig,
    pub scene: SyntheticScene,
    /// Preset references first, then sampled ones.
    pub references: Vec<ImageRecord>,
    pub queries: Vec<ImageRecord>,
}

pub const CORNER_PREFIX: &str = "corner";
pub const REF_PREFIX: &str = "ref";
pub const QUERY_PREFIX: &str = "query";
pub const DB_DIR: &str = "db";
pub const QUERIES_DIR: &str = "queries";

// independent random streams per purpose
const REF_STREAM: u64 = 0x5245_4600_0000_0001;
const QUERY_STREAM: u64 = 0x5155_4552_0000_0002;

pub fn corner_poses(scene: &SyntheticScene, margin: f64) -> Result<Vec<Pose>> {
    if scene.points.is_empty() {
        return Err(Error::EmptyScene);
    }
    let inner = scene.bounds.shrunk(margin);
    let centroid = scene.positions().sum::<Vector3<f64>>() / scene.points.len() as f64;
    let z = scene.bounds.center().z;
    let corners = [
        (inner.min[0], inner.min[1]),
        (inner.max[0], inner.min[1]),
        (inner.max[0], inner.max[1]),
        (inner.min[0], inner.max[1]),
    ];
    Ok(corners
        .iter()
        .map(|&(x, y)| {
            let c = Vector3::new(x, y, z);
            Pose::from_center(look_rotation(&(centroid - c), &Vector3::z()), &c)
        })
        .collect())
}

fn describe(scene: &SyntheticScene, cfg: &SimulationConfig, prefix: &str, poses: Vec<Pose>) -> Result<Vec<ImageRecord>> {
    let descriptors = crate::parallel::map(&poses, |p| {
        tiny_image_descriptor(&render_gray(scene, p, &cfg.intrinsics, cfg.descriptor_resolution)?)
    });
    poses
        .into_iter()
        .zip(descriptors)
        .enumerate()
        .map(|(i, (pose, d))| {
            Ok(ImageRecord {
                image_id: format!("{prefix}{i:04}"),
                pose,
                descriptor: d?,
            })
        })
        .collect()
}

/// Generates a scene, posed reference and query images and their descriptors.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulatedDataset> {
    let scene = SyntheticScene::generate(cfg.scene_seed, &cfg.scene)?;
    let sampling = PoseSampling::new(cfg.mode);
    let mut references = Vec::new();
    if cfg.preset == Some(Preset::Corners4) {
        references = describe(&scene, cfg, CORNER_PREFIX, corner_poses(&scene, sampling.margin)?)?;
    }
    if cfg.n_refs > 0 {
        let poses = sample_poses(&scene, &cfg.intrinsics, cfg.n_refs, &sampling, cfg.scene_seed ^ REF_STREAM)?;
        references.extend(describe(&scene, cfg, REF_PREFIX, poses)?);
    }
    let queries = if cfg.n_queries > 0 {
        let poses = sample_poses(&scene, &cfg.intrinsics, cfg.n_queries, &sampling, cfg.scene_seed ^ QUERY_STREAM)?;
        describe(&scene, cfg, QUERY_PREFIX, poses)?
    } else {
        Vec::new()
    };
    Ok(SimulatedDataset {
        config: cfg.clone(),
        scene,
        references,
        queries,
    })
}

impl SimulatedDataset {
    /// In-memory database without depth or feature files.
    pub fn db(&self) -> Result<SceneDb> {
        SceneDb::new(
            self.config.intrinsics,
            self.references
                .iter()
                .map(|r| DbEntry {
                    image_id: r.image_id.clone(),
                    pose: r.pose,
                    descriptor: r.descriptor.clone(),
                    depth: None,
                    features: None,
                })
                .collect(),
        )
    }

    pub fn query_records(&self) -> Vec<QueryRecord> {
        self.queries
            .iter()
            .map(|q| QueryRecord {
                image_id: q.image_id.clone(),
                pose: q.pose,
                descriptor: q.descriptor.clone(),
            })
            .collect()
    }

    /// Writes `scene.json`, `db/` (with depth and feature grids per reference)
    /// and `queries/`.
    pub fn write(&self, out: &Path) -> Result<()> {
        let cfg = &self.config;
        io::create_dir(out)?;
        io::write_scene(&out.join(io::SCENE_FILE), &self.scene)?;
        let db = out.join(DB_DIR);
        write_records(&db, &cfg.intrinsics, &self.references)?;
        io::create_dir(&db.join(io::DEPTH_DIR))?;
        io::create_dir(&db.join(io::FEATURES_DIR))?;
        let written = crate::parallel::map(&self.references, |r| -> Result<()> {
            let depth = render_depth(&self.scene, &r.pose, &cfg.intrinsics, cfg.depth_resolution)?;
            io::write_depth(&db.join(io::DEPTH_DIR).join(format!("{}.bin", r.image_id)), &depth)?;
            let ppc = (cfg.depth_resolution / cfg.feature_side).max(1);
            let features = render_features(
                &self.scene,
                &r.pose,
                &cfg.intrinsics,
                cfg.feature_side,
                cfg.feature_channels,
                ppc,
            )?;
            io::write_feature_map(&db.join(io::FEATURES_DIR).join(format!("{}.bin", r.image_id)), &features)
        });
        written.into_iter().collect::<Result<()>>()?;
        write_records(&out.join(QUERIES_DIR), &cfg.intrinsics, &self.queries)
    }
}

fn write_records(dir: &Path, k: &Intrinsics, records: &[ImageRecord]) -> Result<()> {
    io::create_dir(dir)?;
    io::write_intrinsics(&dir.join(io::INTRINSICS_FILE), k)?;
    io::write_poses(
        &dir.join(io::POSES_FILE),
        &records.iter().map(|r| (r.image_id.clone(), r.pose)).collect::<Vec<_>>(),
    )?;
    io::write_descriptors(
        &dir.join(io::DESCRIPTORS_FILE),
        &records.iter().map(|r| (r.image_id.clone(), r.descriptor.clone())).collect::<Vec<_>>(),
    )
}

/// Reads a `queries/` directory.
pub fn load_queries(dir: &Path) -> Result<Vec<QueryRecord>> {
    Ok(io::read_posed_descriptors(dir)?
        .into_iter()
        .map(|(image_id, pose, descriptor)| QueryRecord {
            image_id,
            pose,
            descriptor,
        })
        .collect())
}
