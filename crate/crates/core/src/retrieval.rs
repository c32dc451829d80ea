//! Reference selection by global descriptor distance with a camera-center
//! spacing window.

use std::collections::HashSet;
use std::path::PathBuf;

use crate::camera::{GrayImage, Intrinsics};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Side of the thumbnail used by [`tiny_image_descriptor`].
pub const TINY_SIDE: usize = 16;

/// Global image descriptor compared by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(pub Vec<f64>);

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Area-averaged 16x16 thumbnail, mean-subtracted and L2-normalized.
/// A constant image yields the zero vector.
pub fn tiny_image_descriptor(image: &GrayImage) -> Result<Descriptor> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let row_weights = area_weights(image.height, TINY_SIDE);
    let col_weights = area_weights(image.width, TINY_SIDE);
    let mut thumb = vec![0.0; TINY_SIDE * TINY_SIDE];
    for (i, rows) in row_weights.iter().enumerate() {
        for (j, cols) in col_weights.iter().enumerate() {
            let mut acc = 0.0;
            for &(r, wr) in rows {
                for &(c, wc) in cols {
                    acc += wr * wc * image.get(r, c);
                }
            }
            thumb[i * TINY_SIDE + j] = acc;
        }
    }
    let mean = thumb.iter().sum::<f64>() / thumb.len() as f64;
    thumb.iter_mut().for_each(|v| *v -= mean);
    let norm = thumb.iter().map(|v| v * v).sum::<f64>().sqrt();
    // a constant input leaves only rounding noise after mean subtraction
    let scale = thumb.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if norm <= 1e-12 || scale <= 1e-12 * (mean.abs() + 1.0) {
        return Ok(Descriptor(vec![0.0; thumb.len()]));
    }
    Ok(Descriptor(thumb.into_iter().map(|v| v / norm).collect()))
}

/// For each of `dst` output bins, the source indices and their normalized
/// overlap weights.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (b.min(s as f64 + 1.0) - a.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap / step))
                })
                .collect()
        })
        .collect()
}

/// One reference image of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct DbEntry {
    pub image_id: String,
    pub pose: Pose,
    pub descriptor: Descriptor,
    pub depth: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

/// Reference images with absolute poses, sharing one camera model.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDb {
    intrinsics: Intrinsics,
    entries: Vec<DbEntry>,
}

impl SceneDb {
    pub fn new(intrinsics: Intrinsics, entries: Vec<DbEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        let dim = entries.first().map(|e| e.descriptor.dim());
        for e in &entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate image id {:?}",
                    e.image_id
                )));
            }
            if Some(e.descriptor.dim()) != dim {
                return Err(Error::shape(format!(
                    "descriptor of {:?} has dimension {}, expected {}",
                    e.image_id,
                    e.descriptor.dim(),
                    dim.unwrap_or_default()
                )));
            }
            if e.descriptor.0.iter().any(|v| !v.is_finite()) || !e.pose.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite data for {:?}",
                    e.image_id
                )));
            }
        }
        Ok(Self {
            intrinsics,
            entries,
        })
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, image_id: &str) -> Option<&DbEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }

    /// Database restricted to the given entry indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> SceneDb {
        SceneDb {
            intrinsics: self.intrinsics,
            entries: indices.iter().map(|i| self.entries[*i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub k: usize,
    /// Minimum camera-center distance between selected references, meters.
    pub min_spacing: f64,
    /// Maximum camera-center distance between selected references, meters.
    pub max_spacing: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            k: 5,
            min_spacing: 0.05,
            max_spacing: 10.0,
        }
    }
}

/// Greedy top-k selection in ascending descriptor distance. A candidate is
/// kept only if its camera center is within `[min_spacing, max_spacing]` of
/// every reference already kept. Returns entry indices, closest first.
pub fn retrieve_references(
    db: &SceneDb,
    query: &Descriptor,
    params: &RetrievalParams,
) -> Result<Vec<usize>> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if query.dim() != db.entries[0].descriptor.dim() {
        return Err(Error::shape(format!(
            "query descriptor has dimension {}, database uses {}",
            query.dim(),
            db.entries[0].descriptor.dim()
        )));
    }
    let mut ranked: Vec<(f64, &str, usize)> = db
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.descriptor.distance(query), e.image_id.as_str(), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut selected: Vec<usize> = Vec::with_capacity(params.k);
    let mut centers = Vec::with_capacity(params.k);
    for (_, _, i) in ranked {
        if selected.len() >= params.k {
            break;
        }
        let c = db.entries[i].pose.camera_center();
        let spaced = centers.iter().all(|other: &nalgebra::Vector3<f64>| {
            let d = (c - other).norm();
            d >= params.min_spacing && d <= params.max_spacing
        });
        if spaced {
            selected.push(i);
            centers.push(c);
        }
    }
    Ok(selected)
}
