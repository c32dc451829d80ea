//! End-to-end localization: retrieval, per-reference relative pose estimates,
//! robust triangulation, and benchmark evaluation.

mod config;
mod dataset;

pub use config::PipelineConfig;
pub use dataset::{
    corner_poses, load_queries, simulate, ImageRecord, Preset, SimulatedDataset, SimulationConfig, CORNER_PREFIX,
    DB_DIR, QUERIES_DIR, QUERY_PREFIX, REF_PREFIX,
};

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{rotation_angle, Pose, RelativePoseEstimate};
use crate::retrieval::{retrieve_references, Descriptor, SceneDb};
use crate::scene::oracle_regressor;
use crate::triangulate::{aggregate_mc_samples, ransac_absolute_pose, RansacDiagnostics};

/// A query image. The pose is only read by the oracle regressor and by
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub image_id: String,
    pub pose: Pose,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub query_id: String,
    pub pose: Pose,
    /// Retrieved reference ids, in retrieval order.
    pub references: Vec<String>,
    pub chosen_pair: (String, String),
    pub inliers: usize,
    pub mean_uncertainty: f64,
    pub diagnostics: RansacDiagnostics,
}

/// One line of `localize` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub query_id: String,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub chosen_pair: [String; 2],
    pub inliers: usize,
    pub mean_uncertainty: f64,
}

impl From<&Localization> for LocalizationRecord {
    fn from(l: &Localization) -> Self {
        let (t, q) = (l.pose.translation, l.pose.rotation);
        Self {
            query_id: l.query_id.clone(),
            tx: t.x,
            ty: t.y,
            tz: t.z,
            qw: q.w,
            qx: q.x,
            qy: q.y,
            qz: q.z,
            chosen_pair: [l.chosen_pair.0.clone(), l.chosen_pair.1.clone()],
            inliers: l.inliers,
            mean_uncertainty: l.mean_uncertainty,
        }
    }
}

/// Relative pose estimate of one reference, or `None` if the regressor or the
/// aggregation is degenerate for this pair.
fn estimate(reference: &Pose, ref_id: &str, query: &QueryRecord, cfg: &PipelineConfig) -> Option<RelativePoseEstimate> {
    let samples = oracle_regressor(reference, &query.pose, (ref_id, &query.image_id), &cfg.noise()).ok()?;
    if samples.len() == 1 {
        return Some(RelativePoseEstimate {
            uncertainty: 0.0,
            ..samples[0]
        });
    }
    aggregate_mc_samples(&samples).ok()
}

/// Localizes one query against the database.
///
/// References whose estimate is degenerate are dropped before RANSAC.
pub fn localize(db: &SceneDb, query: &QueryRecord, cfg: &PipelineConfig) -> Result<Localization> {
    cfg.validate()?;
    let retrieved = retrieve_references(db, &query.descriptor, &cfg.retrieval())?;
    let mut used = Vec::with_capacity(retrieved.len());
    let mut refs = Vec::with_capacity(retrieved.len());
    for &i in &retrieved {
        let entry = &db.entries()[i];
        if let Some(est) = estimate(&entry.pose, &entry.image_id, query, cfg) {
            used.push(entry.image_id.clone());
            refs.push((entry.pose, est));
        }
    }
    if refs.len() < 2 {
        return Err(Error::NotEnoughReferences(refs.len()));
    }
    let (pose, diagnostics) = ransac_absolute_pose(&refs, &cfg.ransac())?;
    let (a, b) = diagnostics.chosen.pair;
    Ok(Localization {
        query_id: query.image_id.clone(),
        pose,
        references: retrieved.iter().map(|&i| db.entries()[i].image_id.clone()).collect(),
        chosen_pair: (used[a].clone(), used[b].clone()),
        inliers: diagnostics.chosen.inliers,
        mean_uncertainty: diagnostics.chosen.mean_uncertainty,
        diagnostics,
    })
}

/// Per-query evaluation row. Failed queries carry `failure` and no errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub translation_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rotation_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inliers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen_pair: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

impl QueryEval {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted by query id.
    pub per_query: Vec<QueryEval>,
    /// Lower median over successful queries, meters; `None` if all failed.
    pub median_translation: Option<f64>,
    /// Lower median over successful queries, degrees.
    pub median_rotation: Option<f64>,
    pub failure_count: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Element at index `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

pub fn evaluate_query(db: &SceneDb, query: &QueryRecord, cfg: &PipelineConfig) -> QueryEval {
    match localize(db, query, cfg) {
        Ok(l) => QueryEval {
            query_id: query.image_id.clone(),
            translation_error: Some((l.pose.camera_center() - query.pose.camera_center()).norm()),
            rotation_error: Some(rotation_angle(&l.pose.rotation, &query.pose.rotation)),
            inliers: Some(l.inliers),
            chosen_pair: Some([l.chosen_pair.0, l.chosen_pair.1]),
            failure: None,
        },
        Err(e) => QueryEval {
            query_id: query.image_id.clone(),
            translation_error: None,
            rotation_error: None,
            inliers: None,
            chosen_pair: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Localizes every query (in parallel) and summarizes the errors. A failing
/// query becomes a failure row; it never aborts the batch.
pub fn evaluate(db: &SceneDb, queries: &[QueryRecord], cfg: &PipelineConfig) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("need at least one query".into()));
    }
    cfg.validate()?;
    let mut per_query = crate::parallel::map(queries, |q| evaluate_query(db, q, cfg));
    per_query.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let t: Vec<f64> = per_query.iter().filter_map(|q| q.translation_error).collect();
    let r: Vec<f64> = per_query.iter().filter_map(|q| q.rotation_error).collect();
    Ok(EvalReport {
        failure_count: per_query.len() - t.len(),
        median_translation: lower_median(&t),
        median_rotation: lower_median(&r),
        per_query,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub count: usize,
    pub median_translation: Option<f64>,
    pub median_rotation: Option<f64>,
    pub failures: usize,
}

/// Database indices used at reference count `count`: the first `pinned`
/// entries, then a seeded shuffle of the rest, truncated to `count`. Subsets
/// for growing counts are nested. Returned in database order.
pub fn sweep_subset(db_len: usize, pinned: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > db_len || pinned > db_len {
        return Err(Error::InvalidArgument(format!(
            "reference count {count} (pinned {pinned}) exceeds database size {db_len}"
        )));
    }
    let mut rest: Vec<usize> = (pinned..db_len).collect();
    rand::seq::SliceRandom::shuffle(rest.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
    let mut order: Vec<usize> = (0..pinned).chain(rest).take(count).collect();
    order.sort_unstable();
    Ok(order)
}

/// Evaluates the benchmark on seeded reference subsets of each size.
pub fn sweep_references(
    db: &SceneDb,
    queries: &[QueryRecord],
    cfg: &PipelineConfig,
    counts: &[usize],
    pinned: usize,
) -> Result<Vec<SweepRow>> {
    counts
        .iter()
        .map(|&count| {
            let subset = db.subset(&sweep_subset(db.len(), pinned, count, cfg.seed)?);
            let report = evaluate(&subset, queries, cfg)?;
            Ok(SweepRow {
                count,
                median_translation: report.median_translation,
                median_rotation: report.median_rotation,
                failures: report.failure_count,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "count,median_t_m,median_r_deg,failures";

/// CSV with [`SWEEP_HEADER`]; a count where every query failed has empty
/// median fields.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.count,
            fmt(r.median_translation),
            fmt(r.median_rotation),
            r.failures
        );
    }
    out
}
