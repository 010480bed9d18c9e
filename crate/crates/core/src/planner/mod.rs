//! End-to-end planning: preprocess, normals, segmentation, pairing,
//! candidate selection and ranking, plus the corpus benchmark.

mod config;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{PlannerConfig, ENV_PREFIX};

use crate::candidate::candidates_for_regions;
use crate::cloud::{estimate_normals_curvatures, remove_statistical_outliers, voxel_downsample, PointCloud};
use crate::error::{GraspError, Result};
use crate::region::{segment, Segmentation};
use crate::robustness::{robust_force_closure, GraspContacts, RobustnessReport};
use crate::stability::{rank_candidates, GraspReport};
use crate::synthetic::{generate, CorpusEntry};

/// Bumped whenever the JSON layout of [`PlanResult`] changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Ok,
    /// No planar region survived segmentation.
    SegmentationEmpty,
    /// Regions exist but no antiparallel pair produced a usable contact pair.
    NoCandidates,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Ok => "ok",
            PlanStatus::SegmentationEmpty => "segmentation-empty",
            PlanStatus::NoCandidates => "no-candidates",
        }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub preprocess_ms: f64,
    pub normals_ms: f64,
    pub segment_ms: f64,
    pub candidates_ms: f64,
    pub rank_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub input_points: usize,
    pub processed_points: usize,
    pub regions: usize,
    pub residue_points: usize,
    pub pairs: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetadata {
    pub config_hash: String,
    pub input_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub schema_version: u32,
    pub status: PlanStatus,
    /// Head of `all_reports`.
    pub best: Option<GraspReport>,
    pub all_reports: Vec<GraspReport>,
    /// True when candidates exist but none passed force closure.
    pub no_closure: bool,
    pub counts: StageCounts,
    pub timings: Timings,
    pub metadata: PipelineMetadata,
}

/// SHA-256 over the little-endian bytes of every coordinate.
pub fn cloud_hash(cloud: &PointCloud) -> String {
    let mut h = Sha256::new();
    for p in cloud.points() {
        for v in p.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Downsample and denoise. Stages that need more points than the cloud has are skipped.
pub fn filter_cloud(cloud: &PointCloud, config: &PlannerConfig) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    let mut out = if config.voxel_size > 0.0 {
        voxel_downsample(cloud, config.voxel_size)?
    } else {
        cloud.clone()
    };
    if config.outlier_removal && out.len() > config.outlier_k {
        out = remove_statistical_outliers(&out, config.outlier_k, config.outlier_std_ratio)?;
    }
    Ok(out)
}

/// Filtering followed by normal and curvature estimation. Returns `None` when
/// too few points remain to fit a plane.
pub fn preprocess(cloud: &PointCloud, config: &PlannerConfig) -> Result<Option<PointCloud>> {
    let filtered = filter_cloud(cloud, config)?;
    if filtered.len() < 3 {
        return Ok(None);
    }
    let k = config.normal_k.min(filtered.len());
    estimate_normals_curvatures(&filtered, k).map(Some)
}

/// Preprocess and segment, for the `segment` subcommand.
pub fn segment_cloud(cloud: &PointCloud, config: &PlannerConfig) -> Result<(PointCloud, Segmentation)> {
    config.validate()?;
    let processed = preprocess(cloud, config)?.ok_or(GraspError::Precondition(
        "fewer than 3 points left after filtering".into(),
    ))?;
    let seg = segment(&processed, &config.region_params())?;
    Ok((processed, seg))
}

/// Run the whole pipeline on `cloud`.
pub fn plan(cloud: &PointCloud, config: &PlannerConfig) -> Result<PlanResult> {
    config.validate()?;
    if cloud.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    let total = Instant::now();
    let mut timings = Timings::default();
    let mut counts = StageCounts {
        input_points: cloud.len(),
        ..Default::default()
    };
    let metadata = PipelineMetadata {
        config_hash: config.hash(),
        input_hash: cloud_hash(cloud),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let finish = |status, reports: Vec<GraspReport>, no_closure, counts, mut timings: Timings| {
        timings.total_ms = ms_since(total);
        PlanResult {
            schema_version: SCHEMA_VERSION,
            status,
            best: reports.first().cloned(),
            all_reports: reports,
            no_closure,
            counts,
            timings,
            metadata: metadata.clone(),
        }
    };

    let t = Instant::now();
    let filtered = filter_cloud(cloud, config)?;
    timings.preprocess_ms = ms_since(t);
    counts.processed_points = filtered.len();
    if filtered.len() < 3 {
        return Ok(finish(PlanStatus::SegmentationEmpty, Vec::new(), false, counts, timings));
    }

    let t = Instant::now();
    let processed = estimate_normals_curvatures(&filtered, config.normal_k.min(filtered.len()))?;
    timings.normals_ms = ms_since(t);

    let t = Instant::now();
    let seg = segment(&processed, &config.region_params())?;
    timings.segment_ms = ms_since(t);
    counts.regions = seg.regions.len();
    counts.residue_points = seg.residue.len();
    if seg.regions.is_empty() {
        return Ok(finish(PlanStatus::SegmentationEmpty, Vec::new(), false, counts, timings));
    }

    let t = Instant::now();
    let (pairs, candidates) = candidates_for_regions(&seg.regions, &processed, &config.candidate_params());
    timings.candidates_ms = ms_since(t);
    counts.pairs = pairs.len();
    counts.candidates = candidates.len();
    if candidates.is_empty() {
        return Ok(finish(PlanStatus::NoCandidates, Vec::new(), false, counts, timings));
    }

    let t = Instant::now();
    let ranking = rank_candidates(&candidates, &processed, &config.scoring_params())?;
    timings.rank_ms = ms_since(t);
    Ok(finish(PlanStatus::Ok, ranking.reports, ranking.no_closure, counts, timings))
}

/// Evaluate a grasp on the preprocessed version of `cloud`, so contact points
/// produced by [`plan`] snap onto the same point set.
pub fn evaluate(cloud: &PointCloud, grasp: GraspContacts, sigma: f64, config: &PlannerConfig) -> Result<RobustnessReport> {
    config.validate()?;
    let processed = preprocess(cloud, config)?
        .ok_or(GraspError::Precondition("fewer than 3 points left after filtering".into()))?;
    robust_force_closure(grasp, &processed, &config.perturbation(sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub object: String,
    pub analog: String,
    pub points: usize,
    pub status: PlanStatus,
    pub closure: Option<bool>,
    pub sigma_min: Option<f64>,
    pub width: Option<f64>,
    pub plan_ms: f64,
    /// One entry per requested sigma, `None` when there is no grasp to perturb.
    pub probabilities: Vec<Option<f64>>,
}

/// Plan every corpus object and score its best grasp at each sigma.
pub fn run_benchmark(corpus: &[CorpusEntry], config: &PlannerConfig) -> Result<Vec<BenchmarkRow>> {
    config.validate()?;
    let mut rows = Vec::with_capacity(corpus.len());
    for entry in corpus {
        let cloud = generate(&entry.spec)?;
        let result = plan(&cloud, config)?;
        let probabilities = match &result.best {
            Some(best) => {
                let processed = preprocess(&cloud, config)?.expect("planning succeeded on this cloud");
                config
                    .sigmas
                    .iter()
                    .map(|&s| robust_force_closure(best.into(), &processed, &config.perturbation(s)).map(|r| Some(r.probability)))
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![None; config.sigmas.len()],
        };
        rows.push(BenchmarkRow {
            object: entry.name.to_string(),
            analog: entry.analog.to_string(),
            points: cloud.len(),
            status: result.status,
            closure: result.best.as_ref().map(|b| b.closure),
            sigma_min: result.best.as_ref().map(|b| b.sigma_min),
            width: result.best.as_ref().map(|b| b.width),
            plan_ms: result.timings.total_ms,
            probabilities,
        });
    }
    Ok(rows)
}
