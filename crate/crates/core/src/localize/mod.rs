//! Online localization: undistort, describe, retrieve, match, lift, PnP, gate.

mod lift;
mod p3p;
mod pnp;
mod retrieval;
mod undistort;

use std::time::Instant;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lift::lift_correspondences;
pub use p3p::p3p;
pub use pnp::{
    refine_pose, reprojection_jacobian, reprojection_residual, solve_pnp_ransac,
    total_squared_error, Correspondence2D3D, PnPConfig, PnPSolution,
};
pub use retrieval::{retrieve_top_n, squared_distance};
pub use undistort::{distort_normalized, resample_area, undistort};

use crate::camera::{CameraModel, PoseSE3};
use crate::database::DescriptorDatabase;
use crate::error::{Error, Result};
use crate::features::{encode_global, extract, match_local};
use crate::geodesy::GeoPoint;
use crate::imageio::to_gray;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Number of candidates tried.
    pub n: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { n: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizeConfig {
    pub retrieval: RetrievalConfig,
    pub pnp: PnPConfig,
    /// Largest accepted horizontal distance between a refined position and
    /// its candidate's grid position. Defaults to twice the grid spacing.
    pub refine_threshold: Option<f64>,
    /// Camera that took the query image. Defaults to the database camera
    /// scaled to the image size, without distortion.
    pub query_camera: Option<CameraModel<f64>>,
}

impl LocalizeConfig {
    pub fn threshold_for(&self, db: &DescriptorDatabase) -> f64 {
        self.refine_threshold.unwrap_or(2.0 * db.grid().spacing_xy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub undistort: f64,
    pub features: f64,
    pub global: f64,
    pub retrieval: f64,
    /// Summed over candidates.
    pub matching: f64,
    /// Summed over candidates.
    pub pnp: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSolution {
    pub pose: PoseSE3<f64>,
    pub inliers: usize,
    /// Horizontal distance from the candidate's grid position, metres.
    pub correction: f64,
}

/// PnP attempt against one retrieved candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrial {
    /// 0-based position in the retrieval ranking.
    pub rank: usize,
    pub candidate_id: usize,
    pub retrieval_distance: f32,
    pub matches: usize,
    pub correspondences: usize,
    pub solution: Option<TrialSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub pose_local: PoseSE3<f64>,
    pub pose_geo: GeoPoint<f64>,
    pub inliers: usize,
    pub candidate_id: usize,
    pub correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnlocalizedReason {
    NoCandidates,
    NoConvergence,
    AllGated,
}

impl UnlocalizedReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoCandidates => "no-candidates",
            Self::NoConvergence => "no-convergence",
            Self::AllGated => "all-gated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Localized(LocalizationResult),
    Unlocalized(UnlocalizedReason),
}

impl Outcome {
    pub fn result(&self) -> Option<&LocalizationResult> {
        match self {
            Outcome::Localized(r) => Some(r),
            Outcome::Unlocalized(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub outcome: Outcome,
    pub trials: Vec<CandidateTrial>,
    pub timings: StageTimings,
}

impl QueryReport {
    /// `{lat, lon, alt, heading_deg, pitch_deg, roll_deg, inliers,
    /// candidate_id, correction_m, stage_timings_ms, status}`.
    pub fn to_json(&self) -> serde_json::Value {
        let timings = serde_json::to_value(self.timings).unwrap_or_default();
        match &self.outcome {
            Outcome::Localized(r) => serde_json::json!({
                "status": "localized",
                "lat": r.pose_geo.lat,
                "lon": r.pose_geo.lon,
                "alt": r.pose_geo.alt,
                "heading_deg": r.pose_local.heading.to_degrees(),
                "pitch_deg": r.pose_local.pitch.to_degrees(),
                "roll_deg": r.pose_local.roll.to_degrees(),
                "inliers": r.inliers,
                "candidate_id": r.candidate_id,
                "correction_m": r.correction,
                "stage_timings_ms": timings,
            }),
            Outcome::Unlocalized(reason) => serde_json::json!({
                "status": "unlocalized",
                "reason": reason.as_str(),
                "lat": null,
                "lon": null,
                "alt": null,
                "heading_deg": null,
                "pitch_deg": null,
                "roll_deg": null,
                "inliers": null,
                "candidate_id": null,
                "correction_m": null,
                "stage_timings_ms": timings,
            }),
        }
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Picks the final answer from the trials ranked below `n`: converged trials
/// within `threshold` of their candidate, most inliers first, then smallest
/// correction, then best retrieval rank.
pub fn select_outcome(
    trials: &[CandidateTrial],
    n: usize,
    threshold: f64,
    db: &DescriptorDatabase,
) -> Outcome {
    let considered: Vec<&CandidateTrial> = trials.iter().filter(|t| t.rank < n).collect();
    if considered.is_empty() {
        return Outcome::Unlocalized(UnlocalizedReason::NoCandidates);
    }
    let converged: Vec<(&CandidateTrial, &TrialSolution)> = considered
        .iter()
        .filter_map(|t| t.solution.as_ref().map(|s| (*t, s)))
        .collect();
    if converged.is_empty() {
        return Outcome::Unlocalized(UnlocalizedReason::NoConvergence);
    }
    let best = converged
        .into_iter()
        .filter(|(_, s)| s.correction <= threshold)
        .min_by(|a, b| {
            b.1.inliers
                .cmp(&a.1.inliers)
                .then(a.1.correction.total_cmp(&b.1.correction))
                .then(a.0.rank.cmp(&b.0.rank))
        });
    match best {
        None => Outcome::Unlocalized(UnlocalizedReason::AllGated),
        Some((t, s)) => Outcome::Localized(LocalizationResult {
            pose_local: s.pose,
            pose_geo: db.frame().local_to_geo(&s.pose.position),
            inliers: s.inliers,
            candidate_id: t.candidate_id,
            correction: s.correction,
        }),
    }
}

fn run_trial(
    db: &DescriptorDatabase,
    query: &[crate::features::LocalFeature],
    rank: usize,
    id: usize,
    distance: f32,
    cfg: &LocalizeConfig,
    seed: u64,
) -> Result<(CandidateTrial, f64, f64)> {
    let t = Instant::now();
    let cam = db.camera();
    let entry = db.entry(id)?;
    let db_feats = db.features(id)?;
    let matches = match_local(query, db_feats, &db.manifest().features.matching);
    let pairs = lift_correspondences(&matches, query, db_feats, db.depth(id)?, &entry.pose, cam);
    let t_match = ms(t);
    let t = Instant::now();
    let solution = if pairs.len() >= 4 {
        solve_pnp_ransac(&pairs, cam, &cfg.pnp, seed ^ id as u64)?.map(|sol| {
            let pose = sol.extrinsics.to_pose();
            TrialSolution {
                pose,
                inliers: sol.inliers.len(),
                correction: pose.position.horizontal_distance(&entry.pose.position),
            }
        })
    } else {
        None
    };
    Ok((
        CandidateTrial {
            rank,
            candidate_id: id,
            retrieval_distance: distance,
            matches: matches.len(),
            correspondences: pairs.len(),
            solution,
        },
        t_match,
        ms(t),
    ))
}

/// Localizes one query image against a loaded database.
///
/// Candidate trials run in parallel; each uses RANSAC seed
/// `seed ^ candidate_id`, so results do not depend on scheduling.
pub fn localize(
    img: &RgbImage,
    db: &DescriptorDatabase,
    cfg: &LocalizeConfig,
    seed: u64,
) -> Result<QueryReport> {
    let start = Instant::now();
    let n = cfg.retrieval.n;
    if n == 0 || n > db.len() {
        return Err(Error::invalid(format!(
            "candidate count {n} must lie in 1..={}",
            db.len()
        )));
    }
    let mut timings = StageTimings::default();
    let cam = db.camera();

    let t = Instant::now();
    let qcam = cfg
        .query_camera
        .unwrap_or_else(|| cam.scaled_to(img.width(), img.height()));
    if qcam.width != img.width() || qcam.height != img.height() {
        return Err(Error::invalid("query camera does not match the image size"));
    }
    let straight = undistort(img, &qcam, cam.width, cam.height);
    timings.undistort = ms(t);

    let t = Instant::now();
    let query = extract(&to_gray(&straight), &db.manifest().features);
    timings.features = ms(t);

    let t = Instant::now();
    let global = encode_global(&query, db.codebook())?;
    timings.global = ms(t);

    let t = Instant::now();
    let ranked = retrieve_top_n(global.values(), db.globals(), n)?;
    timings.retrieval = ms(t);

    let results = ranked
        .par_iter()
        .enumerate()
        .map(|(rank, &(id, d))| run_trial(db, &query, rank, id, d, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut trials = Vec::with_capacity(results.len());
    for (trial, tm, tp) in results {
        timings.matching += tm;
        timings.pnp += tp;
        trials.push(trial);
    }
    let outcome = select_outcome(&trials, n, cfg.threshold_for(db), db);
    timings.total = ms(start);
    Ok(QueryReport {
        outcome,
        trials,
        timings,
    })
}
