use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flight::{generate_flight, FlightSpec};
use super::interference::{perturb_image, InterferenceSpec};
use crate::database::DescriptorDatabase;
use crate::error::{Error, Result};
use crate::localize::{localize, select_outcome, LocalizeConfig, Outcome};
use crate::world::{render, Terrain};

/// One query evaluated at one candidate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub index: usize,
    pub time_s: f64,
    pub distance_m: f64,
    pub n: usize,
    pub status: String,
    pub reason: Option<String>,
    pub true_x: f64,
    pub true_y: f64,
    pub true_z: f64,
    pub true_heading_deg: f64,
    pub true_pitch_deg: f64,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub est_z: Option<f64>,
    pub err3d_m: Option<f64>,
    pub err2d_m: Option<f64>,
    pub candidate_id: Option<usize>,
    pub cand_x: Option<f64>,
    pub cand_y: Option<f64>,
    pub inliers: Option<usize>,
    pub correction_m: Option<f64>,
}

impl QueryRecord {
    pub fn is_localized(&self) -> bool {
        self.status == "localized"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    /// Over localized queries; empty when none localized.
    pub rmse3d_m: Option<f64>,
    pub rmse2d_m: Option<f64>,
    pub recall_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    /// In sweep order.
    pub rows: Vec<MetricsRow>,
    /// Grouped by query index, then sweep order.
    pub queries: Vec<QueryRecord>,
}

impl MetricsTable {
    pub fn row(&self, n: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn records(&self, n: usize) -> impl Iterator<Item = &QueryRecord> {
        self.queries.iter().filter(move |q| q.n == n)
    }
}

/// RMSE and recall for candidate count `n`, from the per-query log alone.
pub fn metrics_for(records: &[QueryRecord], n: usize) -> MetricsRow {
    let rows: Vec<&QueryRecord> = records.iter().filter(|r| r.n == n).collect();
    let ok: Vec<&&QueryRecord> = rows.iter().filter(|r| r.is_localized()).collect();
    let rmse = |f: fn(&QueryRecord) -> Option<f64>| {
        if ok.is_empty() {
            None
        } else {
            let s: f64 = ok.iter().map(|r| f(r).unwrap_or(0.0).powi(2)).sum();
            Some((s / ok.len() as f64).sqrt())
        }
    };
    MetricsRow {
        n,
        rmse3d_m: rmse(|r| r.err3d_m),
        rmse2d_m: rmse(|r| r.err2d_m),
        recall_pct: if rows.is_empty() {
            0.0
        } else {
            100.0 * ok.len() as f64 / rows.len() as f64
        },
    }
}

pub fn metrics_from_records(records: Vec<QueryRecord>, n_values: &[usize]) -> MetricsTable {
    MetricsTable {
        rows: n_values.iter().map(|&n| metrics_for(&records, n)).collect(),
        queries: records,
    }
}

/// Flies the spec over the terrain, renders and perturbs a query at every
/// capture, localizes it once with the largest `n` and derives the outcome
/// for every `n` in the sweep from the same candidate trials. Query `i` uses
/// seed `seed ^ i` for both interference and RANSAC.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    db: &DescriptorDatabase,
    terrain: &Terrain,
    flight: &FlightSpec,
    interference: &InterferenceSpec,
    n_values: &[usize],
    seed: u64,
    cfg: &LocalizeConfig,
) -> Result<MetricsTable> {
    interference.validate()?;
    let max_n = *n_values
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("candidate sweep is empty"))?;
    if n_values.contains(&0) || max_n > db.len() {
        return Err(Error::invalid(format!(
            "candidate counts must lie in 1..={}",
            db.len()
        )));
    }
    let samples = generate_flight(flight)?;
    for s in &samples {
        let p = s.pose.position;
        if !terrain.contains(p.x, p.y) {
            return Err(Error::OutOfExtent { x: p.x, y: p.y });
        }
    }
    let mut run_cfg = *cfg;
    run_cfg.retrieval.n = max_n;
    let threshold = cfg.threshold_for(db);
    let cam = *db.camera();

    let per_query = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<Vec<QueryRecord>> {
            let qseed = seed ^ i as u64;
            let view = render(terrain, &s.pose, &cam)?;
            let img = perturb_image(&view.color, interference, qseed)?;
            let report = localize(&img, db, &run_cfg, qseed)?;
            let t = s.pose.position;
            Ok(n_values
                .iter()
                .map(|&n| {
                    let mut rec = QueryRecord {
                        index: i,
                        time_s: s.time,
                        distance_m: s.distance,
                        n,
                        status: "unlocalized".into(),
                        reason: None,
                        true_x: t.x,
                        true_y: t.y,
                        true_z: t.z,
                        true_heading_deg: s.pose.heading.to_degrees(),
                        true_pitch_deg: s.pose.pitch.to_degrees(),
                        est_x: None,
                        est_y: None,
                        est_z: None,
                        err3d_m: None,
                        err2d_m: None,
                        candidate_id: None,
                        cand_x: None,
                        cand_y: None,
                        inliers: None,
                        correction_m: None,
                    };
                    match select_outcome(&report.trials, n, threshold, db) {
                        Outcome::Localized(r) => {
                            let e = r.pose_local.position;
                            let cand = db.entries()[r.candidate_id].pose.position;
                            rec.status = "localized".into();
                            rec.est_x = Some(e.x);
                            rec.est_y = Some(e.y);
                            rec.est_z = Some(e.z);
                            rec.err3d_m = Some(e.distance(&t));
                            rec.err2d_m = Some(e.horizontal_distance(&t));
                            rec.candidate_id = Some(r.candidate_id);
                            rec.cand_x = Some(cand.x);
                            rec.cand_y = Some(cand.y);
                            rec.inliers = Some(r.inliers);
                            rec.correction_m = Some(r.correction);
                        }
                        Outcome::Unlocalized(reason) => rec.reason = Some(reason.as_str().into()),
                    }
                    rec
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(metrics_from_records(
        per_query.into_iter().flatten().collect(),
        n_values,
    ))
}
