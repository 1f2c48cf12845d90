use super::pnp::Correspondence2D3D;
use crate::camera::{CameraModel, PoseSE3};
use crate::features::{LocalFeature, Match};
use crate::geodesy::LocalPoint;
use crate::world::DepthMap;

/// Turns query↔database matches into query-pixel ↔ map-point pairs by
/// back-projecting each database keypoint with its stored Z-depth.
/// `index_a` indexes `query`, `index_b` indexes `db_features`. Matches
/// without valid depth are skipped.
pub fn lift_correspondences(
    matches: &[Match],
    query: &[LocalFeature],
    db_features: &[LocalFeature],
    depth: &DepthMap,
    db_pose: &PoseSE3<f64>,
    cam: &CameraModel<f64>,
) -> Vec<Correspondence2D3D<f64>> {
    matches
        .iter()
        .filter_map(|m| {
            let q = query.get(m.index_a)?.keypoint;
            let k = db_features.get(m.index_b)?.keypoint;
            let (u, v) = (k.u as f64, k.v as f64);
            let z = depth.lookup(u, v) as f64;
            if !(z > 0.0) {
                return None;
            }
            let p = db_pose.camera_to_world(&(cam.unproject(u, v) * z));
            Some(Correspondence2D3D {
                pixel: [q.u as f64, q.v as f64],
                point: LocalPoint::from_vec(p),
            })
        })
        .collect()
}
