//! RANSAC PnP over a P3P minimal solver with Gauss-Newton refinement on SE(3).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::p3p::p3p;
use crate::camera::{CameraModel, Extrinsics};
use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;
use crate::math::{solve_dense, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnPConfig {
    /// Inlier threshold on reprojection error, pixels.
    pub reproj_threshold: f64,
    pub iterations: usize,
    pub min_inliers: usize,
    pub refine_max_steps: usize,
}

impl Default for PnPConfig {
    fn default() -> Self {
        Self {
            reproj_threshold: 1.0,
            iterations: 1000,
            min_inliers: 12,
            refine_max_steps: 20,
        }
    }
}

impl PnPConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reproj_threshold > 0.0
            && self.iterations > 0
            && self.min_inliers > 0
            && self.refine_max_steps > 0
        {
            Ok(())
        } else {
            Err(Error::invalid("PnP settings must all be positive"))
        }
    }
}

/// A query pixel and the map point it observes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence2D3D<T> {
    pub pixel: [T; 2],
    pub point: LocalPoint<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnPSolution<T> {
    pub extrinsics: Extrinsics<T>,
    /// Indices into the input pairs, ascending.
    pub inliers: Vec<usize>,
}

/// Reprojection residual `π(R·X + t) − u`; `None` if the point is not in
/// front of the camera.
#[inline]
pub fn reprojection_residual<T: Real>(
    cam: &CameraModel<T>,
    ext: &Extrinsics<T>,
    pair: &Correspondence2D3D<T>,
) -> Option<[T; 2]> {
    let (u, v) = cam.project(&ext.transform(&pair.point.to_vec()))?;
    Some([u - pair.pixel[0], v - pair.pixel[1]])
}

/// Residual and its Jacobian with respect to the left increment
/// `[ω, v]` of [`Extrinsics::perturbed`].
pub fn reprojection_jacobian<T: Real>(
    cam: &CameraModel<T>,
    ext: &Extrinsics<T>,
    pair: &Correspondence2D3D<T>,
) -> Option<([T; 2], [[T; 6]; 2])> {
    let p = ext.transform(&pair.point.to_vec());
    if p.z <= T::zero() {
        return None;
    }
    let iz = T::one() / p.z;
    let r = [
        cam.fx * p.x * iz + cam.cx - pair.pixel[0],
        cam.fy * p.y * iz + cam.cy - pair.pixel[1],
    ];
    // dπ/dp
    let du = [cam.fx * iz, T::zero(), -cam.fx * p.x * iz * iz];
    let dv = [T::zero(), cam.fy * iz, -cam.fy * p.y * iz * iz];
    // dp/dω = −[p]×, dp/dv = I
    let row = |d: [T; 3]| {
        [
            d[1] * -p.z + d[2] * p.y,
            d[0] * p.z + d[2] * -p.x,
            d[0] * -p.y + d[1] * p.x,
            d[0],
            d[1],
            d[2],
        ]
    };
    Some((r, [row(du), row(dv)]))
}

fn error_norm<T: Real>(
    cam: &CameraModel<T>,
    ext: &Extrinsics<T>,
    pair: &Correspondence2D3D<T>,
) -> Option<T> {
    reprojection_residual(cam, ext, pair).map(|r| r[0].hypot(r[1]))
}

/// Sum of squared reprojection errors over `idx`; infinite if any point
/// falls behind the camera.
pub fn total_squared_error<T: Real>(
    cam: &CameraModel<T>,
    ext: &Extrinsics<T>,
    pairs: &[Correspondence2D3D<T>],
    idx: &[usize],
) -> T {
    let mut s = T::zero();
    for &i in idx {
        match reprojection_residual(cam, ext, &pairs[i]) {
            Some(r) => s += r[0] * r[0] + r[1] * r[1],
            None => return T::infinity(),
        }
    }
    s
}

/// Inlier indices and their summed reprojection error.
fn score<T: Real>(
    cam: &CameraModel<T>,
    ext: &Extrinsics<T>,
    pairs: &[Correspondence2D3D<T>],
    tau: T,
) -> (Vec<usize>, T) {
    let mut inl = Vec::new();
    let mut total = T::zero();
    for (i, p) in pairs.iter().enumerate() {
        if let Some(e) = error_norm(cam, ext, p) {
            if e <= tau {
                inl.push(i);
                total += e;
            }
        }
    }
    (inl, total)
}

/// Gauss-Newton on SE(3) minimizing squared reprojection error over `idx`.
/// Each step is halved until the cost decreases; the cost never increases.
pub fn refine_pose<T: Real>(
    cam: &CameraModel<T>,
    start: &Extrinsics<T>,
    pairs: &[Correspondence2D3D<T>],
    idx: &[usize],
    max_steps: usize,
) -> Extrinsics<T> {
    let mut ext = *start;
    let mut cost = total_squared_error(cam, &ext, pairs, idx);
    if !cost.is_finite() {
        return ext;
    }
    let step_tol = T::lit(1e-10).max(T::epsilon() * T::lit(10.0));
    for _ in 0..max_steps {
        let mut h = [[T::zero(); 6]; 6];
        let mut g = [T::zero(); 6];
        for &i in idx {
            let Some((r, j)) = reprojection_jacobian(cam, &ext, &pairs[i]) else {
                return ext;
            };
            for k in 0..2 {
                for a in 0..6 {
                    g[a] -= j[k][a] * r[k];
                    for b in a..6 {
                        h[a][b] += j[k][a] * j[k][b];
                    }
                }
            }
        }
        for a in 0..6 {
            for b in 0..a {
                h[a][b] = h[b][a];
            }
        }
        let Some(mut delta) = solve_dense(h, g) else {
            break;
        };
        let mut accepted = false;
        for _ in 0..40 {
            let cand = ext.perturbed(&delta);
            let c = total_squared_error(cam, &cand, pairs, idx);
            if c < cost {
                ext = cand;
                cost = c;
                accepted = true;
                break;
            }
            let norm = delta.iter().map(|d| *d * *d).sum::<T>().sqrt();
            if norm < step_tol {
                break;
            }
            delta.iter_mut().for_each(|d| *d *= T::lit(0.5));
        }
        let norm = delta.iter().map(|d| *d * *d).sum::<T>().sqrt();
        if !accepted || norm < step_tol {
            break;
        }
    }
    ext
}

/// Robust PnP. Each of `cfg.iterations` rounds draws four distinct pairs,
/// solves P3P on the first three and keeps the solution that best
/// reprojects the fourth. The hypothesis with the most inliers wins (ties:
/// lower summed inlier error), is refined on its inliers and rescored.
///
/// `Ok(None)` when no hypothesis, before or after refinement, reaches
/// `cfg.min_inliers`.
pub fn solve_pnp_ransac<T: Real>(
    pairs: &[Correspondence2D3D<T>],
    cam: &CameraModel<T>,
    cfg: &PnPConfig,
    seed: u64,
) -> Result<Option<PnPSolution<T>>> {
    cfg.validate()?;
    let n = pairs.len();
    if n < 4 {
        return Err(Error::NotEnoughSamples { needed: 4, got: n });
    }
    let tau = T::lit(cfg.reproj_threshold);
    let bearings: Vec<Vec3<T>> = pairs
        .iter()
        .map(|p| cam.unproject(p.pixel[0], p.pixel[1]))
        .collect();
    let points: Vec<Vec3<T>> = pairs.iter().map(|p| p.point.to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, T, Extrinsics<T>)> = None;

    for _ in 0..cfg.iterations {
        let s = sample(&mut rng, n, 4);
        let (i0, i1, i2, i3) = (s.index(0), s.index(1), s.index(2), s.index(3));
        let sols = p3p(
            &[points[i0], points[i1], points[i2]],
            &[bearings[i0], bearings[i1], bearings[i2]],
        );
        let hyp = sols
            .into_iter()
            .filter_map(|e| error_norm(cam, &e, &pairs[i3]).map(|err| (err, e)))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let Some((_, ext)) = hyp else {
            continue;
        };
        let (inl, total) = score(cam, &ext, pairs, tau);
        let better = match &best {
            None => !inl.is_empty(),
            Some((c, t, _)) => inl.len() > *c || (inl.len() == *c && total < *t),
        };
        if better {
            best = Some((inl.len(), total, ext));
        }
    }

    let Some((count, _, ext)) = best else {
        return Ok(None);
    };
    if count < cfg.min_inliers {
        return Ok(None);
    }
    let (inl, _) = score(cam, &ext, pairs, tau);
    let refined = refine_pose(cam, &ext, pairs, &inl, cfg.refine_max_steps);
    let (inliers, _) = score(cam, &refined, pairs, tau);
    if inliers.len() < cfg.min_inliers {
        return Ok(None);
    }
    Ok(Some(PnPSolution {
        extrinsics: refined,
        inliers,
    }))
}
