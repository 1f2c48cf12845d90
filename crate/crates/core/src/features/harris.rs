use serde::{Deserialize, Serialize};

use crate::imageio::GrayF32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f32,
    pub v: f32,
    pub score: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarrisConfig {
    pub k: f32,
    /// Responses below `threshold_ratio · max response` are discarded.
    pub threshold_ratio: f32,
    pub nms_radius: f32,
    pub max_count: usize,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        Self {
            k: 0.04,
            threshold_ratio: 0.01,
            nms_radius: 8.0,
            max_count: 500,
        }
    }
}

/// Harris corner response over the whole image; a 2-pixel border is left at zero.
pub fn harris_response(img: &GrayF32, k: f32) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.as_raw();
    let mut ixx = vec![0f32; w * h];
    let mut iyy = vec![0f32; w * h];
    let mut ixy = vec![0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| {
                px[(y as isize + dy) as usize * w + (x as isize + dx) as usize]
            };
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            // Scale Sobel to unit gain so responses stay in a sane float range.
            let (gx, gy) = (gx * 0.125, gy * 0.125);
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let mut out = vec![0f32; w * h];
    const G: [f32; 3] = [0.25, 0.5, 0.25];
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut sxx, mut syy, mut sxy) = (0f32, 0f32, 0f32);
            for (dy, gy) in G.iter().enumerate() {
                for (dx, gx) in G.iter().enumerate() {
                    let i = (y + dy - 1) * w + (x + dx - 1);
                    let g = gx * gy;
                    sxx += g * ixx[i];
                    syy += g * iyy[i];
                    sxy += g * ixy[i];
                }
            }
            let det = sxx * syy - sxy * sxy;
            let tr = sxx + syy;
            out[y * w + x] = det - k * tr * tr;
        }
    }
    out
}

/// Harris corners with greedy radius suppression and sub-pixel peak refinement.
///
/// Candidates are 3×3 local maxima above the relative threshold, visited by
/// descending score (ties in raster order); a candidate survives when no
/// stronger survivor lies within `nms_radius`. Images smaller than 32×32
/// yield no keypoints.
pub fn detect_keypoints(img: &GrayF32, cfg: &HarrisConfig) -> Vec<Keypoint> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 32 || h < 32 || cfg.max_count == 0 {
        return Vec::new();
    }
    let r = harris_response(img, cfg.k);
    let max = r.iter().copied().fold(0f32, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let thr = cfg.threshold_ratio * max;

    let mut cands: Vec<(f32, usize, usize)> = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let s = r[y * w + x];
            if s <= thr || s <= 0.0 {
                continue;
            }
            let is_peak = (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| {
                    (dx == 0 && dy == 0)
                        || r[(y as isize + dy) as usize * w + (x as isize + dx) as usize] <= s
                })
            });
            if is_peak {
                cands.push((s, y, x));
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let radius = cfg.nms_radius.max(0.0);
    let cell = radius.max(1.0);
    let gw = (w as f32 / cell).ceil() as usize + 1;
    let gh = (h as f32 / cell).ceil() as usize + 1;
    let mut buckets: Vec<Vec<(f32, f32)>> = vec![Vec::new(); gw * gh];
    let mut out = Vec::with_capacity(cfg.max_count.min(cands.len()));
    for (s, y, x) in cands {
        let (fx, fy) = (x as f32, y as f32);
        let (bx, by) = ((fx / cell) as usize, (fy / cell) as usize);
        let mut suppressed = false;
        'scan: for ny in by.saturating_sub(1)..=(by + 1).min(gh - 1) {
            for nx in bx.saturating_sub(1)..=(bx + 1).min(gw - 1) {
                for &(ax, ay) in &buckets[ny * gw + nx] {
                    if (ax - fx).powi(2) + (ay - fy).powi(2) <= radius * radius {
                        suppressed = true;
                        break 'scan;
                    }
                }
            }
        }
        if suppressed {
            continue;
        }
        buckets[by * gw + bx].push((fx, fy));
        let at = |xx: usize, yy: usize| r[yy * w + xx];
        let du = parabolic_offset(at(x - 1, y), s, at(x + 1, y));
        let dv = parabolic_offset(at(x, y - 1), s, at(x, y + 1));
        out.push(Keypoint {
            u: fx + du,
            v: fy + dv,
            score: s,
        });
        if out.len() == cfg.max_count {
            break;
        }
    }
    out
}

/// Vertex offset of the parabola through three equally spaced samples.
fn parabolic_offset(left: f32, mid: f32, right: f32) -> f32 {
    let denom = left - 2.0 * mid + right;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_image() -> GrayF32 {
        GrayF32::from_fn(96, 80, |x, y| {
            let inside = (30..=59).contains(&x) && (20..=49).contains(&y);
            image::Luma([if inside { 255.0 } else { 0.0 }])
        })
    }

    #[test]
    fn constant_image_has_no_corners() {
        let img = GrayF32::from_pixel(64, 64, image::Luma([77.0]));
        assert!(detect_keypoints(&img, &HarrisConfig::default()).is_empty());
    }

    #[test]
    fn square_has_four_corners() {
        let kps = detect_keypoints(&square_image(), &HarrisConfig::default());
        assert_eq!(kps.len(), 4, "{kps:?}");
        // Geometric corners sit on pixel boundaries.
        let corners = [(29.5, 19.5), (59.5, 19.5), (29.5, 49.5), (59.5, 49.5)];
        for (cu, cv) in corners {
            let near = kps
                .iter()
                .any(|k| (k.u - cu).abs() <= 1.0 && (k.v - cv).abs() <= 1.0);
            assert!(near, "no keypoint near ({cu}, {cv}): {kps:?}");
        }
        assert!(kps.iter().all(|k| k.score > 0.0));
    }

    #[test]
    fn deterministic_and_capped() {
        let img = GrayF32::from_fn(128, 96, |x, y| {
            let v = ((x / 7 + y / 5) % 3) as f32 * 90.0 + ((x * 31 + y * 17) % 11) as f32;
            image::Luma([v])
        });
        let cfg = HarrisConfig {
            max_count: 20,
            ..Default::default()
        };
        let a = detect_keypoints(&img, &cfg);
        let b = detect_keypoints(&img, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|p| p[0].score >= p[1].score));
        for (i, p) in a.iter().enumerate() {
            for q in &a[i + 1..] {
                assert!((p.u - q.u).hypot(p.v - q.v) > 7.0);
            }
        }
    }

    #[test]
    fn tiny_image_is_empty() {
        let img = GrayF32::from_fn(20, 20, |x, _| image::Luma([x as f32 * 10.0]));
        assert!(detect_keypoints(&img, &HarrisConfig::default()).is_empty());
    }
}
