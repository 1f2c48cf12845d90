use serde::{Deserialize, Serialize};

use super::harris::Keypoint;
use crate::imageio::GrayF32;

/// Side of the sampled patch in pixels.
pub const PATCH_SIZE: usize = 16;
/// Side of the pooled grid; the descriptor has `POOLED_SIZE²` entries.
pub const POOLED_SIZE: usize = 8;
pub const LOCAL_DIM: usize = POOLED_SIZE * POOLED_SIZE;

/// Minimum distance from a keypoint to the image border.
const MARGIN: f32 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFeature {
    pub keypoint: Keypoint,
    /// Unit norm, or all zeros for a textureless patch.
    pub descriptor: Vec<f32>,
}

impl LocalFeature {
    pub fn is_degenerate(&self) -> bool {
        self.descriptor.iter().all(|&v| v == 0.0)
    }
}

/// Mean-free, L2-normalized 8×8 average-pooled intensity patch around each
/// keypoint. Keypoints closer than 8 px to the border are dropped.
pub fn describe_local(img: &GrayF32, keypoints: &[Keypoint]) -> Vec<LocalFeature> {
    let (w, h) = (img.width() as f32, img.height() as f32);
    keypoints
        .iter()
        .filter(|k| {
            k.u >= MARGIN && k.v >= MARGIN && k.u <= w - 1.0 - MARGIN && k.v <= h - 1.0 - MARGIN
        })
        .map(|k| LocalFeature {
            keypoint: *k,
            descriptor: describe_patch(img, k.u, k.v),
        })
        .collect()
}

fn describe_patch(img: &GrayF32, u: f32, v: f32) -> Vec<f32> {
    let w = img.width() as usize;
    let px = img.as_raw();
    let sample = |x: f32, y: f32| {
        let (x0, y0) = (x.floor(), y.floor());
        let (ax, ay) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        let i = y0 * w + x0;
        let a = px[i];
        let b = px[i + 1];
        let c = px[i + w];
        let d = px[i + w + 1];
        let top = a + (b - a) * ax;
        let bot = c + (d - c) * ax;
        top + (bot - top) * ay
    };
    let half = (PATCH_SIZE as f32 - 1.0) * 0.5;
    let pool = PATCH_SIZE / POOLED_SIZE;
    let mut desc = vec![0f32; LOCAL_DIM];
    for py in 0..PATCH_SIZE {
        for pxi in 0..PATCH_SIZE {
            let s = sample(u + pxi as f32 - half, v + py as f32 - half);
            desc[(py / pool) * POOLED_SIZE + pxi / pool] += s;
        }
    }
    let norm_pool = 1.0 / (pool * pool) as f32;
    for d in desc.iter_mut() {
        *d *= norm_pool;
    }
    let mean = desc.iter().sum::<f32>() / LOCAL_DIM as f32;
    for d in desc.iter_mut() {
        *d -= mean;
    }
    let norm = desc
        .iter()
        .map(|d| (*d as f64) * (*d as f64))
        .sum::<f64>()
        .sqrt();
    if norm < 1e-12 {
        desc.iter_mut().for_each(|d| *d = 0.0);
    } else {
        let inv = (1.0 / norm) as f32;
        desc.iter_mut().for_each(|d| *d *= inv);
    }
    desc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(u: f32, v: f32) -> Keypoint {
        Keypoint { u, v, score: 1.0 }
    }

    fn textured() -> GrayF32 {
        GrayF32::from_fn(64, 48, |x, y| {
            image::Luma([((x * 13 + y * 7) % 50) as f32 + (x as f32 * 0.3)])
        })
    }

    #[test]
    fn constant_patch_is_zero() {
        let img = GrayF32::from_pixel(40, 40, image::Luma([12.0]));
        let f = describe_local(&img, &[kp(20.0, 20.0)]);
        assert_eq!(f.len(), 1);
        assert!(f[0].is_degenerate());
        assert_eq!(f[0].descriptor.len(), LOCAL_DIM);
    }

    #[test]
    fn textured_patch_is_unit_norm() {
        let f = describe_local(&textured(), &[kp(20.3, 17.8), kp(40.0, 30.0)]);
        for feat in &f {
            let n: f32 = feat.descriptor.iter().map(|d| d * d).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-6, "{n}");
        }
    }

    #[test]
    fn intensity_bias_is_ignored() {
        let img = textured();
        let biased = GrayF32::from_fn(64, 48, |x, y| {
            image::Luma([img.get_pixel(x, y).0[0] + 40.0])
        });
        let kps = [kp(20.3, 17.8), kp(33.0, 25.5)];
        let a = describe_local(&img, &kps);
        let b = describe_local(&biased, &kps);
        for (fa, fb) in a.iter().zip(&b) {
            for (x, y) in fa.descriptor.iter().zip(&fb.descriptor) {
                assert!((x - y).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn border_keypoints_dropped() {
        let img = textured();
        let f = describe_local(
            &img,
            &[
                kp(7.9, 20.0),
                kp(20.0, 7.0),
                kp(55.5, 20.0),
                kp(8.0, 8.0),
                kp(55.0, 39.0),
            ],
        );
        let kept: Vec<_> = f.iter().map(|f| (f.keypoint.u, f.keypoint.v)).collect();
        assert_eq!(kept, vec![(8.0, 8.0), (55.0, 39.0)]);
    }
}
