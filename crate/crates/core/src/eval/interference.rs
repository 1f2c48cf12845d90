use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flare {
    /// Pixel coordinates of the centre.
    pub center: [f64; 2],
    pub radius: f64,
    /// Intensity added at the centre, 0–255 scale.
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterferenceSpec {
    pub brightness_scale: f64,
    /// Brightness scale is drawn per image from
    /// `brightness_scale ± brightness_jitter`.
    pub brightness_jitter: f64,
    /// Contrast about mid-gray 128.
    pub contrast_scale: f64,
    pub noise_sigma: f64,
    /// Length of a horizontal motion-blur kernel, pixels.
    pub blur_len: f64,
    pub flare: Option<Flare>,
}

impl Default for InterferenceSpec {
    fn default() -> Self {
        Self {
            brightness_scale: 1.0,
            brightness_jitter: 0.0,
            contrast_scale: 1.0,
            noise_sigma: 0.0,
            blur_len: 0.0,
            flare: None,
        }
    }
}

impl InterferenceSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.brightness_scale > 0.0
            && self.contrast_scale > 0.0
            && self.brightness_jitter >= 0.0
            && self.brightness_jitter < self.brightness_scale
            && self.noise_sigma >= 0.0
            && self.blur_len >= 0.0
            && self
                .flare
                .is_none_or(|f| f.radius > 0.0 && f.strength >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid interference settings {self:?}"
            )))
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }
}

fn clamp(v: f32) -> f32 {
    v.clamp(0.0, 255.0)
}

/// Applies, in order: contrast and brightness, motion blur, flare, noise.
/// Each stage clamps to [0, 255]. The identity spec returns the input bytes.
pub fn perturb_image(img: &RgbImage, s: &InterferenceSpec, seed: u64) -> Result<RgbImage> {
    s.validate()?;
    if s.is_identity() {
        return Ok(img.clone());
    }
    let (w, h) = img.dimensions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<f32> = img.as_raw().iter().map(|&v| v as f32).collect();

    let brightness = if s.brightness_jitter > 0.0 {
        s.brightness_scale + rng.gen_range(-s.brightness_jitter..=s.brightness_jitter)
    } else {
        s.brightness_scale
    };
    if brightness != 1.0 || s.contrast_scale != 1.0 {
        let (c, b) = (s.contrast_scale as f32, brightness as f32);
        for v in buf.iter_mut() {
            *v = clamp(clamp((*v - 128.0) * c + 128.0) * b);
        }
    }

    let len = s.blur_len.round() as i64;
    if len > 1 {
        let lo = -(len - 1) / 2;
        let hi = lo + len - 1;
        let src = buf.clone();
        let inv = 1.0 / len as f32;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut acc = [0f32; 3];
                for dx in lo..=hi {
                    let xs = (x + dx).clamp(0, w as i64 - 1);
                    let i = ((y * w as i64 + xs) * 3) as usize;
                    for k in 0..3 {
                        acc[k] += src[i + k];
                    }
                }
                let i = ((y * w as i64 + x) * 3) as usize;
                for k in 0..3 {
                    buf[i + k] = clamp(acc[k] * inv);
                }
            }
        }
    }

    if let Some(f) = s.flare {
        for y in 0..h {
            for x in 0..w {
                let r = (x as f64 - f.center[0]).hypot(y as f64 - f.center[1]) / f.radius;
                if r < 1.0 {
                    let add = (f.strength * (1.0 - r) * (1.0 - r)) as f32;
                    let i = ((y * w + x) * 3) as usize;
                    for k in 0..3 {
                        buf[i + k] = clamp(buf[i + k] + add);
                    }
                }
            }
        }
    }

    if s.noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0f32, s.noise_sigma as f32).map_err(|e| Error::invalid(e.to_string()))?;
        for v in buf.iter_mut() {
            *v = clamp(*v + normal.sample(&mut rng));
        }
    }

    let raw: Vec<u8> = buf.iter().map(|v| v.round() as u8).collect();
    Ok(RgbImage::from_raw(w, h, raw).expect("buffer size matches"))
}

/// Uniform gray image, handy for checks.
pub fn gray_image(w: u32, h: u32, level: u8) -> RgbImage {
    RgbImage::from_pixel(w, h, Rgb([level; 3]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured() -> RgbImage {
        RgbImage::from_fn(40, 30, |x, y| {
            Rgb([(x * 6) as u8, (y * 8) as u8, ((x * y) % 256) as u8])
        })
    }

    #[test]
    fn identity_is_bit_exact() {
        let img = textured();
        assert_eq!(
            perturb_image(&img, &InterferenceSpec::default(), 9).unwrap(),
            img
        );
    }

    #[test]
    fn brightness_clamps() {
        let s = InterferenceSpec {
            brightness_scale: 2.0,
            ..Default::default()
        };
        let out = perturb_image(&gray_image(4, 4, 128), &s, 0).unwrap();
        assert!(out.pixels().all(|p| p.0 == [255; 3]));
        let s = InterferenceSpec {
            brightness_scale: 0.5,
            ..Default::default()
        };
        assert!(perturb_image(&gray_image(4, 4, 100), &s, 0)
            .unwrap()
            .pixels()
            .all(|p| p.0 == [50; 3]));
    }

    #[test]
    fn noise_is_seeded() {
        let s = InterferenceSpec {
            noise_sigma: 5.0,
            ..Default::default()
        };
        let img = textured();
        let a = perturb_image(&img, &s, 3).unwrap();
        assert_eq!(a, perturb_image(&img, &s, 3).unwrap());
        assert_ne!(a, perturb_image(&img, &s, 4).unwrap());
        assert_ne!(a, img);
    }

    #[test]
    fn blur_preserves_flat_regions_and_flare_brightens_centre() {
        let s = InterferenceSpec {
            blur_len: 5.0,
            flare: Some(Flare {
                center: [10.0, 10.0],
                radius: 6.0,
                strength: 80.0,
            }),
            ..Default::default()
        };
        let out = perturb_image(&gray_image(30, 20, 60), &s, 0).unwrap();
        assert_eq!(out.get_pixel(10, 10).0, [140; 3]);
        assert_eq!(out.get_pixel(25, 18).0, [60; 3]);
    }

    #[test]
    fn invalid_specs_rejected() {
        let s = InterferenceSpec {
            contrast_scale: 0.0,
            ..Default::default()
        };
        assert!(perturb_image(&textured(), &s, 0).is_err());
    }
}
