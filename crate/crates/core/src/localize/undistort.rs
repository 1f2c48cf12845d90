use image::{Rgb, RgbImage};

use crate::camera::CameraModel;

/// Radial model `r_d = r_u·(1 + k1·r_u² + k2·r_u⁴)` on normalized coordinates.
#[inline]
pub fn distort_normalized(k1: f64, k2: f64, x: f64, y: f64) -> (f64, f64) {
    let r2 = x * x + y * y;
    let s = 1.0 + k1 * r2 + k2 * r2 * r2;
    (x * s, y * s)
}

fn bilinear(img: &RgbImage, x: f64, y: f64) -> [u8; 3] {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
        return [0, 0, 0];
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (ax, ay) = (x - x0, y - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (a, b) = (img.get_pixel(x0, y0).0, img.get_pixel(x1, y0).0);
    let (c, d) = (img.get_pixel(x0, y1).0, img.get_pixel(x1, y1).0);
    std::array::from_fn(|k| {
        let top = a[k] as f64 + (b[k] as f64 - a[k] as f64) * ax;
        let bot = c[k] as f64 + (d[k] as f64 - c[k] as f64) * ax;
        (top + (bot - top) * ay).round().clamp(0.0, 255.0) as u8
    })
}

/// Area-weighted resampling: every output pixel averages the source area it
/// covers, with fractional weights at the edges.
pub fn resample_area(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.dimensions() == (width, height) {
        return img.clone();
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let spans = |out: u32, scale: f64, limit: u32| -> Vec<Vec<(u32, f64)>> {
        (0..out)
            .map(|o| {
                let (a, b) = (o as f64 * scale, (o + 1) as f64 * scale);
                let mut v = Vec::new();
                let mut i = a.floor() as u32;
                while (i as f64) < b && i < limit {
                    let w = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                    if w > 0.0 {
                        v.push((i, w));
                    }
                    i += 1;
                }
                v
            })
            .collect()
    };
    let xs = spans(width, sx, img.width());
    let ys = spans(height, sy, img.height());
    RgbImage::from_fn(width, height, |x, y| {
        let mut acc = [0f64; 3];
        let mut wsum = 0.0;
        for &(j, wy) in &ys[y as usize] {
            for &(i, wx) in &xs[x as usize] {
                let p = img.get_pixel(i, j).0;
                let w = wx * wy;
                for k in 0..3 {
                    acc[k] += w * p[k] as f64;
                }
                wsum += w;
            }
        }
        Rgb(acc.map(|a| (a / wsum).round().clamp(0.0, 255.0) as u8))
    })
}

/// Removes radial distortion described by `cam` (which must describe `img`)
/// and resamples to `width`×`height`. Pixels whose source falls outside the
/// image are black. Without distortion and at equal size the image is
/// returned unchanged.
pub fn undistort(img: &RgbImage, cam: &CameraModel<f64>, width: u32, height: u32) -> RgbImage {
    let straight = if cam.k1 == 0.0 && cam.k2 == 0.0 {
        img.clone()
    } else {
        RgbImage::from_fn(img.width(), img.height(), |px, py| {
            let x = (px as f64 - cam.cx) / cam.fx;
            let y = (py as f64 - cam.cy) / cam.fy;
            let (xd, yd) = distort_normalized(cam.k1, cam.k2, x, y);
            Rgb(bilinear(img, cam.cx + cam.fx * xd, cam.cy + cam.fy * yd))
        })
    };
    resample_area(&straight, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([
                (x * 3 % 256) as u8,
                (y * 5 % 256) as u8,
                ((x + y) % 256) as u8,
            ])
        })
    }

    #[test]
    fn identity_without_distortion() {
        let img = pattern(64, 48);
        let cam = CameraModel::from_fov(64, 48, 1.2).unwrap();
        assert_eq!(undistort(&img, &cam, 64, 48), img);
    }

    #[test]
    fn radial_model() {
        let (x, y) = distort_normalized(0.1, 0.0, 0.5, 0.0);
        assert!((x - 0.5125).abs() < 1e-12 && y == 0.0);
        let (x, y) = distort_normalized(0.1, 0.05, 0.3, 0.4);
        let s = 1.0 + 0.1 * 0.25 + 0.05 * 0.0625;
        assert!((x - 0.3 * s).abs() < 1e-12 && (y - 0.4 * s).abs() < 1e-12);
    }

    #[test]
    fn downsamples_by_area() {
        let img = RgbImage::from_fn(1280, 960, |x, y| {
            if (x + y) % 2 == 0 {
                Rgb([200, 0, 0])
            } else {
                Rgb([0, 0, 100])
            }
        });
        let cam = CameraModel::from_fov(1280, 960, 84f64.to_radians()).unwrap();
        let out = undistort(&img, &cam, 640, 480);
        assert_eq!(out.dimensions(), (640, 480));
        assert!(out.pixels().all(|p| p.0 == [100, 0, 50]));
    }

    #[test]
    fn barrel_distortion_moves_content_inward() {
        // A bright pixel at normalized radius 0.5125 in the distorted image
        // lands at radius 0.5 after undistortion.
        let mut cam = CameraModel::from_fov(201, 201, 90f64.to_radians()).unwrap();
        cam.cx = 100.0;
        cam.cy = 100.0;
        cam.k1 = 0.1;
        let mut img = RgbImage::new(201, 201);
        let src = (100.0 + cam.fx * 0.5125).round() as u32;
        for dy in 0..3 {
            for dx in 0..3 {
                img.put_pixel(src - 1 + dx, 99 + dy, Rgb([255, 255, 255]));
            }
        }
        let out = undistort(&img, &cam, 201, 201);
        let target = 100.0 + cam.fx * 0.5;
        let brightest = (0..201)
            .max_by_key(|&x| out.get_pixel(x, 100).0[0])
            .unwrap();
        assert!(
            (brightest as f64 - target).abs() <= 1.0,
            "{brightest} vs {target}"
        );
    }
}
