use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::terrain::Terrain;
use crate::camera::{CameraModel, PoseSE3};
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const SKY_COLOR: [u8; 3] = [168, 198, 232];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Rays travelling farther than this (metres along the ray) count as sky.
    pub max_range: f64,
    pub bisection_steps: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            max_range: 5000.0,
            bisection_steps: 16,
        }
    }
}

/// Camera-frame Z-depth raster, possibly subsampled.
///
/// Stored sample `(i, j)` holds the depth of full-resolution pixel
/// `(i·stride, j·stride)`. Zero marks pixels without a terrain hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    pub data: Vec<f32>,
}

impl DepthMap {
    #[inline]
    pub fn get(&self, i: u32, j: u32) -> f32 {
        self.data[j as usize * self.width as usize + i as usize]
    }

    /// Depth at a full-resolution pixel via the nearest stored sample.
    pub fn lookup(&self, u: f64, v: f64) -> f32 {
        let s = self.stride as f64;
        let i = (u / s).round().clamp(0.0, (self.width - 1) as f64) as u32;
        let j = (v / s).round().clamp(0.0, (self.height - 1) as f64) as u32;
        self.get(i, j)
    }

    /// Keeps every `stride`-th pixel of a full-resolution map.
    pub fn subsample(&self, stride: u32) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("depth stride must be positive"));
        }
        if self.stride != 1 {
            return Err(Error::invalid(
                "only full-resolution depth maps can be subsampled",
            ));
        }
        let width = self.width.div_ceil(stride);
        let height = self.height.div_ceil(stride);
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for j in 0..height {
            for i in 0..width {
                data.push(self.get(i * stride, j * stride));
            }
        }
        Ok(Self {
            width,
            height,
            stride,
            data,
        })
    }

    /// Full-resolution dimensions this map stands for.
    pub fn covers(&self, width: u32, height: u32) -> bool {
        width.div_ceil(self.stride) == self.width && height.div_ceil(self.stride) == self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub color: RgbImage,
    pub depth: DepthMap,
    pub pose: PoseSE3<f64>,
    pub camera: CameraModel<f64>,
}

impl RenderedView {
    /// Fraction of pixels that saw no terrain.
    pub fn sky_fraction(&self) -> f64 {
        let sky = self.depth.data.iter().filter(|&&d| d == 0.0).count();
        sky as f64 / self.depth.data.len() as f64
    }
}

pub fn render(
    terrain: &Terrain,
    pose: &PoseSE3<f64>,
    cam: &CameraModel<f64>,
) -> Result<RenderedView> {
    render_with(terrain, pose, cam, &RenderOptions::default())
}

/// Ray-marches the heightfield for every pixel centre.
///
/// Rays advance in fixed steps of half a grid cell inside the slab bounded by
/// the terrain's height range and horizontal extent; the first step that
/// lands at or below the surface is refined by bisection. Depth is the hit's
/// camera-frame Z and color is the texture at the hit, unlit.
pub fn render_with(
    terrain: &Terrain,
    pose: &PoseSE3<f64>,
    cam: &CameraModel<f64>,
    opts: &RenderOptions,
) -> Result<RenderedView> {
    cam.validate()?;
    if !pose.is_finite() {
        return Err(Error::invalid("pose must be finite"));
    }
    let o = pose.position.to_vec();
    if terrain.contains(o.x, o.y) {
        let ground = terrain.height_unchecked(o.x, o.y);
        if o.z <= ground {
            return Err(Error::BelowTerrain {
                camera_z: o.z,
                ground,
            });
        }
    }

    let rot = pose.camera_to_world_rotation();
    let (w, h) = (cam.width, cam.height);
    let mut color = RgbImage::new(w, h);
    let mut depth = vec![0f32; w as usize * h as usize];
    let marcher = Marcher::new(terrain, o, opts);

    for py in 0..h {
        for px in 0..w {
            // Camera ray with unit Z, so the hit parameter is the Z-depth.
            let dir = rot * cam.unproject(px as f64, py as f64);
            let idx = py as usize * w as usize + px as usize;
            match marcher.hit(&dir) {
                Some((t, x, y)) => {
                    let c = terrain.shade(x, y);
                    color.put_pixel(px, py, Rgb(c.map(|v| v.round().clamp(0.0, 255.0) as u8)));
                    depth[idx] = t as f32;
                }
                None => color.put_pixel(px, py, Rgb(SKY_COLOR)),
            }
        }
    }

    Ok(RenderedView {
        color,
        depth: DepthMap {
            width: w,
            height: h,
            stride: 1,
            data: depth,
        },
        pose: *pose,
        camera: *cam,
    })
}

struct Marcher<'a> {
    terrain: &'a Terrain,
    origin: Vec3<f64>,
    bounds: (f64, f64, f64, f64),
    zmin: f64,
    zmax: f64,
    step: f64,
    max_range: f64,
    bisections: u32,
}

impl<'a> Marcher<'a> {
    fn new(terrain: &'a Terrain, origin: Vec3<f64>, opts: &RenderOptions) -> Self {
        let (zmin, zmax) = terrain.height_range();
        Self {
            terrain,
            origin,
            bounds: terrain.bounds(),
            zmin,
            zmax,
            step: 0.5 * terrain.cell_size(),
            max_range: opts.max_range,
            bisections: opts.bisection_steps,
        }
    }

    /// Parameter interval where the ray is inside `[lo, hi]` along one axis.
    fn clip(o: f64, d: f64, lo: f64, hi: f64, t0: &mut f64, t1: &mut f64) -> bool {
        if d.abs() < 1e-15 {
            return o >= lo && o <= hi;
        }
        let (a, b) = ((lo - o) / d, (hi - o) / d);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        *t0 = t0.max(a);
        *t1 = t1.min(b);
        t0 <= t1
    }

    /// `(t, x, y)` of the first surface crossing along `origin + t·dir`.
    fn hit(&self, dir: &Vec3<f64>) -> Option<(f64, f64, f64)> {
        let len = dir.norm();
        let (o, d) = (self.origin, *dir);
        let mut t0 = 0.0f64;
        let mut t1 = self.max_range / len;
        let (x0, y0, x1, y1) = self.bounds;
        if !Self::clip(o.x, d.x, x0, x1, &mut t0, &mut t1)
            || !Self::clip(o.y, d.y, y0, y1, &mut t0, &mut t1)
            || !Self::clip(o.z, d.z, self.zmin, self.zmax, &mut t0, &mut t1)
        {
            return None;
        }
        let dt = self.step / len;
        let height_at = |t: f64| {
            let x = o.x + t * d.x;
            let y = o.y + t * d.y;
            (o.z + t * d.z) - self.terrain.height_unchecked(x, y)
        };
        let mut prev = t0;
        if height_at(prev) <= 0.0 {
            return Some((prev, o.x + prev * d.x, o.y + prev * d.y));
        }
        loop {
            let t = (prev + dt).min(t1);
            if height_at(t) <= 0.0 {
                let (mut lo, mut hi) = (prev, t);
                for _ in 0..self.bisections {
                    let mid = 0.5 * (lo + hi);
                    if height_at(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                return Some((t, o.x + t * d.x, o.y + t * d.y));
            }
            if t >= t1 {
                return None;
            }
            prev = t;
        }
    }
}
