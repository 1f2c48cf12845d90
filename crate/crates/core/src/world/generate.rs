//! Seeded procedural terrain: rolling value-noise relief under a texture of
//! smooth fields, roads, and dense clusters of high-contrast landmarks.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::terrain::Terrain;
use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainConfig {
    /// Peak-to-peak height variation in metres.
    pub relief_m: f64,
    /// Target ground size of one texel; rounded so texels tile the grid cells.
    pub texel_size_m: f64,
    /// Typical diameter of a uniformly colored field.
    pub field_size_m: f64,
    /// Spacing of the jittered lattice that seeds landmark clusters.
    pub cluster_spacing_m: f64,
    /// Chance that a lattice site carries a cluster.
    pub cluster_probability: f64,
    pub cluster_radius_m: f64,
    /// Roads per kilometre of extent, per orientation family.
    pub roads_per_km: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            relief_m: 8.0,
            texel_size_m: 0.5,
            field_size_m: 60.0,
            cluster_spacing_m: 45.0,
            cluster_probability: 0.85,
            cluster_radius_m: 24.0,
            roads_per_km: 4.0,
        }
    }
}

/// Terrain centred on the local origin with default styling.
pub fn generate_terrain(seed: u64, extent: (f64, f64), cell_size: f64) -> Result<Terrain> {
    generate_terrain_with(seed, extent, cell_size, &TerrainConfig::default())
}

pub fn generate_terrain_with(
    seed: u64,
    extent: (f64, f64),
    cell_size: f64,
    cfg: &TerrainConfig,
) -> Result<Terrain> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid("cell size must be positive"));
    }
    if !(extent.0 >= cell_size && extent.1 >= cell_size) {
        return Err(Error::invalid(format!(
            "extent {:?} is smaller than one {cell_size} m cell",
            extent
        )));
    }
    if !(0.0..=30.0).contains(&cfg.relief_m) {
        return Err(Error::invalid("relief must lie in [0, 30] m"));
    }
    let width = (extent.0 / cell_size).round() as u32 + 1;
    let height = (extent.1 / cell_size).round() as u32 + 1;
    let origin = LocalPoint::new(
        -0.5 * (width - 1) as f64 * cell_size,
        -0.5 * (height - 1) as f64 * cell_size,
        0.0,
    );

    let noise = Noise { seed };
    let mut heights = Vec::with_capacity(width as usize * height as usize);
    for j in 0..height {
        for i in 0..width {
            let x = origin.x + i as f64 * cell_size;
            let y = origin.y + j as f64 * cell_size;
            let n = 0.5714 * noise.value(x / 240.0, y / 240.0, 1)
                + 0.2857 * noise.value(x / 120.0, y / 120.0, 2)
                + 0.1429 * noise.value(x / 60.0, y / 60.0, 3);
            heights.push((n * cfg.relief_m) as f32);
        }
    }

    let texels_per_cell = ((cell_size / cfg.texel_size_m).round() as u32).max(1);
    let texel = cell_size / texels_per_cell as f64;
    let tw = (width - 1) * texels_per_cell + 1;
    let th = (height - 1) * texels_per_cell + 1;
    let mut painter = Painter {
        img: RgbImage::new(tw, th),
        origin,
        texel,
    };
    painter.paint_fields(&noise, cfg);
    painter.paint_roads(&noise, cfg, extent);
    painter.paint_clusters(&noise, cfg);

    Terrain::new(width, height, cell_size, origin, heights, painter.img)
}

struct Noise {
    seed: u64,
}

impl Noise {
    /// Uniform in [0, 1) from lattice coordinates and a channel tag.
    fn hash(&self, ix: i64, iy: i64, channel: u64) -> f64 {
        let mut z = self.seed
            ^ (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ channel.wrapping_mul(0x1656_67B1_9E37_79F9);
        // splitmix64 finalizer
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Smoothly interpolated lattice noise in [0, 1].
    fn value(&self, x: f64, y: f64, channel: u64) -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (ix, iy) = (fx as i64, fy as i64);
        let sx = smoothstep(x - fx);
        let sy = smoothstep(y - fy);
        let a = self.hash(ix, iy, channel);
        let b = self.hash(ix + 1, iy, channel);
        let c = self.hash(ix, iy + 1, channel);
        let d = self.hash(ix + 1, iy + 1, channel);
        let top = a + (b - a) * sx;
        let bot = c + (d - c) * sx;
        top + (bot - top) * sy
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

const FIELD_PALETTE: [[f64; 3]; 6] = [
    [96.0, 128.0, 70.0],
    [120.0, 142.0, 84.0],
    [150.0, 132.0, 96.0],
    [84.0, 110.0, 64.0],
    [170.0, 160.0, 120.0],
    [110.0, 100.0, 80.0],
];

struct Painter {
    img: RgbImage,
    origin: LocalPoint<f64>,
    texel: f64,
}

impl Painter {
    fn world(&self, tx: u32, ty: u32) -> (f64, f64) {
        (
            self.origin.x + tx as f64 * self.texel,
            self.origin.y + ty as f64 * self.texel,
        )
    }

    /// Texel index range covering `[lo, hi]` metres along one axis.
    fn span(&self, lo: f64, hi: f64, origin: f64, len: u32) -> Option<(u32, u32)> {
        let a = ((lo - origin) / self.texel).ceil().max(0.0);
        let b = ((hi - origin) / self.texel).floor().min((len - 1) as f64);
        (a <= b).then_some((a as u32, b as u32))
    }

    fn paint_fields(&mut self, noise: &Noise, cfg: &TerrainConfig) {
        let s = cfg.field_size_m;
        let (w, h) = self.img.dimensions();
        for ty in 0..h {
            for tx in 0..w {
                let (x, y) = self.world(tx, ty);
                let (cx, cy) = ((x / s).floor() as i64, (y / s).floor() as i64);
                let mut best = (f64::INFINITY, 0i64, 0i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (gx, gy) = (cx + dx, cy + dy);
                        let sx = (gx as f64 + noise.hash(gx, gy, 10)) * s;
                        let sy = (gy as f64 + noise.hash(gx, gy, 11)) * s;
                        let d = (x - sx).powi(2) + (y - sy).powi(2);
                        if d < best.0 {
                            best = (d, gx, gy);
                        }
                    }
                }
                let pick = (noise.hash(best.1, best.2, 12) * FIELD_PALETTE.len() as f64) as usize;
                let base = FIELD_PALETTE[pick.min(FIELD_PALETTE.len() - 1)];
                let tint = (noise.hash(best.1, best.2, 13) - 0.5) * 30.0;
                let grain = (noise.value(x / 3.0, y / 3.0, 14) - 0.5) * 14.0
                    + (noise.value(x / 1.1, y / 1.1, 15) - 0.5) * 8.0;
                let px = base.map(|c| (c + tint + grain).clamp(0.0, 255.0).round() as u8);
                self.img.put_pixel(tx, ty, Rgb(px));
            }
        }
    }

    fn paint_roads(&mut self, noise: &Noise, cfg: &TerrainConfig, extent: (f64, f64)) {
        let span = extent.0.max(extent.1);
        let count = ((span / 1000.0) * cfg.roads_per_km).round().max(1.0) as i64;
        let (w, h) = self.img.dimensions();
        for family in 0..2i64 {
            let base_angle = noise.hash(family, 0, 20) * std::f64::consts::PI;
            for k in 0..count {
                let angle = base_angle
                    + family as f64 * std::f64::consts::FRAC_PI_2
                    + (noise.hash(family, k, 21) - 0.5) * 0.3;
                let offset = (noise.hash(family, k, 22) - 0.5) * span;
                let half_width = 1.5 + 2.0 * noise.hash(family, k, 23);
                let shade = 150.0 + 50.0 * noise.hash(family, k, 24);
                let (nx, ny) = (angle.cos(), angle.sin());
                for ty in 0..h {
                    for tx in 0..w {
                        let (x, y) = self.world(tx, ty);
                        let d = (x * nx + y * ny - offset).abs();
                        if d <= half_width {
                            let v = shade.round() as u8;
                            self.img.put_pixel(tx, ty, Rgb([v, v, v.saturating_sub(6)]));
                        }
                    }
                }
            }
        }
    }

    fn paint_clusters(&mut self, noise: &Noise, cfg: &TerrainConfig) {
        let s = cfg.cluster_spacing_m;
        let (w, h) = self.img.dimensions();
        let (x0, y0) = self.world(0, 0);
        let (x1, y1) = self.world(w - 1, h - 1);
        let reach = cfg.cluster_radius_m + 20.0;
        let gx0 = ((x0 - reach) / s).floor() as i64;
        let gx1 = ((x1 + reach) / s).ceil() as i64;
        let gy0 = ((y0 - reach) / s).floor() as i64;
        let gy1 = ((y1 + reach) / s).ceil() as i64;
        for gy in gy0..=gy1 {
            for gx in gx0..=gx1 {
                if noise.hash(gx, gy, 30) >= cfg.cluster_probability {
                    continue;
                }
                let cx = (gx as f64 + noise.hash(gx, gy, 31)) * s;
                let cy = (gy as f64 + noise.hash(gx, gy, 32)) * s;
                let shapes = 14 + (noise.hash(gx, gy, 33) * 22.0) as i64;
                for k in 0..shapes {
                    // Each shape draws its parameters from its own hash stream.
                    let tag = ((gx & 0xFFFF) << 16 | (gy & 0xFFFF)) * 64 + k;
                    let r = |c: u64| noise.hash(tag, k, 100 + c);
                    let rho = cfg.cluster_radius_m * r(0).sqrt();
                    let phi = r(1) * std::f64::consts::TAU;
                    let px = cx + rho * phi.cos();
                    let py = cy + rho * phi.sin();
                    let color = shape_color(r(2), r(3), r(4), r(5));
                    if r(6) < 0.72 {
                        let hw = 1.5 + 6.5 * r(7);
                        let hh = 1.5 + 6.5 * r(8);
                        let angle = r(9) * std::f64::consts::PI;
                        self.fill_rect(px, py, hw, hh, angle, color);
                        if r(10) < 0.35 {
                            // Roof detail: an inset block of a different shade.
                            let inner = shape_color(r(11), r(12), r(13), r(14));
                            self.fill_rect(px, py, hw * 0.45, hh * 0.45, angle, inner);
                        }
                    } else {
                        let radius = 0.8 + 2.6 * r(7);
                        self.fill_disc(px, py, radius, color);
                    }
                }
            }
        }
    }

    fn fill_rect(&mut self, cx: f64, cy: f64, hw: f64, hh: f64, angle: f64, color: [u8; 3]) {
        let (s, c) = angle.sin_cos();
        let ex = hw * c.abs() + hh * s.abs();
        let ey = hw * s.abs() + hh * c.abs();
        let (w, h) = self.img.dimensions();
        let Some((tx0, tx1)) = self.span(cx - ex, cx + ex, self.origin.x, w) else {
            return;
        };
        let Some((ty0, ty1)) = self.span(cy - ey, cy + ey, self.origin.y, h) else {
            return;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let (x, y) = self.world(tx, ty);
                let (dx, dy) = (x - cx, y - cy);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if u.abs() <= hw && v.abs() <= hh {
                    self.img.put_pixel(tx, ty, Rgb(color));
                }
            }
        }
    }

    fn fill_disc(&mut self, cx: f64, cy: f64, radius: f64, color: [u8; 3]) {
        let (w, h) = self.img.dimensions();
        let Some((tx0, tx1)) = self.span(cx - radius, cx + radius, self.origin.x, w) else {
            return;
        };
        let Some((ty0, ty1)) = self.span(cy - radius, cy + radius, self.origin.y, h) else {
            return;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let (x, y) = self.world(tx, ty);
                if (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius {
                    self.img.put_pixel(tx, ty, Rgb(color));
                }
            }
        }
    }
}

/// Roof/landmark colors spread widely in luminance so corners stay strong
/// after grayscale conversion.
fn shape_color(a: f64, b: f64, c: f64, d: f64) -> [u8; 3] {
    let lum = 20.0 + 225.0 * a;
    let sat = 0.35 * b;
    let hue = c * std::f64::consts::TAU;
    let jitter = (d - 0.5) * 20.0;
    let ch = |off: f64| {
        (lum * (1.0 + sat * (hue + off).cos()) + jitter)
            .clamp(0.0, 255.0)
            .round() as u8
    };
    [ch(0.0), ch(2.094), ch(4.189)]
}
