use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::binio::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;
use crate::imageio;

const MAGIC: &[u8; 4] = b"SLTR";
const VERSION: u32 = 1;

/// Regular heightfield with an aligned color texture.
///
/// Grid sample `(i, j)` sits at `origin + (i·cell_size, j·cell_size)` with
/// height `origin.z + heights[j·width + i]`. The texture spans the same
/// extent at `texels_per_cell` texels per grid cell, texel `(tx, ty)` sitting
/// at `origin + (tx, ty)·cell_size/texels_per_cell`. Row 0 of both rasters is
/// the southern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    width: u32,
    height: u32,
    cell_size: f64,
    origin: LocalPoint<f64>,
    heights: Vec<f32>,
    texture: RgbImage,
    texels_per_cell: u32,
    min_height: f64,
    max_height: f64,
}

impl Terrain {
    pub fn new(
        width: u32,
        height: u32,
        cell_size: f64,
        origin: LocalPoint<f64>,
        heights: Vec<f32>,
        texture: RgbImage,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid("terrain grid needs at least 2×2 samples"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid("cell size must be positive"));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("terrain origin must be finite"));
        }
        if heights.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: width as usize * height as usize,
                found: heights.len(),
            });
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::invalid("terrain heights must be finite"));
        }
        let (tw, th) = texture.dimensions();
        if tw < 2 || (tw - 1) % (width - 1) != 0 {
            return Err(Error::invalid(format!(
                "texture width {tw} does not tile a {width}-sample grid"
            )));
        }
        let texels_per_cell = (tw - 1) / (width - 1);
        if th != (height - 1) * texels_per_cell + 1 {
            return Err(Error::invalid(format!(
                "texture height {th} does not match grid height {height} at {texels_per_cell} texels/cell"
            )));
        }
        let (lo, hi) = heights
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &h| {
                (lo.min(h), hi.max(h))
            });
        Ok(Self {
            width,
            height,
            cell_size,
            origin,
            heights,
            texture,
            texels_per_cell,
            min_height: origin.z + lo as f64,
            max_height: origin.z + hi as f64,
        })
    }

    pub fn grid_width(&self) -> u32 {
        self.width
    }

    pub fn grid_height(&self) -> u32 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> LocalPoint<f64> {
        self.origin
    }

    pub fn heights(&self) -> &[f32] {
        &self.heights
    }

    pub fn texture(&self) -> &RgbImage {
        &self.texture
    }

    /// Absolute height range, origin offset included.
    pub fn height_range(&self) -> (f64, f64) {
        (self.min_height, self.max_height)
    }

    /// `(x0, y0, x1, y1)` covered by the grid.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let o = self.origin;
        (
            o.x,
            o.y,
            o.x + (self.width - 1) as f64 * self.cell_size,
            o.y + (self.height - 1) as f64 * self.cell_size,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Bilinearly interpolated surface height.
    pub fn sample_height(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::OutOfExtent { x, y });
        }
        Ok(self.height_unchecked(x, y))
    }

    /// Like [`Terrain::sample_height`] for points already known to be inside.
    #[inline]
    pub(crate) fn height_unchecked(&self, x: f64, y: f64) -> f64 {
        let gx = (x - self.origin.x) / self.cell_size;
        let gy = (y - self.origin.y) / self.cell_size;
        self.origin.z + bilinear_grid(&self.heights, self.width, self.height, gx, gy)
    }

    /// Bilinear texture lookup at a surface point; the shade depends on the
    /// point alone, never on the viewer.
    #[inline]
    pub fn shade(&self, x: f64, y: f64) -> [f32; 3] {
        let scale = self.texels_per_cell as f64 / self.cell_size;
        let tx = (x - self.origin.x) * scale;
        let ty = (y - self.origin.y) * scale;
        let (tw, th) = self.texture.dimensions();
        let fx = tx.clamp(0.0, (tw - 1) as f64);
        let fy = ty.clamp(0.0, (th - 1) as f64);
        let x0 = (fx.floor() as u32).min(tw - 2);
        let y0 = (fy.floor() as u32).min(th - 2);
        let ax = (fx - x0 as f64) as f32;
        let ay = (fy - y0 as f64) as f32;
        let raw = self.texture.as_raw();
        let at = |x: u32, y: u32| {
            let i = 3 * (y as usize * tw as usize + x as usize);
            [raw[i] as f32, raw[i + 1] as f32, raw[i + 2] as f32]
        };
        let (a, b, c, d) = (
            at(x0, y0),
            at(x0 + 1, y0),
            at(x0, y0 + 1),
            at(x0 + 1, y0 + 1),
        );
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] + (b[k] - a[k]) * ax;
            let bot = c[k] + (d[k] - c[k]) * ax;
            out[k] = top + (bot - top) * ay;
        }
        out
    }

    /// Writes the heightmap to `path` and the texture next to it as `.ppm`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::with_header(MAGIC, VERSION);
        w.u32(self.width);
        w.u32(self.height);
        w.f64(self.cell_size);
        w.f64(self.origin.x);
        w.f64(self.origin.y);
        w.f64(self.origin.z);
        w.f32_slice(&self.heights);
        w.write_to(path)?;
        imageio::write_ppm(&texture_path(path), &self.texture)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut r = Reader::open(&name, &bytes, MAGIC, VERSION)?;
        let width = r.u32()?;
        let height = r.u32()?;
        let cell_size = r.f64()?;
        let origin = LocalPoint::new(r.f64()?, r.f64()?, r.f64()?);
        let heights = r.f32_vec(width as usize * height as usize)?;
        r.finish()?;
        let texture = imageio::read_ppm(&texture_path(path))?;
        Self::new(width, height, cell_size, origin, heights, texture)
    }
}

pub fn texture_path(heightmap: &Path) -> PathBuf {
    heightmap.with_extension("ppm")
}

/// Bilinear interpolation on a row-major grid at fractional index `(gx, gy)`,
/// clamped to the grid.
#[inline]
pub(crate) fn bilinear_grid(data: &[f32], w: u32, h: u32, gx: f64, gy: f64) -> f64 {
    let gx = gx.clamp(0.0, (w - 1) as f64);
    let gy = gy.clamp(0.0, (h - 1) as f64);
    let x0 = (gx as u32).min(w - 2);
    let y0 = (gy as u32).min(h - 2);
    let ax = gx - x0 as f64;
    let ay = gy - y0 as f64;
    let i = y0 as usize * w as usize + x0 as usize;
    let a = data[i] as f64;
    let b = data[i + 1] as f64;
    let c = data[i + w as usize] as f64;
    let d = data[i + w as usize + 1] as f64;
    let top = a + (b - a) * ax;
    let bot = c + (d - c) * ax;
    top + (bot - top) * ay
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Terrain {
        // heights: row 0 = {0, 0}, row 1 = {2, 2}
        Terrain::new(
            2,
            2,
            4.0,
            LocalPoint::new(10.0, 20.0, 1.0),
            vec![0.0, 0.0, 2.0, 2.0],
            RgbImage::new(2, 2),
        )
        .unwrap()
    }

    #[test]
    fn corners_and_midpoint() {
        let t = ramp();
        assert_eq!(t.sample_height(10.0, 20.0).unwrap(), 1.0);
        assert_eq!(t.sample_height(14.0, 24.0).unwrap(), 3.0);
        assert_eq!(t.sample_height(12.0, 22.0).unwrap(), 2.0);
        assert_eq!(t.height_range(), (1.0, 3.0));
    }

    #[test]
    fn out_of_extent_is_an_error() {
        let t = ramp();
        assert!(matches!(
            t.sample_height(9.9, 21.0),
            Err(Error::OutOfExtent { .. })
        ));
        assert!(t.sample_height(12.0, 24.1).is_err());
    }

    #[test]
    fn continuity_under_shrinking_offsets() {
        let t = ramp();
        let base = t.sample_height(11.3, 21.7).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let eps = 10f64.powi(-k);
            let d = (t.sample_height(11.3 + eps, 21.7 + eps).unwrap() - base).abs();
            assert!(d <= prev);
            prev = d;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn mismatched_texture_rejected() {
        let r = Terrain::new(
            3,
            3,
            1.0,
            LocalPoint::default(),
            vec![0.0; 9],
            RgbImage::new(4, 5),
        );
        assert!(r.is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("terrain.bin");
        let t = ramp();
        t.save(&path).unwrap();
        assert!(texture_path(&path).exists());
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SLTR");
        assert_eq!(bytes.len(), 4 + 4 * 3 + 8 * 4 + 4 * 4);
        assert_eq!(Terrain::load(&path).unwrap(), t);
    }
}
