//! PPM/PGM input and output plus the grayscale working raster.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageBuffer, ImageEncoder, ImageFormat, Luma, RgbImage};

use crate::error::{Error, Result};

/// Single-channel float raster, intensities on the 0–255 scale.
pub type GrayF32 = ImageBuffer<Luma<f32>, Vec<f32>>;

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::Rgb8,
        )?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::L8,
        )?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads any PNM flavour as RGB.
pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)?;
    Ok(img.to_rgb8())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)?;
    Ok(img.to_luma8())
}

/// Rec. 601 luma.
pub fn to_gray(img: &RgbImage) -> GrayF32 {
    let data = img
        .as_raw()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
        .collect();
    GrayF32::from_raw(img.width(), img.height(), data).expect("buffer sized from source image")
}

pub fn gray_to_u8(img: &GrayF32) -> GrayImage {
    let data = img
        .as_raw()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::from_raw(img.width(), img.height(), data).expect("buffer sized from source image")
}

pub fn gray_from_u8(img: &GrayImage) -> GrayF32 {
    let data = img.as_raw().iter().map(|&v| v as f32).collect();
    GrayF32::from_raw(img.width(), img.height(), data).expect("buffer sized from source image")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = RgbImage::from_fn(7, 5, |x, y| image::Rgb([x as u8 * 30, y as u8 * 40, 200]));
        let p = dir.path().join("a.ppm");
        write_ppm(&p, &rgb).unwrap();
        assert!(fs::read(&p).unwrap().starts_with(b"P6"));
        assert_eq!(read_ppm(&p).unwrap(), rgb);

        let gray = gray_to_u8(&to_gray(&rgb));
        let p = dir.path().join("a.pgm");
        write_pgm(&p, &gray).unwrap();
        assert!(fs::read(&p).unwrap().starts_with(b"P5"));
        assert_eq!(read_pgm(&p).unwrap(), gray);
    }
}
