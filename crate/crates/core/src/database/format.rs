//! Binary codecs for the per-database files.

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::features::{Keypoint, LocalFeature};
use crate::world::DepthMap;

pub const GLOBALS_MAGIC: &[u8; 4] = b"SLGD";
pub const LOCAL_MAGIC: &[u8; 4] = b"SLLF";
pub const DEPTH_MAGIC: &[u8; 4] = b"SLDM";
pub const FILE_VERSION: u32 = 1;

/// Row-major N×D array of global descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalArray {
    n: usize,
    d: usize,
    data: Vec<f32>,
}

impl GlobalArray {
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("descriptor dimension must be positive"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        Ok(Self { n, d, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(GLOBALS_MAGIC, FILE_VERSION);
        w.u64(self.n as u64);
        w.u32(self.d as u32);
        w.f32_slice(&self.data);
        w.into_bytes()
    }

    pub fn from_bytes(name: &str, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(name, bytes, GLOBALS_MAGIC, FILE_VERSION)?;
        let n = r.u64()? as usize;
        let d = r.u32()? as usize;
        let count = n
            .checked_mul(d)
            .ok_or_else(|| Error::corrupt(name, "row count overflows"))?;
        let data = r.f32_vec(count)?;
        r.finish()?;
        Self::new(n, d, data).map_err(|e| Error::corrupt(name, e.to_string()))
    }
}

pub fn encode_local(features: &[LocalFeature], dim: usize) -> Result<Vec<u8>> {
    let mut w = Writer::with_header(LOCAL_MAGIC, FILE_VERSION);
    w.u32(features.len() as u32);
    w.u32(dim as u32);
    for f in features {
        if f.descriptor.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.descriptor.len(),
            });
        }
        w.f32(f.keypoint.u);
        w.f32(f.keypoint.v);
        w.f32(f.keypoint.score);
        w.f32_slice(&f.descriptor);
    }
    Ok(w.into_bytes())
}

pub fn decode_local(name: &str, bytes: &[u8]) -> Result<Vec<LocalFeature>> {
    let mut r = Reader::open(name, bytes, LOCAL_MAGIC, FILE_VERSION)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    // Guard allocation against a corrupt count.
    let per = 12 + 4 * dim;
    if count.saturating_mul(per) > bytes.len() {
        return Err(Error::corrupt(
            name,
            format!("{count} features do not fit in {} bytes", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let keypoint = Keypoint {
            u: r.f32()?,
            v: r.f32()?,
            score: r.f32()?,
        };
        out.push(LocalFeature {
            keypoint,
            descriptor: r.f32_vec(dim)?,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let mut w = Writer::with_header(DEPTH_MAGIC, FILE_VERSION);
    w.u32(depth.width);
    w.u32(depth.height);
    w.u32(depth.stride);
    w.f32_slice(&depth.data);
    w.into_bytes()
}

pub fn decode_depth(name: &str, bytes: &[u8]) -> Result<DepthMap> {
    let mut r = Reader::open(name, bytes, DEPTH_MAGIC, FILE_VERSION)?;
    let width = r.u32()?;
    let height = r.u32()?;
    let stride = r.u32()?;
    if stride == 0 {
        return Err(Error::corrupt(name, "zero stride"));
    }
    let data = r.f32_vec(width as usize * height as usize)?;
    r.finish()?;
    Ok(DepthMap {
        width,
        height,
        stride,
        data,
    })
}
