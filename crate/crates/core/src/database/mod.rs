//! On-disk descriptor database: global descriptor array, per-pose local
//! features and depth maps, codebook and a JSON manifest.
//!
//! Layout of a database directory:
//!
//! ```text
//! manifest.json      written last; its presence marks a complete build
//! globals.bin        N×D global descriptors
//! codebook.bin       VLAD centroids
//! local/<id>.bin     keypoints and local descriptors of entry <id>
//! depth/<id>.bin     Z-depth raster of entry <id>
//! terrain/           optional copy of the source terrain
//! ```

mod build;
mod format;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};

pub use build::{
    build_database, build_database_with_progress, estimate_size, train_codebook, BuildOptions,
    BuildReport, CodebookTraining, DatabaseMeta, DatabaseWriter, SizeEstimate,
    SKY_WARNING_FRACTION,
};
pub use format::{decode_depth, decode_local, encode_depth, encode_local, GlobalArray};

use crate::binio::read_file;
use crate::camera::{CameraModel, PoseSE3};
use crate::error::{Error, Result};
use crate::features::{Codebook, FeatureConfig, LocalFeature};
use crate::geodesy::LocalFrame;
use crate::posegrid::{enumerate_poses, GridSpec};
use crate::world::{DepthMap, Terrain};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GLOBALS_FILE: &str = "globals.bin";
pub const CODEBOOK_FILE: &str = "codebook.bin";
pub const TERRAIN_FILE: &str = "terrain/terrain.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub camera: CameraModel<f64>,
    pub frame: LocalFrame<f64>,
    pub grid: GridSpec<f64>,
    pub n: usize,
    pub global_dim: usize,
    pub local_dim: usize,
    pub clusters: usize,
    pub codebook_seed: u64,
    /// Depth rasters keep every `depth_stride`-th pixel.
    pub depth_stride: u32,
    pub features: FeatureConfig,
    /// Relative path of the terrain copy, if one was stored.
    pub terrain: Option<String>,
    /// CRC32 of every data file, keyed by relative path.
    pub checksums: BTreeMap<String, u32>,
}

#[derive(Debug)]
pub struct DatabaseEntry {
    pub id: usize,
    pub pose: PoseSE3<f64>,
    features: OnceCell<Vec<LocalFeature>>,
    depth: OnceCell<DepthMap>,
}

impl DatabaseEntry {
    fn new(id: usize, pose: PoseSE3<f64>) -> Self {
        Self {
            id,
            pose,
            features: OnceCell::new(),
            depth: OnceCell::new(),
        }
    }
}

pub fn local_path(id: usize) -> String {
    format!("local/{id}.bin")
}

pub fn depth_path(id: usize) -> String {
    format!("depth/{id}.bin")
}

/// A loaded database. Globals are resident; features and depth maps are
/// read on first access and cached.
#[derive(Debug)]
pub struct DescriptorDatabase {
    dir: PathBuf,
    manifest: Manifest,
    globals: GlobalArray,
    codebook: Codebook,
    entries: Vec<DatabaseEntry>,
}

impl DescriptorDatabase {
    pub fn load(dir: &Path) -> Result<Self> {
        load_database(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn camera(&self) -> &CameraModel<f64> {
        &self.manifest.camera
    }

    pub fn frame(&self) -> &LocalFrame<f64> {
        &self.manifest.frame
    }

    pub fn grid(&self) -> &GridSpec<f64> {
        &self.manifest.grid
    }

    pub fn globals(&self) -> &GlobalArray {
        &self.globals
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DatabaseEntry] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> Result<&DatabaseEntry> {
        self.entries.get(id).ok_or_else(|| {
            Error::invalid(format!(
                "no database entry {id} (N = {})",
                self.entries.len()
            ))
        })
    }

    fn read_checked(&self, rel: &str) -> Result<Vec<u8>> {
        let bytes = read_file(&self.dir.join(rel))?;
        match self.manifest.checksums.get(rel) {
            Some(&crc) if crc32fast::hash(&bytes) != crc => {
                Err(Error::corrupt(rel, "checksum mismatch"))
            }
            Some(_) => Ok(bytes),
            None => Err(Error::corrupt(
                MANIFEST_FILE,
                format!("no checksum recorded for {rel}"),
            )),
        }
    }

    /// Local features of entry `id`, loaded on first use.
    pub fn features(&self, id: usize) -> Result<&[LocalFeature]> {
        let e = self.entry(id)?;
        e.features
            .get_or_try_init(|| {
                let rel = local_path(id);
                let feats = decode_local(&rel, &self.read_checked(&rel)?)?;
                if let Some(f) = feats
                    .iter()
                    .find(|f| f.descriptor.len() != self.manifest.local_dim)
                {
                    return Err(Error::corrupt(
                        &rel,
                        format!(
                            "descriptor dimension {} != {}",
                            f.descriptor.len(),
                            self.manifest.local_dim
                        ),
                    ));
                }
                Ok(feats)
            })
            .map(Vec::as_slice)
    }

    /// Depth map of entry `id`, loaded on first use.
    pub fn depth(&self, id: usize) -> Result<&DepthMap> {
        let e = self.entry(id)?;
        e.depth.get_or_try_init(|| {
            let rel = depth_path(id);
            let d = decode_depth(&rel, &self.read_checked(&rel)?)?;
            let cam = &self.manifest.camera;
            if d.stride != self.manifest.depth_stride || !d.covers(cam.width, cam.height) {
                return Err(Error::corrupt(
                    &rel,
                    "depth raster does not match the camera",
                ));
            }
            Ok(d)
        })
    }

    /// The stored terrain copy, if the database carries one.
    pub fn load_terrain(&self) -> Result<Option<Terrain>> {
        match &self.manifest.terrain {
            Some(rel) => Terrain::load(&self.dir.join(rel)).map(Some),
            None => Ok(None),
        }
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = read_file(&path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::corrupt(MANIFEST_FILE, e.to_string()))?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == MANIFEST_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::VersionMismatch {
                file: MANIFEST_FILE.into(),
                found: v as u32,
                expected: MANIFEST_VERSION,
            })
        }
        None => return Err(Error::corrupt(MANIFEST_FILE, "missing format_version")),
    }
    let m: Manifest =
        serde_json::from_value(value).map_err(|e| Error::corrupt(MANIFEST_FILE, e.to_string()))?;
    m.camera.validate()?;
    m.grid.validate()?;
    Ok(m)
}

pub fn load_database(dir: &Path) -> Result<DescriptorDatabase> {
    let manifest = read_manifest(dir)?;
    let read = |rel: &str| -> Result<Vec<u8>> {
        let bytes = read_file(&dir.join(rel))?;
        match manifest.checksums.get(rel) {
            Some(&crc) if crc32fast::hash(&bytes) == crc => Ok(bytes),
            Some(_) => Err(Error::corrupt(rel, "checksum mismatch")),
            None => Err(Error::corrupt(
                MANIFEST_FILE,
                format!("no checksum recorded for {rel}"),
            )),
        }
    };
    // Parse before checksumming so truncation is reported as such.
    let globals_bytes = read_file(&dir.join(GLOBALS_FILE))?;
    let globals = GlobalArray::from_bytes(GLOBALS_FILE, &globals_bytes)?;
    read(GLOBALS_FILE)?;
    if globals.len() != manifest.n || globals.dim() != manifest.global_dim {
        return Err(Error::corrupt(
            GLOBALS_FILE,
            format!(
                "shape {}×{} disagrees with manifest {}×{}",
                globals.len(),
                globals.dim(),
                manifest.n,
                manifest.global_dim
            ),
        ));
    }
    let mut codebook = Codebook::from_bytes(CODEBOOK_FILE, &read(CODEBOOK_FILE)?)?;
    codebook.training_seed = manifest.codebook_seed;
    if codebook.k() * codebook.dim() != manifest.global_dim || codebook.dim() != manifest.local_dim
    {
        return Err(Error::corrupt(
            CODEBOOK_FILE,
            "codebook shape disagrees with manifest",
        ));
    }
    let poses = enumerate_poses(&manifest.grid)?;
    if poses.len() != manifest.n || manifest.n == 0 {
        return Err(Error::corrupt(
            MANIFEST_FILE,
            format!("grid yields {} poses but N = {}", poses.len(), manifest.n),
        ));
    }
    let entries = poses
        .into_iter()
        .enumerate()
        .map(|(id, pose)| DatabaseEntry::new(id, pose))
        .collect();
    Ok(DescriptorDatabase {
        dir: dir.to_path_buf(),
        manifest,
        globals,
        codebook,
        entries,
    })
}
