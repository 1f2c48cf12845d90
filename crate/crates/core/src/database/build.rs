use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::{encode_depth, encode_local, GlobalArray};
use super::{
    depth_path, load_database, local_path, DescriptorDatabase, Manifest, CODEBOOK_FILE,
    GLOBALS_FILE, MANIFEST_FILE, MANIFEST_VERSION, TERRAIN_FILE,
};
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::features::{
    build_codebook, encode_global, extract, Codebook, FeatureConfig, LocalFeature, DEFAULT_CLUSTERS,
};
use crate::geodesy::LocalFrame;
use crate::imageio::to_gray;
use crate::posegrid::GridSpec;
use crate::world::{render_with, DepthMap, RenderOptions, RenderedView, Terrain};

/// Views with a larger share of sky pixels are reported by the builder.
pub const SKY_WARNING_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub depth_stride: u32,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub features: FeatureConfig,
    pub render: RenderOptions,
    pub copy_terrain: bool,
    /// Replace an existing database in the output directory.
    pub force: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            depth_stride: 2,
            threads: None,
            features: FeatureConfig::default(),
            render: RenderOptions::default(),
            copy_terrain: true,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub n: usize,
    pub estimate: SizeEstimate,
    /// Bytes actually written, manifest included.
    pub written_bytes: u64,
    /// `(id, sky fraction)` of views above [`SKY_WARNING_FRACTION`].
    pub sky_warnings: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub n: usize,
    pub global_bytes: u64,
    /// Mean over the sampled views.
    pub feature_bytes: u64,
    pub depth_bytes: u64,
}

impl SizeEstimate {
    /// N·(D·4 + feature bytes + W·H·4).
    pub fn total(&self) -> u64 {
        self.n as u64 * (self.global_bytes + self.feature_bytes + self.depth_bytes)
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

fn render_features(
    terrain: &Terrain,
    grid: &GridSpec<f64>,
    cam: &CameraModel<f64>,
    id: usize,
    opts: &BuildOptions,
) -> Result<(RenderedView, Vec<LocalFeature>)> {
    let pose = grid.pose_at(id)?;
    let view = render_with(terrain, &pose, cam, &opts.render)?;
    let feats = extract(&to_gray(&view.color), &opts.features);
    Ok((view, feats))
}

fn evenly_spaced(n: usize, count: usize) -> Vec<usize> {
    let count = count.clamp(1, n);
    (0..count).map(|i| i * n / count).collect()
}

fn local_file_len(count: usize, dim: usize) -> u64 {
    16 + count as u64 * (12 + 4 * dim as u64)
}

/// Predicts the database size by rendering `samples` evenly spaced views
/// for the mean feature count.
pub fn estimate_size(
    terrain: &Terrain,
    grid: &GridSpec<f64>,
    cam: &CameraModel<f64>,
    global_dim: usize,
    local_dim: usize,
    opts: &BuildOptions,
    samples: usize,
) -> Result<SizeEstimate> {
    let n = grid.pose_count()?;
    let ids = evenly_spaced(n, samples);
    let counts = pool(opts.threads)?.install(|| {
        ids.par_iter()
            .map(|&id| render_features(terrain, grid, cam, id, opts).map(|(_, f)| f.len()))
            .collect::<Result<Vec<_>>>()
    })?;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let s = opts.depth_stride.max(1);
    let (w, h) = (cam.width.div_ceil(s) as u64, cam.height.div_ceil(s) as u64);
    Ok(SizeEstimate {
        n,
        global_bytes: global_dim as u64 * 4,
        feature_bytes: local_file_len(mean.round() as usize, local_dim),
        depth_bytes: 20 + w * h * 4,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookTraining {
    pub clusters: usize,
    /// Views rendered for training samples, evenly spaced over the grid.
    pub views: usize,
    /// Random subsample cap on the pooled descriptors.
    pub max_descriptors: usize,
    pub seed: u64,
}

impl Default for CodebookTraining {
    fn default() -> Self {
        Self {
            clusters: DEFAULT_CLUSTERS,
            views: 64,
            max_descriptors: 20_000,
            seed: 0,
        }
    }
}

/// Trains a VLAD codebook on descriptors from a subset of the grid's views.
pub fn train_codebook(
    terrain: &Terrain,
    grid: &GridSpec<f64>,
    cam: &CameraModel<f64>,
    opts: &BuildOptions,
    training: &CodebookTraining,
) -> Result<Codebook> {
    let n = grid.pose_count()?;
    let ids = evenly_spaced(n, training.views);
    let per_view = pool(opts.threads)?.install(|| {
        ids.par_iter()
            .map(|&id| render_features(terrain, grid, cam, id, opts).map(|(_, f)| f))
            .collect::<Result<Vec<_>>>()
    })?;
    let descs: Vec<&[f32]> = per_view
        .iter()
        .flatten()
        .filter(|f| !f.is_degenerate())
        .map(|f| f.descriptor.as_slice())
        .collect();
    let chosen: Vec<usize> = if descs.len() > training.max_descriptors {
        let mut rng = ChaCha8Rng::seed_from_u64(training.seed);
        let mut idx = sample(&mut rng, descs.len(), training.max_descriptors).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..descs.len()).collect()
    };
    let dim = descs.first().map_or(0, |d| d.len());
    if dim == 0 {
        return Err(Error::NotEnoughSamples {
            needed: training.clusters,
            got: 0,
        });
    }
    let samples: Vec<f32> = chosen
        .iter()
        .flat_map(|&i| descs[i].iter().copied())
        .collect();
    build_codebook(&samples, dim, training.clusters, training.seed)
}

/// Writes database files. Entry files may be written concurrently; the
/// manifest goes out in [`DatabaseWriter::finish`].
///
/// Also the entry point for importing externally computed descriptors.
pub struct DatabaseWriter {
    dir: PathBuf,
    local_dim: usize,
    checksums: Mutex<BTreeMap<String, u32>>,
    bytes: AtomicUsize,
}

/// Database-wide metadata recorded in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseMeta {
    pub camera: CameraModel<f64>,
    pub frame: LocalFrame<f64>,
    pub grid: GridSpec<f64>,
    pub depth_stride: u32,
    pub features: FeatureConfig,
}

impl DatabaseWriter {
    /// Prepares `dir`. An existing database there is an error unless `force`,
    /// in which case its manifest is removed first so an interrupted rebuild
    /// never looks complete.
    pub fn create(dir: &Path, local_dim: usize, force: bool) -> Result<Self> {
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            if !force {
                return Err(Error::invalid(format!(
                    "{} already holds a database (use force to replace it)",
                    dir.display()
                )));
            }
            fs::remove_file(&manifest).map_err(|e| Error::io(&manifest, e))?;
        }
        for sub in ["local", "depth", "terrain"] {
            let p = dir.join(sub);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        for sub in ["local", "depth"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            local_dim,
            checksums: Mutex::new(BTreeMap::new()),
            bytes: AtomicUsize::new(0),
        })
    }

    fn put(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.bytes.fetch_add(bytes.len(), Ordering::Relaxed);
        self.checksums
            .lock()
            .unwrap()
            .insert(rel.to_string(), crc32fast::hash(bytes));
        Ok(())
    }

    pub fn write_entry(
        &self,
        id: usize,
        features: &[LocalFeature],
        depth: &DepthMap,
    ) -> Result<()> {
        self.put(&local_path(id), &encode_local(features, self.local_dim)?)?;
        self.put(&depth_path(id), &encode_depth(depth))
    }

    pub fn write_terrain(&self, terrain: &Terrain) -> Result<()> {
        let dir = self.dir.join("terrain");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = self.dir.join(TERRAIN_FILE);
        terrain.save(&path)?;
        let tex = crate::world::texture_path(&path);
        for p in [&path, &tex] {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            let rel = p
                .strip_prefix(&self.dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            self.bytes.fetch_add(bytes.len(), Ordering::Relaxed);
            self.checksums
                .lock()
                .unwrap()
                .insert(rel, crc32fast::hash(&bytes));
        }
        Ok(())
    }

    /// Writes globals, codebook and finally the manifest. Returns the total
    /// number of bytes written.
    pub fn finish(
        self,
        meta: DatabaseMeta,
        globals: &GlobalArray,
        codebook: &Codebook,
    ) -> Result<u64> {
        let n = globals.len();
        if n == 0 {
            return Err(Error::invalid("a database needs at least one entry"));
        }
        if codebook.k() * codebook.dim() != globals.dim() || codebook.dim() != self.local_dim {
            return Err(Error::DimensionMismatch {
                expected: codebook.k() * codebook.dim(),
                found: globals.dim(),
            });
        }
        if meta.grid.pose_count()? != n {
            return Err(Error::DimensionMismatch {
                expected: meta.grid.pose_count()?,
                found: n,
            });
        }
        self.put(GLOBALS_FILE, &globals.to_bytes())?;
        self.put(CODEBOOK_FILE, &codebook.to_bytes())?;
        let checksums = self.checksums.into_inner().unwrap();
        for id in 0..n {
            for rel in [local_path(id), depth_path(id)] {
                if !checksums.contains_key(&rel) {
                    return Err(Error::invalid(format!(
                        "entry file {rel} was never written"
                    )));
                }
            }
        }
        let terrain = checksums
            .contains_key(TERRAIN_FILE)
            .then(|| TERRAIN_FILE.to_string());
        let manifest = Manifest {
            format_version: MANIFEST_VERSION,
            camera: meta.camera,
            frame: meta.frame,
            grid: meta.grid,
            n,
            global_dim: globals.dim(),
            local_dim: self.local_dim,
            clusters: codebook.k(),
            codebook_seed: codebook.training_seed,
            depth_stride: meta.depth_stride,
            features: meta.features,
            terrain,
            checksums,
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
        Ok((self.bytes.into_inner() + json.len()) as u64)
    }
}

pub fn build_database(
    terrain: &Terrain,
    grid: &GridSpec<f64>,
    cam: &CameraModel<f64>,
    frame: &LocalFrame<f64>,
    codebook: &Codebook,
    out_dir: &Path,
    opts: &BuildOptions,
) -> Result<(DescriptorDatabase, BuildReport)> {
    build_database_with_progress(
        terrain,
        grid,
        cam,
        frame,
        codebook,
        out_dir,
        opts,
        &|_, _| {},
    )
}

/// Renders, describes and encodes every grid pose and writes the database.
///
/// `progress(done, total)` is called from worker threads after each entry.
#[allow(clippy::too_many_arguments)]
pub fn build_database_with_progress(
    terrain: &Terrain,
    grid: &GridSpec<f64>,
    cam: &CameraModel<f64>,
    frame: &LocalFrame<f64>,
    codebook: &Codebook,
    out_dir: &Path,
    opts: &BuildOptions,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<(DescriptorDatabase, BuildReport)> {
    cam.validate()?;
    let n = grid.pose_count()?;
    if opts.depth_stride == 0 {
        return Err(Error::invalid("depth stride must be positive"));
    }
    // Fail on unrenderable poses before touching the output directory.
    for id in 0..n {
        let p = grid.pose_at(id)?.position;
        if terrain.contains(p.x, p.y) && p.z <= terrain.sample_height(p.x, p.y)? {
            return Err(Error::BelowTerrain {
                camera_z: p.z,
                ground: terrain.sample_height(p.x, p.y)?,
            });
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let writer = DatabaseWriter::create(out_dir, codebook.dim(), opts.force)?;
    let done = AtomicUsize::new(0);

    let rows = pool(opts.threads)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|id| -> Result<(Vec<f32>, f64, usize)> {
                let (view, feats) = render_features(terrain, grid, cam, id, opts)?;
                let global = encode_global(&feats, codebook)?;
                let depth = view.depth.subsample(opts.depth_stride)?;
                writer.write_entry(id, &feats, &depth)?;
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, n);
                Ok((global.0, view.sky_fraction(), feats.len()))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut data = Vec::with_capacity(n * codebook.k() * codebook.dim());
    let mut sky_warnings = Vec::new();
    let mut feature_total = 0usize;
    for (id, (row, sky, count)) in rows.into_iter().enumerate() {
        data.extend_from_slice(&row);
        feature_total += count;
        if sky > SKY_WARNING_FRACTION {
            sky_warnings.push((id, sky));
        }
    }
    let globals = GlobalArray::new(n, codebook.k() * codebook.dim(), data)?;
    if opts.copy_terrain {
        writer.write_terrain(terrain)?;
    }
    let meta = DatabaseMeta {
        camera: *cam,
        frame: *frame,
        grid: grid.clone(),
        depth_stride: opts.depth_stride,
        features: opts.features,
    };
    let written_bytes = writer.finish(meta, &globals, codebook)?;
    let s = opts.depth_stride;
    let estimate = SizeEstimate {
        n,
        global_bytes: globals.dim() as u64 * 4,
        feature_bytes: local_file_len(
            (feature_total as f64 / n as f64).round() as usize,
            codebook.dim(),
        ),
        depth_bytes: 20 + cam.width.div_ceil(s) as u64 * cam.height.div_ceil(s) as u64 * 4,
    };
    let db = load_database(out_dir)?;
    Ok((
        db,
        BuildReport {
            n,
            estimate,
            written_bytes,
            sky_warnings,
        },
    ))
}
