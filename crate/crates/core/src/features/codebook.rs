use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{read_file, Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SLCB";
const VERSION: u32 = 1;
pub const LLOYD_ITERATIONS: usize = 50;

/// K centroids in local-descriptor space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    centroids: Vec<f32>,
    pub training_seed: u64,
}

impl Codebook {
    pub fn from_centroids(
        k: usize,
        dim: usize,
        centroids: Vec<f32>,
        training_seed: u64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("a codebook needs at least two centroids"));
        }
        if dim == 0 || centroids.len() != k * dim {
            return Err(Error::DimensionMismatch {
                expected: k * dim,
                found: centroids.len(),
            });
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("centroids must be finite"));
        }
        for i in 0..k {
            for j in i + 1..k {
                if centroids[i * dim..(i + 1) * dim] == centroids[j * dim..(j + 1) * dim] {
                    return Err(Error::invalid(format!("centroids {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            k,
            dim,
            centroids,
            training_seed,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[f32] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// Nearest centroid by squared L2; ties go to the lower index.
    pub fn assign(&self, x: &[f32]) -> usize {
        nearest(&self.centroids, self.dim, x).0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(MAGIC, VERSION);
        w.u32(self.k as u32);
        w.u32(self.dim as u32);
        w.f32_slice(&self.centroids);
        w.into_bytes()
    }

    pub fn from_bytes(name: &str, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(name, bytes, MAGIC, VERSION)?;
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let centroids = r.f32_vec(k * dim)?;
        r.finish()?;
        Self::from_centroids(k, dim, centroids, 0).map_err(|e| Error::corrupt(name, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_bytes(&name, &bytes)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[f32], dim: usize, x: &[f32]) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's k-means with k-means++ seeding over `samples` (row-major, `dim`
/// columns). Runs until assignments stop changing or for 50 iterations.
pub fn build_codebook(samples: &[f32], dim: usize, k: usize, seed: u64) -> Result<Codebook> {
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::invalid(
            "sample buffer is not a whole number of rows",
        ));
    }
    let n = samples.len() / dim;
    if k < 2 {
        return Err(Error::invalid("a codebook needs at least two centroids"));
    }
    if n < k {
        return Err(Error::NotEnoughSamples { needed: k, got: n });
    }
    let row = |i: usize| &samples[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<f32> = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first)) as f64).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid(format!(
                "samples contain fewer than {k} distinct descriptors"
            )));
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        while d2[pick] <= 0.0 {
            pick -= 1;
        }
        centroids.extend_from_slice(row(pick));
        let c = row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), c) as f64);
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, a) in assignment.iter_mut().enumerate() {
            let (c, _) = nearest(&centroids, dim, row(i));
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += *v as f64;
            }
        }
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = (*s * inv) as f32;
                }
            }
        }
    }
    Codebook::from_centroids(k, dim, centroids, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(cb: &Codebook) -> Vec<Vec<f32>> {
        let mut v: Vec<Vec<f32>> = (0..cb.k()).map(|i| cb.centroid(i).to_vec()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn one_dimensional_pairs() {
        let cb = build_codebook(&[0.0, 0.1, 10.0, 10.1], 1, 2, 3).unwrap();
        let c = sorted(&cb);
        assert!((c[0][0] - 0.05).abs() < 1e-6);
        assert!((c[1][0] - 10.05).abs() < 1e-6);
    }

    #[test]
    fn k_distinct_samples_become_centroids() {
        let samples = [1.0, 2.0, -3.0, 0.5, 7.0, 7.0, 0.0, -1.0];
        let cb = build_codebook(&samples, 2, 4, 11).unwrap();
        let mut expected: Vec<Vec<f32>> = samples.chunks(2).map(|c| c.to_vec()).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted(&cb), expected);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let samples: Vec<f32> = (0..600).map(|i| ((i * 37 % 101) as f32).sin()).collect();
        let a = build_codebook(&samples, 3, 8, 5).unwrap();
        let b = build_codebook(&samples, 3, 8, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            build_codebook(&[0.0, 1.0], 1, 3, 0),
            Err(Error::NotEnoughSamples { needed: 3, got: 2 })
        ));
        assert!(build_codebook(&[1.0, 1.0, 1.0], 1, 2, 0).is_err());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let cb = Codebook::from_centroids(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 9).unwrap();
        let bytes = cb.to_bytes();
        assert_eq!(&bytes[..4], b"SLCB");
        assert_eq!(bytes.len(), 16 + 24);
        let back = Codebook::from_bytes("codebook.bin", &bytes).unwrap();
        assert_eq!(back.centroids(), cb.centroids());
        assert!(Codebook::from_bytes("codebook.bin", &bytes[..30]).is_err());
    }
}
