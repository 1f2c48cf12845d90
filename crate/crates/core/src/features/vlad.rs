use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use super::descriptor::LocalFeature;
use crate::error::{Error, Result};

/// Aggregated image descriptor of dimension K·d_l.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalDescriptor(pub Vec<f32>);

impl GlobalDescriptor {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f32 {
        l2(&self.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

fn l2(v: &[f32]) -> f32 {
    v.iter()
        .map(|x| (*x as f64) * (*x as f64))
        .sum::<f64>()
        .sqrt() as f32
}

fn normalize(v: &mut [f32]) {
    let n = v
        .iter()
        .map(|x| (*x as f64) * (*x as f64))
        .sum::<f64>()
        .sqrt();
    if n < 1e-12 {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|x| *x = (*x as f64 * inv) as f32);
    }
}

/// VLAD with intra-normalization and signed square-root.
///
/// Descriptors are accumulated in a canonical order so the result does not
/// depend on the order of `features`.
pub fn encode_global(features: &[LocalFeature], cb: &Codebook) -> Result<GlobalDescriptor> {
    let (k, dim) = (cb.k(), cb.dim());
    if let Some(f) = features.iter().find(|f| f.descriptor.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f.descriptor.len(),
        });
    }
    let mut order: Vec<&[f32]> = features.iter().map(|f| f.descriptor.as_slice()).collect();
    order.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut sums = vec![0f64; k * dim];
    for d in order {
        let c = cb.assign(d);
        for ((s, x), m) in sums[c * dim..(c + 1) * dim]
            .iter_mut()
            .zip(d)
            .zip(cb.centroid(c))
        {
            *s += (*x - *m) as f64;
        }
    }
    let mut v: Vec<f32> = sums.iter().map(|&s| s as f32).collect();
    for block in v.chunks_exact_mut(dim) {
        normalize(block);
    }
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
        if *x == 0.0 {
            *x = 0.0;
        }
    }
    normalize(&mut v);
    Ok(GlobalDescriptor(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::harris::Keypoint;

    fn feat(d: &[f32]) -> LocalFeature {
        LocalFeature {
            keypoint: Keypoint {
                u: 10.0,
                v: 10.0,
                score: 1.0,
            },
            descriptor: d.to_vec(),
        }
    }

    #[test]
    fn one_dimensional_toy() {
        let cb = Codebook::from_centroids(2, 1, vec![0.0, 1.0], 0).unwrap();
        let g = encode_global(&[feat(&[0.2])], &cb).unwrap();
        assert_eq!(g.0, vec![1.0, 0.0]);
    }

    #[test]
    fn features_on_centroids_give_zero() {
        let cb = Codebook::from_centroids(2, 2, vec![1.0, 0.0, 0.0, 1.0], 0).unwrap();
        let g = encode_global(&[feat(&[1.0, 0.0]), feat(&[0.0, 1.0])], &cb).unwrap();
        assert!(g.is_degenerate());
        assert!(encode_global(&[], &cb).unwrap().is_degenerate());
    }

    #[test]
    fn unit_norm_and_dimension_check() {
        let cb = Codebook::from_centroids(3, 2, vec![1.0, 0.0, 0.0, 1.0, -0.7, -0.7], 0).unwrap();
        let fs = [feat(&[0.6, 0.8]), feat(&[0.8, -0.6]), feat(&[-1.0, 0.0])];
        let g = encode_global(&fs, &cb).unwrap();
        assert_eq!(g.dim(), 6);
        assert!((g.norm() - 1.0).abs() < 1e-6);
        assert!(matches!(
            encode_global(&[feat(&[1.0])], &cb),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn permutation_is_bit_identical() {
        let cb = Codebook::from_centroids(2, 3, vec![0.5, 0.1, -0.2, -0.4, 0.3, 0.9], 0).unwrap();
        let mut fs: Vec<LocalFeature> = (0..40)
            .map(|i| {
                let t = i as f32 * 0.37;
                feat(&[t.sin(), (1.3 * t).cos(), (0.7 * t).sin() * 0.3])
            })
            .collect();
        let a = encode_global(&fs, &cb).unwrap();
        fs.reverse();
        fs.swap(3, 17);
        let b = encode_global(&fs, &cb).unwrap();
        assert_eq!(
            a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
