use std::cmp::Ordering;

use crate::database::GlobalArray;
use crate::error::{Error, Result};

const LANES: usize = 16;

/// Squared L2 distance with independent lane accumulators so the loop
/// vectorizes.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += (x - y) * (x - y);
    }
    s
}

fn by_distance_then_id(a: &(usize, f32), b: &(usize, f32)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Exact nearest rows of `globals` to `query` by L2 distance, ascending,
/// ties to the lower id. Returns `min(n, N)` `(id, distance)` pairs.
pub fn retrieve_top_n(query: &[f32], globals: &GlobalArray, n: usize) -> Result<Vec<(usize, f32)>> {
    if query.len() != globals.dim() {
        return Err(Error::DimensionMismatch {
            expected: globals.dim(),
            found: query.len(),
        });
    }
    let mut all: Vec<(usize, f32)> = globals
        .as_slice()
        .chunks_exact(globals.dim())
        .enumerate()
        .map(|(i, row)| (i, squared_distance(query, row)))
        .collect();
    let n = n.min(all.len());
    if n == 0 {
        return Ok(Vec::new());
    }
    if n < all.len() {
        all.select_nth_unstable_by(n - 1, by_distance_then_id);
        all.truncate(n);
    }
    all.sort_unstable_by(by_distance_then_id);
    Ok(all.into_iter().map(|(i, d)| (i, d.sqrt())).collect())
}
