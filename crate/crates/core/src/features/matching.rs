use serde::{Deserialize, Serialize};

use super::descriptor::LocalFeature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Lowe ratio on side a; `None` disables the test.
    pub ratio: Option<f32>,
    pub max_distance: f32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            ratio: Some(0.8),
            max_distance: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f32,
}

/// Nearest and second-nearest distances with the nearest index (lowest index on ties).
fn nearest_two(row: impl Iterator<Item = (usize, f32)>) -> Option<(usize, f32, f32)> {
    let mut best: Option<(usize, f32)> = None;
    let mut second = f32::INFINITY;
    for (j, d) in row {
        match best {
            Some((_, bd)) if d >= bd => second = second.min(d),
            Some((_, bd)) => {
                second = bd;
                best = Some((j, d));
            }
            None => best = Some((j, d)),
        }
    }
    best.map(|(j, d)| (j, d, second))
}

/// Mutual nearest neighbours under descriptor L2, sorted by distance.
///
/// Zero descriptors never match.
pub fn match_local(a: &[LocalFeature], b: &[LocalFeature], cfg: &MatchConfig) -> Vec<Match> {
    let ia: Vec<usize> = (0..a.len()).filter(|&i| !a[i].is_degenerate()).collect();
    let ib: Vec<usize> = (0..b.len()).filter(|&j| !b[j].is_degenerate()).collect();
    if ia.is_empty() || ib.is_empty() {
        return Vec::new();
    }
    let nb = ib.len();
    let mut dist = vec![0f32; ia.len() * nb];
    for (r, &i) in ia.iter().enumerate() {
        let da = &a[i].descriptor;
        for (c, &j) in ib.iter().enumerate() {
            let s: f32 = da
                .iter()
                .zip(&b[j].descriptor)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            dist[r * nb + c] = s.sqrt();
        }
    }
    let best_for_b: Vec<usize> = (0..nb)
        .map(|c| {
            nearest_two((0..ia.len()).map(|r| (r, dist[r * nb + c])))
                .unwrap()
                .0
        })
        .collect();

    let mut out = Vec::new();
    for r in 0..ia.len() {
        let (c, d1, d2) = nearest_two((0..nb).map(|c| (c, dist[r * nb + c]))).unwrap();
        if best_for_b[c] != r || d1 > cfg.max_distance {
            continue;
        }
        if let Some(ratio) = cfg.ratio {
            if d2.is_finite() && d1 > ratio * d2 {
                continue;
            }
        }
        out.push(Match {
            index_a: ia[r],
            index_b: ib[c],
            distance: d1,
        });
    }
    out.sort_by(|x, y| {
        x.distance
            .total_cmp(&y.distance)
            .then(x.index_a.cmp(&y.index_a))
    });
    out
}
