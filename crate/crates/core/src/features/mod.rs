//! Keypoints, local descriptors, VLAD aggregation and descriptor matching.

mod codebook;
mod descriptor;
mod harris;
mod matching;
mod vlad;

use serde::{Deserialize, Serialize};

pub use codebook::{build_codebook, Codebook, LLOYD_ITERATIONS};
pub use descriptor::{describe_local, LocalFeature, LOCAL_DIM, PATCH_SIZE, POOLED_SIZE};
pub use harris::{detect_keypoints, harris_response, HarrisConfig, Keypoint};
pub use matching::{match_local, Match, MatchConfig};
pub use vlad::{encode_global, GlobalDescriptor};

use crate::imageio::GrayF32;

pub const DEFAULT_CLUSTERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FeatureConfig {
    pub harris: HarrisConfig,
    pub matching: MatchConfig,
}

/// Detects and describes keypoints in one pass.
pub fn extract(img: &GrayF32, cfg: &FeatureConfig) -> Vec<LocalFeature> {
    describe_local(img, &detect_keypoints(img, &cfg.harris))
}
