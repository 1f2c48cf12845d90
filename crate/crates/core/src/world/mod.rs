//! Synthetic world: seeded textured heightfield and a raycasting renderer
//! producing color images with matching Z-depth maps.

mod generate;
mod render;
mod terrain;

pub use crate::camera::{CameraModel, PoseSE3};
pub use generate::{generate_terrain, generate_terrain_with, TerrainConfig};
pub use render::{render, render_with, DepthMap, RenderOptions, RenderedView, SKY_COLOR};
pub use terrain::{texture_path, Terrain};

/// Ideal pinhole camera from image size and horizontal field of view.
pub fn camera_from_fov(width: u32, height: u32, hfov: f64) -> crate::Result<CameraModel<f64>> {
    CameraModel::from_fov(width, height, hfov)
}
