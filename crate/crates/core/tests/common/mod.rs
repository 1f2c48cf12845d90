#![allow(dead_code)]

use std::path::Path;

use skyloc::database::{train_codebook, BuildOptions, CodebookTraining};
use skyloc::features::Codebook;
use skyloc::posegrid::{Area, GridSpec};
use skyloc::world::{camera_from_fov, generate_terrain, Terrain};
use skyloc::{Camera, GeoPoint, LocalFrame};

pub fn small_terrain() -> Terrain {
    generate_terrain(7, (400.0, 400.0), 2.0).unwrap()
}

pub fn small_camera() -> Camera {
    camera_from_fov(160, 120, 84f64.to_radians()).unwrap()
}

/// 2×2 positions, 2 headings, one pitch: 8 poses.
pub fn small_grid() -> GridSpec<f64> {
    GridSpec {
        area: Area::new(-10.0, -10.0, 10.0, 10.0),
        spacing_xy: 10.0,
        elevations: vec![70.0],
        headings: 2,
        pitches: vec![45f64.to_radians()],
    }
}

pub fn frame() -> LocalFrame {
    LocalFrame::new(GeoPoint::new(22.3, 114.2, 5.0).unwrap()).unwrap()
}

pub fn small_codebook(t: &Terrain) -> Codebook {
    let training = CodebookTraining {
        clusters: 8,
        views: 8,
        max_descriptors: 2000,
        seed: 1,
    };
    train_codebook(
        t,
        &small_grid(),
        &small_camera(),
        &BuildOptions::default(),
        &training,
    )
    .unwrap()
}

/// Relative path → bytes for every file under `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
