//! Builds a desk-scale database (cached under the given directory) and flies
//! a perturbed query track over it.
//!
//! cargo run --release -p skyloc --example desk_run -- /tmp/desk

use std::path::PathBuf;
use std::time::Instant;

use skyloc::database::{
    build_database, load_database, train_codebook, BuildOptions, CodebookTraining,
};
use skyloc::eval::{
    export_report, run_experiment, FlightSpec, HeadingMode, InterferenceSpec, DEFAULT_SWEEP,
};
use skyloc::localize::LocalizeConfig;
use skyloc::posegrid::{Area, GridSpec};
use skyloc::world::{camera_from_fov, generate_terrain};
use skyloc::{GeoPoint, LocalFrame, LocalPoint};

fn main() -> skyloc::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "/tmp/desk".into()),
    );
    let terrain = generate_terrain(11, (1200.0, 1200.0), 2.0)?;
    let cam = camera_from_fov(320, 240, 84f64.to_radians())?;
    let grid = GridSpec {
        area: Area::new(-100.0, -100.0, 100.0, 100.0),
        spacing_xy: 10.0,
        elevations: vec![70.0],
        headings: 12,
        pitches: vec![45f64.to_radians()],
    };
    let frame = LocalFrame::new(GeoPoint::new(22.3, 114.2, 5.0)?)?;
    let db = if dir.join("manifest.json").exists() {
        load_database(&dir)?
    } else {
        let t = Instant::now();
        let opts = BuildOptions::default();
        let training = CodebookTraining::default();
        let cb = train_codebook(&terrain, &grid, &cam, &opts, &training)?;
        let (db, rep) = build_database(&terrain, &grid, &cam, &frame, &cb, &dir, &opts)?;
        println!(
            "built {} views, {} bytes in {:.1} s",
            rep.n,
            rep.written_bytes,
            t.elapsed().as_secs_f64()
        );
        db
    };
    let waypoints = vec![
        LocalPoint::new(-85.0, -72.0, 50.0),
        LocalPoint::new(78.0, -55.0, 70.0),
        LocalPoint::new(-40.0, 23.0, 90.0),
        LocalPoint::new(83.0, 86.0, 60.0),
    ];
    let total: f64 = waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let flight = FlightSpec {
        waypoints,
        speed: total / 59.0 * 0.5 * (1.0 + 1e-9),
        capture_rate: 0.5,
        heading: HeadingMode::AlongTrack,
        pitches: vec![45f64.to_radians()],
        jitter_m: 3.0,
        seed: 5,
    };
    let interference = InterferenceSpec {
        brightness_jitter: 0.1,
        noise_sigma: 3.0,
        ..Default::default()
    };
    let t = Instant::now();
    let m = run_experiment(
        &db,
        &terrain,
        &flight,
        &interference,
        &DEFAULT_SWEEP,
        42,
        &LocalizeConfig::default(),
    )?;
    println!(
        "{} queries in {:.1} s",
        m.queries.len() / DEFAULT_SWEEP.len(),
        t.elapsed().as_secs_f64()
    );
    for r in &m.rows {
        println!(
            "n={:>2} rmse3d={:?} rmse2d={:?} recall={:.1}%",
            r.n, r.rmse3d_m, r.rmse2d_m, r.recall_pct
        );
    }
    for q in m.records(3) {
        println!(
            "{:>2} z={:.0} h={:.0} {} {:?} err={:?} inl={:?} corr={:?}",
            q.index,
            q.true_z,
            q.true_heading_deg,
            q.status,
            q.reason,
            q.err3d_m,
            q.inliers,
            q.correction_m
        );
    }
    export_report(&m, &dir.join("report"))?;
    Ok(())
}
