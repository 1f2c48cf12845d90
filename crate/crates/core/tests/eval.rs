mod common;

use skyloc::database::{build_database, BuildOptions, DescriptorDatabase};
use skyloc::eval::{
    export_report, generate_flight, metrics_for, metrics_from_records, perturb_image, plot_n,
    read_metrics_csv, read_queries_csv, run_experiment, FlightSpec, HeadingMode, InterferenceSpec,
    QueryRecord, ALTITUDE_FILE, METRICS_FILE, QUERIES_FILE, TRAJECTORY_FILE,
};
use skyloc::localize::{localize, LocalizeConfig, RetrievalConfig};
use skyloc::world::{render, Terrain};
use skyloc::LocalPoint;

fn setup() -> (tempfile::TempDir, Terrain, DescriptorDatabase) {
    let dir = tempfile::tempdir().unwrap();
    let terrain = common::small_terrain();
    let cb = common::small_codebook(&terrain);
    let (db, _) = build_database(
        &terrain,
        &common::small_grid(),
        &common::small_camera(),
        &common::frame(),
        &cb,
        dir.path(),
        &BuildOptions::default(),
    )
    .unwrap();
    (dir, terrain, db)
}

fn flight() -> FlightSpec {
    FlightSpec {
        waypoints: vec![
            LocalPoint::new(-9.0, -8.0, 66.0),
            LocalPoint::new(-9.0, 9.0, 74.0),
        ],
        speed: 4.0,
        capture_rate: 0.5,
        heading: HeadingMode::Fixed(0.0),
        pitches: vec![45f64.to_radians()],
        jitter_m: 1.0,
        seed: 3,
    }
}

#[test]
fn sweep_matches_independent_runs_and_report_round_trips() {
    let (_dir, terrain, db) = setup();
    let interference = InterferenceSpec {
        noise_sigma: 2.0,
        ..Default::default()
    };
    let sweep = [8, 3, 1];
    let m = run_experiment(
        &db,
        &terrain,
        &flight(),
        &interference,
        &sweep,
        17,
        &LocalizeConfig::default(),
    )
    .unwrap();
    let samples = generate_flight(&flight()).unwrap();
    assert_eq!(m.queries.len(), samples.len() * sweep.len());
    assert!(m.row(8).unwrap().recall_pct > 0.0);

    // Each n reproduces a standalone localization with that candidate count.
    for (i, s) in samples.iter().enumerate() {
        let view = render(&terrain, &s.pose, db.camera()).unwrap();
        let img = perturb_image(&view.color, &interference, 17 ^ i as u64).unwrap();
        for n in sweep {
            let cfg = LocalizeConfig {
                retrieval: RetrievalConfig { n },
                ..Default::default()
            };
            let alone = localize(&img, &db, &cfg, 17 ^ i as u64).unwrap();
            let rec = m.records(n).find(|r| r.index == i).unwrap();
            match alone.outcome.result() {
                Some(r) => {
                    assert_eq!(rec.est_x, Some(r.pose_local.position.x));
                    assert_eq!(rec.candidate_id, Some(r.candidate_id));
                }
                None => assert!(!rec.is_localized()),
            }
        }
    }

    let out = tempfile::tempdir().unwrap();
    export_report(&m, out.path()).unwrap();
    let rows = read_metrics_csv(&out.path().join(METRICS_FILE)).unwrap();
    assert_eq!(rows, m.rows);
    let log = read_queries_csv(&out.path().join(QUERIES_FILE)).unwrap();
    assert_eq!(log, m.queries);

    // Metrics recomputed from the log alone, by hand.
    for row in &rows {
        let recs: Vec<&QueryRecord> = log.iter().filter(|r| r.n == row.n).collect();
        let ok: Vec<&&QueryRecord> = recs.iter().filter(|r| r.status == "localized").collect();
        let recall = 100.0 * ok.len() as f64 / recs.len() as f64;
        assert!((recall - row.recall_pct).abs() < 1e-9);
        if !ok.is_empty() {
            let sq: f64 = ok
                .iter()
                .map(|r| {
                    let (dx, dy, dz) = (
                        r.est_x.unwrap() - r.true_x,
                        r.est_y.unwrap() - r.true_y,
                        r.est_z.unwrap() - r.true_z,
                    );
                    dx * dx + dy * dy + dz * dz
                })
                .sum();
            assert!(((sq / ok.len() as f64).sqrt() - row.rmse3d_m.unwrap()).abs() < 1e-9);
        }
    }

    let n = plot_n(&m).unwrap();
    assert_eq!(n, 3);
    let localized = m.records(n).filter(|r| r.is_localized()).count();
    let svg = std::fs::read_to_string(out.path().join(TRAJECTORY_FILE)).unwrap();
    assert_eq!(svg.matches("class=\"refined\"").count(), localized);
    assert_eq!(svg.matches("class=\"candidate\"").count(), localized);
    let alt = std::fs::read_to_string(out.path().join(ALTITUDE_FILE)).unwrap();
    assert_eq!(alt.matches("class=\"inferred\"").count(), localized);
}

#[test]
fn empty_localization_writes_blank_rmse() {
    let mut recs = Vec::new();
    for index in 0..3 {
        recs.push(QueryRecord {
            index,
            time_s: 2.0 * index as f64,
            distance_m: 8.0 * index as f64,
            n: 3,
            status: "unlocalized".into(),
            reason: Some("all-gated".into()),
            true_x: 1.0,
            true_y: 2.0,
            true_z: 70.0,
            true_heading_deg: 0.0,
            true_pitch_deg: 45.0,
            est_x: None,
            est_y: None,
            est_z: None,
            err3d_m: None,
            err2d_m: None,
            candidate_id: None,
            cand_x: None,
            cand_y: None,
            inliers: None,
            correction_m: None,
        });
    }
    let m = metrics_from_records(recs, &[3]);
    assert_eq!(m.rows[0], metrics_for(&m.queries, 3));
    let out = tempfile::tempdir().unwrap();
    export_report(&m, out.path()).unwrap();
    let csv = std::fs::read_to_string(out.path().join(METRICS_FILE)).unwrap();
    assert_eq!(csv, "n,rmse3d_m,rmse2d_m,recall_pct\n3,,,0.0\n");
    assert_eq!(
        read_queries_csv(&out.path().join(QUERIES_FILE)).unwrap(),
        m.queries
    );
    let svg = std::fs::read_to_string(out.path().join(TRAJECTORY_FILE)).unwrap();
    assert!(!svg.contains("class=\"refined\""));
}

#[test]
fn flight_outside_terrain_is_rejected() {
    let (_dir, terrain, db) = setup();
    let mut f = flight();
    f.waypoints[1] = LocalPoint::new(5000.0, 0.0, 70.0);
    assert!(run_experiment(
        &db,
        &terrain,
        &f,
        &InterferenceSpec::default(),
        &[1],
        0,
        &LocalizeConfig::default()
    )
    .is_err());
    assert!(run_experiment(
        &db,
        &terrain,
        &flight(),
        &InterferenceSpec::default(),
        &[99],
        0,
        &LocalizeConfig::default()
    )
    .is_err());
}
