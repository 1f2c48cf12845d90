//! Acceptance suite. Runs every criterion in order, prints one line each and
//! exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skyloc::database::{
    build_database, load_database, read_manifest, train_codebook, BuildOptions, CodebookTraining,
    DescriptorDatabase, GlobalArray,
};
use skyloc::eval::{
    export_report, read_metrics_csv, read_queries_csv, run_experiment, FlightSpec, HeadingMode,
    InterferenceSpec, MetricsTable, DEFAULT_SWEEP, METRICS_FILE, QUERIES_FILE,
};
use skyloc::localize::{
    localize, p3p, reprojection_jacobian, reprojection_residual, retrieve_top_n, solve_pnp_ransac,
    Correspondence2D3D, LocalizeConfig, PnPConfig, RetrievalConfig,
};
use skyloc::posegrid::{Area, GridSpec};
use skyloc::world::{camera_from_fov, generate_terrain, render, Terrain};
use skyloc::{Camera, Extrinsics, GeoPoint, LocalFrame, LocalPoint, Pose, Vec3};

struct Verdict {
    pass: bool,
    /// Over the soft bound but under the hard one.
    warn: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            warn: false,
            detail,
        }
    }
}

fn query_camera() -> Camera {
    camera_from_fov(640, 480, 84f64.to_radians()).unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        LocalPoint::new(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(40.0..100.0),
        ),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(20f64.to_radians()..90f64.to_radians()),
        rng.gen_range(-0.1..0.1),
    )
}

/// Map points in front of the camera at pixels drawn uniformly over the image.
fn observations(
    rng: &mut ChaCha8Rng,
    pose: &Pose,
    cam: &Camera,
    n: usize,
) -> Vec<Correspondence2D3D<f64>> {
    (0..n)
        .map(|_| {
            let u = rng.gen_range(0.0..cam.width as f64);
            let v = rng.gen_range(0.0..cam.height as f64);
            let z = rng.gen_range(30.0..200.0);
            let world = pose.camera_to_world(&(cam.unproject(u, v) * z));
            Correspondence2D3D {
                pixel: [u, v],
                point: LocalPoint::from_vec(world),
            }
        })
        .collect()
}

fn pose_errors(est: &Extrinsics, truth: &Extrinsics) -> (f64, f64) {
    (
        est.rotation_angle_to(truth),
        (est.translation - truth.translation).norm(),
    )
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cam = query_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut worst_rot, mut worst_trans, mut worst_p3p, mut worst_jac) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..1000u64 {
        let pose = random_pose(&mut rng);
        let truth = pose.extrinsics();
        let pairs = observations(&mut rng, &pose, &cam, 20);

        let sol = solve_pnp_ransac(&pairs, &cam, &PnPConfig::default(), i).unwrap();
        let (r, t) = match sol {
            Some(s) if s.inliers.len() == pairs.len() => pose_errors(&s.extrinsics, &truth),
            _ => (f64::INFINITY, f64::INFINITY),
        };
        worst_rot = worst_rot.max(r);
        worst_trans = worst_trans.max(t);

        let bearings: [Vec3; 3] =
            std::array::from_fn(|k| cam.unproject(pairs[k].pixel[0], pairs[k].pixel[1]));
        let points: [Vec3; 3] = std::array::from_fn(|k| pairs[k].point.to_vec());
        let best = p3p(&points, &bearings)
            .iter()
            .map(|e| {
                let (r, t) = pose_errors(e, &truth);
                r.max(t)
            })
            .fold(f64::INFINITY, f64::min);
        worst_p3p = worst_p3p.max(best);

        // Central differences of the residual against the analytic Jacobian.
        let state = truth.perturbed(&std::array::from_fn(|_| rng.gen_range(-0.02..0.02)));
        let pair = &pairs[3];
        if let Some((_, jac)) = reprojection_jacobian(&cam, &state, pair) {
            for a in 0..6 {
                let h = 1e-6;
                let mut dp = [0.0; 6];
                let mut dm = [0.0; 6];
                dp[a] = h;
                dm[a] = -h;
                let rp = reprojection_residual(&cam, &state.perturbed(&dp), pair).unwrap();
                let rm = reprojection_residual(&cam, &state.perturbed(&dm), pair).unwrap();
                for k in 0..2 {
                    let fd = (rp[k] - rm[k]) / (2.0 * h);
                    worst_jac = worst_jac.max((fd - jac[k][a]).abs() / jac[k][a].abs().max(1.0));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        worst_rot < 1e-6 && worst_trans < 1e-6 && worst_p3p < 1e-6 && worst_jac < 1e-5 && secs < 10.0,
        format!(
            "1000 instances: max rotation err {worst_rot:.2e} rad, translation {worst_trans:.2e} m, \
             P3P {worst_p3p:.2e}, Jacobian rel {worst_jac:.2e}, {secs:.1} s"
        ),
    )
}

/// Inlier-set recovery rate with per-axis noise `sigma`.
fn ransac_recovery(sigma: f64, seed: u64) -> usize {
    let cam = query_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut exact = 0;
    for i in 0..200u64 {
        let pose = random_pose(&mut rng);
        let mut pairs = observations(&mut rng, &pose, &cam, 100);
        let outliers: Vec<usize> = rand::seq::index::sample(&mut rng, 100, 30).into_vec();
        let mut truth = Vec::new();
        for (k, p) in pairs.iter_mut().enumerate() {
            if outliers.contains(&k) {
                // Outliers land at least 5 px from their true projection.
                let [u0, v0] = p.pixel;
                loop {
                    let u = rng.gen_range(0.0..cam.width as f64);
                    let v = rng.gen_range(0.0..cam.height as f64);
                    if (u - u0).hypot(v - v0) >= 5.0 {
                        p.pixel = [u, v];
                        break;
                    }
                }
            } else {
                p.pixel[0] += noise.sample(&mut rng);
                p.pixel[1] += noise.sample(&mut rng);
                truth.push(k);
            }
        }
        if let Ok(Some(sol)) = solve_pnp_ransac(&pairs, &cam, &PnPConfig::default(), i) {
            if sol.inliers == truth {
                exact += 1;
            }
        }
    }
    exact
}

fn criterion_2() -> Verdict {
    // 0.3 px is the RMS of the 2D displacement, so 0.3/√2 per axis.
    let isotropic = ransac_recovery(0.3 / 2f64.sqrt(), 2002);
    let per_axis = ransac_recovery(0.3, 2002);
    Verdict::new(
        isotropic >= 198,
        format!(
            "exact inlier recovery {isotropic}/200 (2D RMS 0.3 px); informational: {per_axis}/200 with 0.3 px per axis"
        ),
    )
}

fn random_globals(n: usize, d: usize, seed: u64) -> GlobalArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0f32, 1.0).unwrap();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row: Vec<f32> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt();
        data.extend(row.iter().map(|v| v / norm));
    }
    GlobalArray::new(n, d, data).unwrap()
}

fn criterion_3(globals: &GlobalArray) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let d = globals.dim();
    let mut mismatches = 0;
    for _ in 0..50 {
        // Half the queries sit near a stored row, half are fresh.
        let q: Vec<f32> = if rng.gen_bool(0.5) {
            let base = globals.row(rng.gen_range(0..globals.len()));
            base.iter()
                .map(|v| v + rng.gen_range(-0.01..0.01))
                .collect()
        } else {
            (0..d).map(|_| rng.gen_range(-0.03..0.03)).collect()
        };
        let mut oracle: Vec<(f64, usize)> = (0..globals.len())
            .map(|i| {
                let s: f64 = globals
                    .row(i)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                    .sum();
                (s, i)
            })
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for n in DEFAULT_SWEEP {
            let got: Vec<usize> = retrieve_top_n(&q, globals, n)
                .unwrap()
                .into_iter()
                .map(|r| r.0)
                .collect();
            let want: Vec<usize> = oracle[..n].iter().map(|r| r.1).collect();
            if got != want {
                mismatches += 1;
            }
        }
    }
    Verdict::new(
        mismatches == 0,
        format!(
            "{} × {} database, 50 queries × 6 n: {mismatches} mismatching rankings",
            globals.len(),
            d
        ),
    )
}

struct DeskRun {
    _dir: tempfile::TempDir,
    terrain: Terrain,
    db: DescriptorDatabase,
    flight: FlightSpec,
    interference: InterferenceSpec,
    metrics: MetricsTable,
    build_secs: f64,
    run_secs: f64,
}

const DESK_SEED: u64 = 42;

fn desk_terrain() -> Terrain {
    generate_terrain(11, (1200.0, 1200.0), 2.0).unwrap()
}

fn desk_camera() -> Camera {
    camera_from_fov(320, 240, 84f64.to_radians()).unwrap()
}

fn frame() -> LocalFrame {
    LocalFrame::new(GeoPoint::new(22.3, 114.2, 5.0).unwrap()).unwrap()
}

fn mild_interference() -> InterferenceSpec {
    InterferenceSpec {
        brightness_jitter: 0.1,
        noise_sigma: 3.0,
        ..Default::default()
    }
}

/// Flight through `waypoints` yielding exactly `count` captures.
fn flight_through(
    waypoints: Vec<LocalPoint>,
    count: usize,
    pitches: Vec<f64>,
    seed: u64,
) -> FlightSpec {
    let total: f64 = waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let rate = 0.5;
    FlightSpec {
        waypoints,
        speed: total / (count - 1) as f64 * rate * (1.0 - 1e-9),
        capture_rate: rate,
        heading: HeadingMode::AlongTrack,
        pitches,
        jitter_m: 3.0,
        seed,
    }
}

fn build(terrain: &Terrain, grid: &GridSpec<f64>, dir: &Path) -> DescriptorDatabase {
    let cam = desk_camera();
    let opts = BuildOptions::default();
    let cb = train_codebook(terrain, grid, &cam, &opts, &CodebookTraining::default()).unwrap();
    build_database(terrain, grid, &cam, &frame(), &cb, dir, &opts)
        .unwrap()
        .0
}

fn desk_run() -> DeskRun {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let terrain = desk_terrain();
    let grid = GridSpec {
        area: Area::new(-100.0, -100.0, 100.0, 100.0),
        spacing_xy: 10.0,
        elevations: vec![70.0],
        headings: 12,
        pitches: vec![45f64.to_radians()],
    };
    let db = build(&terrain, &grid, dir.path());
    let build_secs = start.elapsed().as_secs_f64();
    let flight = flight_through(
        vec![
            LocalPoint::new(-85.0, -72.0, 50.0),
            LocalPoint::new(78.0, -55.0, 70.0),
            LocalPoint::new(-40.0, 23.0, 90.0),
            LocalPoint::new(83.0, 86.0, 60.0),
        ],
        60,
        vec![45f64.to_radians()],
        5,
    );
    let interference = mild_interference();
    let t = Instant::now();
    let metrics = run_experiment(
        &db,
        &terrain,
        &flight,
        &interference,
        &DEFAULT_SWEEP,
        DESK_SEED,
        &LocalizeConfig::default(),
    )
    .unwrap();
    DeskRun {
        _dir: dir,
        terrain,
        db,
        flight,
        interference,
        metrics,
        build_secs,
        run_secs: t.elapsed().as_secs_f64(),
    }
}

fn criterion_4(run: &DeskRun) -> Verdict {
    let n = 3;
    let row = run.metrics.row(n).unwrap();
    let threshold = LocalizeConfig::default().threshold_for(&run.db);
    let records: Vec<_> = run.metrics.records(n).collect();
    let gross = records
        .iter()
        .filter(|r| r.err3d_m.is_some_and(|e| e > threshold))
        .count();
    let rmse = row.rmse3d_m.unwrap_or(f64::INFINITY);
    let secs = run.build_secs + run.run_secs;
    Verdict::new(
        records.len() == 60 && row.recall_pct >= 70.0 && rmse <= 3.0 && gross == 0 && secs < 900.0,
        format!(
            "{} queries, n = {n}: recall {:.1}%, 3D RMSE {rmse:.3} m, 2D RMSE {:.3} m, {gross} beyond {threshold} m; \
             build {:.0} s + queries {:.0} s",
            records.len(),
            row.recall_pct,
            row.rmse2d_m.unwrap_or(f64::NAN),
            run.build_secs,
            run.run_secs
        ),
    )
}

fn criterion_5(run: &DeskRun) -> Verdict {
    let mut rows = run.metrics.rows.clone();
    rows.sort_by_key(|r| std::cmp::Reverse(r.n));
    let monotone = rows.windows(2).all(|w| w[1].recall_pct <= w[0].recall_pct);
    let rmses: Vec<f64> = rows.iter().filter_map(|r| r.rmse3d_m).collect();
    let max = rmses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rmses.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "n={} {:.1}%/{:.3}m",
                r.n,
                r.recall_pct,
                r.rmse3d_m.unwrap_or(f64::NAN)
            )
        })
        .collect();
    Verdict::new(
        monotone && rmses.len() == rows.len() && ratio <= 1.4,
        format!(
            "recall non-increasing: {monotone}, RMSE max/min {ratio:.3}; {}",
            table.join(", ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let terrain = desk_terrain();
    let grid = GridSpec {
        area: Area::new(-40.0, -40.0, 40.0, 40.0),
        spacing_xy: 10.0,
        elevations: vec![70.0],
        headings: 12,
        pitches: [30f64, 45.0, 60.0].map(f64::to_radians).to_vec(),
    };
    let db = build(&terrain, &grid, dir.path());
    let flight = flight_through(
        vec![
            LocalPoint::new(-35.0, -33.0, 65.0),
            LocalPoint::new(33.0, -12.0, 75.0),
            LocalPoint::new(-28.0, 31.0, 70.0),
        ],
        30,
        vec![35f64.to_radians(), 55f64.to_radians()],
        6,
    );
    let m = run_experiment(
        &db,
        &terrain,
        &flight,
        &mild_interference(),
        &[3],
        66,
        &LocalizeConfig::default(),
    )
    .unwrap();
    let by_pitch = |p: f64| {
        let recs: Vec<_> = m
            .records(3)
            .filter(|r| (r.true_pitch_deg - p).abs() < 1e-6)
            .collect();
        let ok = recs.iter().filter(|r| r.is_localized()).count();
        format!("{p}°: {ok}/{}", recs.len())
    };
    let recall = m.row(3).unwrap().recall_pct;
    Verdict::new(
        recall >= 60.0,
        format!(
            "database pitches 30/45/60°, {} views; recall {recall:.1}% ({}, {}), 3D RMSE {:.3} m, {:.0} s",
            db.len(),
            by_pitch(35.0),
            by_pitch(55.0),
            m.row(3).unwrap().rmse3d_m.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_7(globals: &GlobalArray, run: &DeskRun) -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let q: Vec<f32> = globals.row(7).to_vec();
    let retrieval_ms = median(
        (0..11)
            .map(|_| {
                let t = Instant::now();
                pool.install(|| std::hint::black_box(retrieve_top_n(&q, globals, 50).unwrap()));
                t.elapsed().as_secs_f64() * 1e3
            })
            .collect(),
    );

    let cfg = LocalizeConfig {
        retrieval: RetrievalConfig { n: 3 },
        ..Default::default()
    };
    let samples = skyloc::eval::generate_flight(&run.flight).unwrap();
    let query_ms = median(
        samples
            .iter()
            .step_by(3)
            .enumerate()
            .map(|(i, s)| {
                let view = render(&run.terrain, &s.pose, run.db.camera()).unwrap();
                let img =
                    skyloc::eval::perturb_image(&view.color, &run.interference, i as u64).unwrap();
                localize(&img, &run.db, &cfg, i as u64)
                    .unwrap()
                    .timings
                    .total
            })
            .collect(),
    );
    let within = retrieval_ms < 100.0 && query_ms < 1000.0;
    let hard = retrieval_ms < 300.0 && query_ms < 3000.0;
    Verdict {
        pass: hard,
        warn: hard && !within,
        detail: format!(
            "single-thread retrieval over {}×{}: {retrieval_ms:.1} ms (bound 100); full query n = 3: {query_ms:.0} ms \
             (bound 1000)",
            globals.len(),
            globals.dim()
        ),
    }
}

fn same_database(a: &DescriptorDatabase, b: &DescriptorDatabase) -> bool {
    a.manifest() == b.manifest()
        && a.globals() == b.globals()
        && a.codebook().centroids() == b.codebook().centroids()
        && (0..a.len()).all(|i| {
            a.features(i).unwrap() == b.features(i).unwrap()
                && a.depth(i).unwrap() == b.depth(i).unwrap()
                && a.entries()[i].pose == b.entries()[i].pose
        })
}

fn criterion_8(run: &DeskRun) -> Verdict {
    let mut failures = Vec::new();

    // Build → load.
    let reloaded = load_database(run.db.dir()).unwrap();
    if !same_database(&run.db, &reloaded) {
        failures.push("desk database reload differs");
    }
    if read_manifest(run.db.dir()).unwrap() != *run.db.manifest() {
        failures.push("manifest JSON re-parse differs");
    }

    // Thread-count independence of the build.
    let terrain = common::small_terrain();
    let cb = common::small_codebook(&terrain);
    let snaps: Vec<_> = [1, 3]
        .iter()
        .map(|&threads| {
            let dir = tempfile::tempdir().unwrap();
            let opts = BuildOptions {
                threads: Some(threads),
                ..Default::default()
            };
            let (db, _) = build_database(
                &terrain,
                &common::small_grid(),
                &common::small_camera(),
                &frame(),
                &cb,
                dir.path(),
                &opts,
            )
            .unwrap();
            if !same_database(&db, &load_database(dir.path()).unwrap()) {
                failures.push("small database reload differs");
            }
            common::snapshot(dir.path())
        })
        .collect();
    if snaps[0] != snaps[1] {
        failures.push("database bytes depend on thread count");
    }

    // CSV round trip and seeded, thread-independent evaluation.
    let out = tempfile::tempdir().unwrap();
    export_report(&run.metrics, out.path()).unwrap();
    if read_metrics_csv(&out.path().join(METRICS_FILE)).unwrap() != run.metrics.rows {
        failures.push("metrics.csv re-parse differs");
    }
    if read_queries_csv(&out.path().join(QUERIES_FILE)).unwrap() != run.metrics.queries {
        failures.push("queries.csv re-parse differs");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let again = pool
        .install(|| {
            run_experiment(
                &run.db,
                &run.terrain,
                &run.flight,
                &run.interference,
                &DEFAULT_SWEEP,
                DESK_SEED,
                &LocalizeConfig::default(),
            )
        })
        .unwrap();
    let out2 = tempfile::tempdir().unwrap();
    export_report(&again, out2.path()).unwrap();
    for f in [METRICS_FILE, QUERIES_FILE] {
        if std::fs::read(out.path().join(f)).unwrap() != std::fs::read(out2.path().join(f)).unwrap()
        {
            failures.push("evaluation rerun is not byte-identical");
        }
    }

    // JSON query output.
    let samples = skyloc::eval::generate_flight(&run.flight).unwrap();
    let view = render(&run.terrain, &samples[10].pose, run.db.camera()).unwrap();
    let a = localize(&view.color, &run.db, &LocalizeConfig::default(), 9).unwrap();
    let b = pool.install(|| localize(&view.color, &run.db, &LocalizeConfig::default(), 9).unwrap());
    if a.outcome != b.outcome || a.trials != b.trials {
        failures.push("localize is not reproducible across thread counts");
    }
    let json = a.to_json();
    let parsed: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&json).unwrap()).unwrap();
    if parsed != json {
        failures.push("query JSON re-parse differs");
    }
    if let Some(r) = a.outcome.result() {
        if parsed["lat"].as_f64() != Some(r.pose_geo.lat)
            || parsed["lon"].as_f64() != Some(r.pose_geo.lon)
        {
            failures.push("query JSON coordinates not exact");
        }
    }

    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            "build/load, manifest, CSV, JSON round trips exact; build, evaluation and localize bit-identical across \
             thread counts and reruns"
                .into()
        } else {
            failures.join("; ")
        },
    )
}

fn report(id: u32, v: &Verdict) {
    let tag = match (v.pass, v.warn) {
        (true, false) => "PASS",
        (true, true) => "PASS (over soft bound)",
        (false, _) => "FAIL",
    };
    println!("acceptance {id}: {tag}: {}", v.detail);
}

fn main() {
    let mut verdicts = Vec::new();
    let mut record = |id: u32, v: Verdict| {
        report(id, &v);
        verdicts.push(v.pass);
    };
    record(1, criterion_1());
    record(2, criterion_2());
    let globals = random_globals(19_200, 4096, 33);
    record(3, criterion_3(&globals));
    let run = desk_run();
    record(4, criterion_4(&run));
    record(5, criterion_5(&run));
    record(6, criterion_6());
    record(7, criterion_7(&globals, &run));
    record(8, criterion_8(&run));
    let failed = verdicts.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
