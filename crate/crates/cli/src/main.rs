//! `skyloc` command-line front end.
//!
//! Exit status: 0 on success, 2 when a query is not localized, 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skyloc::database::{
    build_database_with_progress, estimate_size, load_database, train_codebook, BuildOptions,
    CodebookTraining,
};
use skyloc::eval::{export_report, run_experiment, FlightSpec, InterferenceSpec};
use skyloc::features::{Codebook, DEFAULT_CLUSTERS, LOCAL_DIM};
use skyloc::imageio::{read_ppm, write_ppm};
use skyloc::localize::{localize, LocalizeConfig, Outcome, RetrievalConfig};
use skyloc::posegrid::{Area, GridSpec};
use skyloc::world::{camera_from_fov, generate_terrain, render, Terrain};
use skyloc::{Camera, GeoPoint, LocalFrame, LocalPoint, Pose};

const EXIT_UNLOCALIZED: u8 = 2;

/// Map-based visual geo-localization: build a rendered pose-grid database,
/// localize query images against it and evaluate synthetic flights.
///
/// All angles on the command line are in degrees.
#[derive(Parser, Debug)]
#[command(name = "skyloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render every grid pose and write a descriptor database.
    BuildDb(BuildDbArgs),
    /// Localize one PPM image against a database.
    Query(QueryArgs),
    /// Fly a synthetic query track over the database terrain and report metrics.
    Eval(EvalArgs),
    /// Render one view of a terrain.
    Render(RenderArgs),
    /// Generate a seeded synthetic terrain.
    Terrain(TerrainArgs),
}

#[derive(Args, Debug)]
#[group(id = "terrain_source", required = true, multiple = false)]
struct TerrainSource {
    /// Heightmap file; its texture is read from the sibling `.ppm`.
    #[arg(long)]
    terrain: Option<PathBuf>,
    /// Generate a synthetic terrain with this seed instead.
    #[arg(long)]
    terrain_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GeneratedTerrain {
    /// Side of a generated terrain in metres; defaults to the area plus 500 m on every side.
    #[arg(long)]
    terrain_extent: Option<f64>,
    /// Cell size of a generated terrain, metres.
    #[arg(long, default_value_t = 2.0)]
    cell_size: f64,
}

#[derive(Args, Debug)]
struct BuildDbArgs {
    #[command(flatten)]
    source: TerrainSource,
    #[command(flatten)]
    generated: GeneratedTerrain,
    /// Grid area x0,y0,x1,y1 in local metres (half-open).
    #[arg(long, value_parser = parse_list::<f64>)]
    area: List<f64>,
    /// Horizontal grid spacing, metres.
    #[arg(long)]
    spacing: f64,
    /// Camera elevations above the frame origin, metres.
    #[arg(long, value_parser = parse_list::<f64>)]
    elevations: List<f64>,
    /// Number of evenly spaced headings.
    #[arg(long)]
    headings: u32,
    /// Pitches below the horizon, degrees.
    #[arg(long, value_parser = parse_list::<f64>)]
    pitches: List<f64>,
    /// Camera width,height,horizontal FOV (degrees).
    #[arg(long, value_parser = parse_list::<f64>, default_value = "640,480,84")]
    camera: List<f64>,
    /// Geographic origin lat,lon,alt of the local frame.
    #[arg(long, value_parser = parse_list::<f64>, default_value = "0,0,0")]
    origin: List<f64>,
    /// Existing codebook file.
    #[arg(long, conflicts_with = "train_codebook", required_unless_present_any = ["train_codebook", "dry_run"])]
    codebook: Option<PathBuf>,
    /// Train a codebook on the grid's own views.
    #[arg(long)]
    train_codebook: bool,
    /// Codebook clusters when training.
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    clusters: usize,
    /// Seed for codebook training.
    #[arg(long, default_value_t = 0)]
    codebook_seed: u64,
    /// Depth subsampling stride.
    #[arg(long, default_value_t = 2)]
    depth_stride: u32,
    /// Output directory.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Replace an existing database.
    #[arg(long)]
    force: bool,
    /// Print the pose count and size estimate without building.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    db: PathBuf,
    /// Query image (PPM).
    #[arg(long)]
    image: PathBuf,
    /// Retrieval candidates tried by PnP.
    #[arg(long, default_value_t = 3)]
    candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
    /// Also write the JSON result to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    db: PathBuf,
    /// Flight JSON (waypoints in local metres, pitches in radians).
    #[arg(long)]
    flight: PathBuf,
    /// Interference JSON; identity when absent.
    #[arg(long)]
    interference: Option<PathBuf>,
    #[arg(long, value_parser = parse_list::<usize>, default_value = "50,30,20,10,3,1")]
    candidates_sweep: List<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Terrain file when the database carries no copy.
    #[arg(long)]
    terrain: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    source: TerrainSource,
    #[command(flatten)]
    generated: GeneratedTerrain,
    /// x,y,z,heading,pitch,roll: local metres and degrees.
    #[arg(long, value_parser = parse_list::<f64>)]
    pose: List<f64>,
    /// width,height,horizontal FOV (degrees).
    #[arg(long, value_parser = parse_list::<f64>, default_value = "640,480,84")]
    camera: List<f64>,
    /// Output color image (PPM).
    #[arg(long)]
    out: PathBuf,
    /// Also write the Z-depth raster.
    #[arg(long)]
    depth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TerrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side length in metres.
    #[arg(long, default_value_t = 1200.0)]
    extent: f64,
    #[arg(long, default_value_t = 2.0)]
    cell_size: f64,
    /// Heightmap output; the texture goes next to it as `.ppm`.
    #[arg(long)]
    out: PathBuf,
}

/// Comma-separated values.
#[derive(Debug, Clone)]
struct List<T>(Vec<T>);

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<List<T>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| format!("invalid value {p:?} in {s:?}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(List)
}

fn exactly<const N: usize>(list: &List<f64>, what: &str) -> Result<[f64; N]> {
    list.0.as_slice().try_into().map_err(|_| {
        anyhow!(
            "{what} needs {N} comma-separated values, got {}",
            list.0.len()
        )
    })
}

fn camera(list: &List<f64>) -> Result<Camera> {
    let [w, h, fov] = exactly::<3>(list, "--camera")?;
    if w < 1.0 || h < 1.0 || w.fract() != 0.0 || h.fract() != 0.0 {
        bail!("--camera width and height must be positive integers");
    }
    Ok(camera_from_fov(w as u32, h as u32, fov.to_radians())?)
}

fn load_terrain(
    src: &TerrainSource,
    gen: &GeneratedTerrain,
    default_extent: f64,
) -> Result<Terrain> {
    match (&src.terrain, src.terrain_seed) {
        (Some(path), _) => {
            Terrain::load(path).with_context(|| format!("loading terrain {}", path.display()))
        }
        (None, Some(seed)) => {
            let e = gen.terrain_extent.unwrap_or(default_extent);
            Ok(generate_terrain(seed, (e, e), gen.cell_size)?)
        }
        (None, None) => bail!("one of --terrain or --terrain-seed is required"),
    }
}

fn build_db(a: &BuildDbArgs) -> Result<u8> {
    let [x0, y0, x1, y1] = exactly::<4>(&a.area, "--area")?;
    let grid = GridSpec {
        area: Area::new(x0, y0, x1, y1),
        spacing_xy: a.spacing,
        elevations: a.elevations.0.clone(),
        headings: a.headings,
        pitches: a.pitches.0.iter().map(|p| p.to_radians()).collect(),
    };
    grid.validate()?;
    let n = grid.pose_count()?;
    let cam = camera(&a.camera)?;
    let [lat, lon, alt] = exactly::<3>(&a.origin, "--origin")?;
    let frame = LocalFrame::new(GeoPoint::new(lat, lon, alt)?)?;
    let side = (x1 - x0).max(y1 - y0) + 1000.0;
    let terrain = load_terrain(&a.source, &a.generated, side)?;
    let opts = BuildOptions {
        depth_stride: a.depth_stride,
        threads: a.threads,
        force: a.force,
        ..Default::default()
    };

    println!("poses: {n}");
    let clusters = match &a.codebook {
        Some(path) => Codebook::load(path)?.k(),
        None => a.clusters,
    };
    let estimate = estimate_size(
        &terrain,
        &grid,
        &cam,
        clusters * LOCAL_DIM,
        LOCAL_DIM,
        &opts,
        16,
    )?;
    println!(
        "estimated size: {} bytes ({:.1} MiB)",
        estimate.total(),
        estimate.total() as f64 / (1 << 20) as f64
    );
    if a.dry_run {
        return Ok(0);
    }
    let out = a.out.as_ref().ok_or_else(|| anyhow!("--out is required"))?;

    let codebook = match &a.codebook {
        Some(path) => Codebook::load(path)?,
        None => {
            eprintln!("training codebook ({clusters} clusters)");
            let training = CodebookTraining {
                clusters,
                seed: a.codebook_seed,
                ..Default::default()
            };
            train_codebook(&terrain, &grid, &cam, &opts, &training)?
        }
    };
    let step = (n / 20).max(1);
    let progress = |done: usize, total: usize| {
        if done.is_multiple_of(step) || done == total {
            eprintln!("rendered {done}/{total}");
        }
    };
    let (_, report) = build_database_with_progress(
        &terrain, &grid, &cam, &frame, &codebook, out, &opts, &progress,
    )?;
    for (id, sky) in &report.sky_warnings {
        eprintln!("warning: view {id} is {:.0}% sky", sky * 100.0);
    }
    println!(
        "wrote {} entries, {} bytes to {}",
        report.n,
        report.written_bytes,
        out.display()
    );
    Ok(0)
}

fn query(a: &QueryArgs) -> Result<u8> {
    let db = load_database(&a.db)?;
    let img = read_ppm(&a.image)?;
    let cfg = LocalizeConfig {
        retrieval: RetrievalConfig { n: a.candidates },
        ..Default::default()
    };
    let report = localize(&img, &db, &cfg, a.seed)?;
    let json = serde_json::to_string_pretty(&report.to_json())?;
    if let Some(out) = &a.out {
        fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
    }
    if a.json {
        println!("{json}");
    } else {
        match &report.outcome {
            Outcome::Localized(r) => println!(
                "localized: lat {:.8} lon {:.8} alt {:.2} m, heading {:.2}°, pitch {:.2}°, {} inliers, candidate {}",
                r.pose_geo.lat,
                r.pose_geo.lon,
                r.pose_geo.alt,
                r.pose_local.heading.to_degrees(),
                r.pose_local.pitch.to_degrees(),
                r.inliers,
                r.candidate_id
            ),
            Outcome::Unlocalized(reason) => println!("unlocalized: {}", reason.as_str()),
        }
    }
    Ok(match report.outcome {
        Outcome::Localized(_) => 0,
        Outcome::Unlocalized(_) => EXIT_UNLOCALIZED,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn eval(a: &EvalArgs) -> Result<u8> {
    let db = load_database(&a.db)?;
    let terrain = match &a.terrain {
        Some(path) => Terrain::load(path)?,
        None => db
            .load_terrain()?
            .ok_or_else(|| anyhow!("database has no terrain copy; pass --terrain"))?,
    };
    let flight: FlightSpec = read_json(&a.flight)?;
    let interference: InterferenceSpec = match &a.interference {
        Some(path) => read_json(path)?,
        None => InterferenceSpec::default(),
    };
    let sweep = &a.candidates_sweep.0;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        pool = pool.num_threads(t);
    }
    let metrics = pool.build()?.install(|| {
        run_experiment(
            &db,
            &terrain,
            &flight,
            &interference,
            sweep,
            a.seed,
            &LocalizeConfig::default(),
        )
    })?;
    export_report(&metrics, &a.out)?;
    println!("n,rmse3d_m,rmse2d_m,recall_pct");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    for r in &metrics.rows {
        println!(
            "{},{},{},{:.1}",
            r.n,
            fmt(r.rmse3d_m),
            fmt(r.rmse2d_m),
            r.recall_pct
        );
    }
    Ok(0)
}

fn render_view(a: &RenderArgs) -> Result<u8> {
    let [x, y, z, heading, pitch, roll] = exactly::<6>(&a.pose, "--pose")?;
    let pose = Pose::new(
        LocalPoint::new(x, y, z),
        heading.to_radians(),
        pitch.to_radians(),
        roll.to_radians(),
    );
    let cam = camera(&a.camera)?;
    let side = 2.0 * x.abs().max(y.abs()) + 1000.0;
    let terrain = load_terrain(&a.source, &a.generated, side)?;
    let view = render(&terrain, &pose, &cam)?;
    write_ppm(&a.out, &view.color)?;
    if let Some(path) = &a.depth {
        fs::write(path, skyloc::database::encode_depth(&view.depth))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn make_terrain(a: &TerrainArgs) -> Result<u8> {
    let t = generate_terrain(a.seed, (a.extent, a.extent), a.cell_size)?;
    t.save(&a.out)?;
    let (x0, y0, x1, y1) = t.bounds();
    println!(
        "terrain {}×{} cells covering [{x0}, {x1}] × [{y0}, {y1}] m",
        t.grid_width(),
        t.grid_height()
    );
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::BuildDb(a) => build_db(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render_view(a),
        Command::Terrain(a) => make_terrain(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
