use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use poseinit_core::eval::{
    evaluate, evaluate_serial, merge_reports, write_dataset, write_run, Dataset, EvalConfig,
    Method, Thresholds,
};
use poseinit_core::scene::{build_cubesat_2u, TrajectorySpec};
use poseinit_core::silhouette::{generate_database, SilhouetteDatabase, ViewGrid};
use poseinit_core::{CameraModel, WireframeModel};

#[derive(Parser)]
#[command(
    name = "poseinit",
    version,
    about = "Monocular pose initialization: datasets, databases, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a turntable sequence with ground truth.
    GenDataset(GenDataset),
    /// Build a silhouette database on a view-sphere grid.
    GenDb(GenDb),
    /// Run one pipeline over a dataset.
    Run(Run),
    /// Merge per-frame CSVs into a summary and CDF files.
    Report(Report),
}

#[derive(Args)]
struct GenDataset {
    #[arg(long)]
    out: PathBuf,
    /// Camera to target distance, mm.
    #[arg(long, default_value_t = 1630.0)]
    range: f64,
    /// Rotation per frame, deg.
    #[arg(long, default_value_t = 0.84)]
    step: f64,
    #[arg(long, default_value_t = 475)]
    frames: usize,
    /// Rotation axis tilt, deg.
    #[arg(long, default_value_t = 30.0)]
    tilt: f64,
    /// Intensity noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 2.0)]
    line_width: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target model JSON; the built-in 2U CubeSat otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Camera intrinsics JSON; a 1920x1080 110° pinhole otherwise.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
}

#[derive(Args)]
struct GenDb {
    #[arg(long)]
    out: PathBuf,
    /// Take model, intrinsics and rotation axis from this dataset.
    #[arg(long, conflicts_with_all = ["model", "intrinsics", "tilt"])]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// Rotation axis tilt defining the grid's vertical, deg.
    #[arg(long)]
    tilt: Option<f64>,
    /// Sphere radii, mm.
    #[arg(long, value_delimiter = ',', default_values_t = [1500.0, 1600.0, 1700.0])]
    radii: Vec<f64>,
    /// Inclinations, deg.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_values_t = [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0])]
    inclinations: Vec<f64>,
    /// Azimuth step, deg.
    #[arg(long, default_value_t = 10.0)]
    azimuth_step: f64,
    /// Evaluation config JSON; its silhouette section sets the descriptors.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Run {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    dataset: PathBuf,
    /// Silhouette database, required with `--method silhouette`.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate frames on a single thread.
    #[arg(long)]
    serial: bool,
    /// Leave `runtime_ms` empty.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct Report {
    /// Per-frame CSVs written by `run`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300.0)]
    position_mm: f64,
    #[arg(long, default_value_t = 10.0)]
    attitude_deg: f64,
}

enum Failure {
    Usage(String),
    Data(String),
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_model(path: Option<&Path>) -> Result<WireframeModel, Failure> {
    match path {
        None => Ok(build_cubesat_2u()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            WireframeModel::from_json(&text).map_err(data)
        }
    }
}

fn load_camera(path: Option<&Path>) -> Result<CameraModel, Failure> {
    let cam = match path {
        None => return Ok(CameraModel::wide_fov_1080p()),
        Some(p) => read_json::<CameraModel>(p)?,
    };
    cam.validate().map_err(data)?;
    Ok(cam)
}

fn load_config(path: Option<&Path>) -> Result<EvalConfig, Failure> {
    path.map_or(Ok(EvalConfig::default()), read_json)
}

fn gen_dataset(a: GenDataset) -> Result<(), Failure> {
    let spec = TrajectorySpec {
        range: a.range,
        step: a.step,
        frame_count: a.frames,
        axis_tilt: a.tilt,
        noise_sigma: a.noise,
        line_width: a.line_width,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let model = load_model(a.model.as_deref())?;
    let cam = load_camera(a.intrinsics.as_deref())?;
    let ds = write_dataset(&a.out, &spec, &model, &cam, a.seed).map_err(data)?;
    println!("wrote {} frames to {}", ds.len(), a.out.display());
    Ok(())
}

fn gen_db(a: GenDb) -> Result<(), Failure> {
    let (model, cam, spec) = match &a.dataset {
        Some(d) => {
            let ds = Dataset::open(d).map_err(data)?;
            (ds.model, ds.camera, ds.meta.trajectory)
        }
        None => {
            let spec = TrajectorySpec {
                axis_tilt: a.tilt.unwrap_or(TrajectorySpec::default().axis_tilt),
                ..Default::default()
            };
            (
                load_model(a.model.as_deref())?,
                load_camera(a.intrinsics.as_deref())?,
                spec,
            )
        }
    };
    let grid = ViewGrid {
        radii: a.radii,
        inclinations: a.inclinations,
        azimuth_step: a.azimuth_step,
        ..ViewGrid::for_trajectory(&spec)
    };
    grid.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let cfg = load_config(a.config.as_deref())?;
    let db = generate_database(&model, &grid, &cam, &cfg.silhouette).map_err(data)?;
    db.save(&a.out).map_err(data)?;
    println!(
        "wrote {} of {} entries to {}",
        db.len(),
        grid.radii.len() * grid.inclinations.len() * grid.azimuths().len(),
        a.out.display()
    );
    Ok(())
}

fn run(a: Run) -> Result<(), Failure> {
    if a.method == Method::Silhouette && a.db.is_none() {
        return Err(Failure::Usage("--method silhouette needs --db".into()));
    }
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.no_timing {
        cfg.record_timing = false;
    }
    let dataset = Dataset::open(&a.dataset).map_err(data)?;
    let db = match &a.db {
        Some(p) if a.method == Method::Silhouette => Some(
            SilhouetteDatabase::load(p)
                .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
        ),
        _ => None,
    };
    let (frames, report) = if a.serial {
        evaluate_serial(&dataset, a.method, db.as_ref(), &cfg)
    } else {
        evaluate(&dataset, a.method, db.as_ref(), &cfg)
    }
    .map_err(data)?;
    write_run(&a.out, &frames, &report, &cfg, &dataset.meta.model_hash).map_err(data)?;
    println!(
        "{}: {}/{} succeeded ({:.1}%), {} converged",
        report.method,
        report.successes,
        report.total,
        100.0 * report.success_rate,
        report.converged
    );
    Ok(())
}

fn report(a: Report) -> Result<(), Failure> {
    let th = Thresholds {
        position_mm: a.position_mm,
        attitude_deg: a.attitude_deg,
    };
    let inputs: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    for r in merge_reports(&inputs, &a.out, &th).map_err(data)? {
        println!("{}: {}/{} succeeded", r.method, r.successes, r.total);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::GenDb(a) => gen_db(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
