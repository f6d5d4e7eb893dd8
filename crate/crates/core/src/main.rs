use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;

use avsi::cloud::{PointCloud, PointLabel};
use avsi::fitting::{ransac_circle, FitRecord, RansacParams};
use avsi::harness::{self, ExperimentSpec, HarnessError};
use avsi::perception::{deproject, load_mask};
use avsi::scene::{build_scene, render_splat, CameraModel, RgbdImage, SceneConfig};
use avsi::simkernel::{execute_trial, TrialConfig};

#[derive(Parser)]
#[command(name = "avsi", version, about = "Vascular shunt insertion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scene, render it and export images, point cloud and ground truth.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the rim circle from a point-cloud CSV or from mask + depth + camera.
    Fit {
        #[arg(long, required_unless_present = "mask", conflicts_with = "mask")]
        cloud: Option<PathBuf>,
        #[arg(long, requires_all = ["depth", "camera"])]
        mask: Option<PathBuf>,
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long)]
        camera: Option<PathBuf>,
        /// RANSAC parameters as JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        refine: bool,
        /// Keep points labeled `background` from a CSV cloud.
        #[arg(long)]
        include_background: bool,
    },
    /// Run one trial and print its outcome as JSON.
    Trial {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an experiment grid and write trials.csv, summary.csv and report.txt.
    Experiment {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to AVSI_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize a trials.csv into the report table.
    Report { trials: PathBuf },
}

enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::EmptyResults => CliError::Config(e.to_string()),
            HarnessError::Io(_) | HarnessError::Csv(_) => CliError::Io(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn generate(config: Option<&Path>, out: &Path, seed: u64) -> Result<(), CliError> {
    let cfg: SceneConfig = read_json(config)?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = build_scene(&cfg, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;
    let cam = cfg.camera();
    let render = render_splat(&cfg, &scene, &cam, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    render.image.save_color_png(&out.join("color.png")).map_err(|e| io_err(out, e))?;
    render.image.save_depth_png(&out.join("depth.png")).map_err(|e| io_err(out, e))?;
    let mask = avsi::perception::SegMask {
        width: cam.width,
        height: cam.height,
        data: render.labels.iter().map(|l| l.is_rim_colored()).collect(),
    };
    mask.save_png(&out.join("mask.png")).map_err(|e| io_err(out, e))?;
    render.labeled_cloud(&cam).save_csv(&out.join("cloud.csv")).map_err(|e| io_err(out, e))?;
    write_json(&out.join("camera.json"), &cam)?;
    write_json(&out.join("truth.json"), &scene.truth)?;
    write_json(&out.join("scene.json"), &cfg)?;
    eprintln!("wrote scene to {} ({} rim pixels)", out.display(), render.rim_pixel_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    cloud: Option<&Path>,
    mask: Option<&Path>,
    depth: Option<&Path>,
    camera: Option<&Path>,
    params: Option<&Path>,
    seed: Option<u64>,
    refine: bool,
    include_background: bool,
) -> Result<(), CliError> {
    let mut p: RansacParams = read_json(params)?;
    if let Some(s) = seed {
        p.seed = s;
    }
    p.refine |= refine;
    let points = match (cloud, mask, depth, camera) {
        (Some(path), _, _, _) => {
            let c = PointCloud::load_csv(path).map_err(|e| io_err(path, e))?;
            if include_background {
                c
            } else {
                c.filter_labels(&[PointLabel::Rim, PointLabel::Outlier])
            }
        }
        (None, Some(mask), Some(depth), Some(camera)) => {
            let cam: CameraModel = {
                let text = fs::read_to_string(camera).map_err(|e| io_err(camera, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", camera.display())))?
            };
            cam.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let img = RgbdImage::load_png(None, depth).map_err(|e| io_err(depth, e))?;
            let m = load_mask(mask, Some((cam.width, cam.height))).map_err(|e| CliError::Config(e.to_string()))?;
            deproject(&m, &img, &cam).map_err(|e| CliError::Config(e.to_string()))?
        }
        _ => return Err(CliError::Config("need --cloud, or --mask with --depth and --camera".into())),
    };
    let result = ransac_circle(&points, &p).map_err(|e| CliError::Config(e.to_string()))?;
    print_json(&FitRecord::from(&result));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, seed } => generate(config.as_deref(), &out, seed),
        Command::Fit { cloud, mask, depth, camera, params, seed, refine, include_background } => fit(
            cloud.as_deref(),
            mask.as_deref(),
            depth.as_deref(),
            camera.as_deref(),
            params.as_deref(),
            seed,
            refine,
            include_background,
        ),
        Command::Trial { config } => {
            let cfg: TrialConfig = read_json(config.as_deref())?;
            let outcome = execute_trial(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
            print_json(&outcome);
            Ok(())
        }
        Command::Experiment { spec, out, threads } => {
            let spec: ExperimentSpec = read_json(spec.as_deref())?;
            let workers = threads.or_else(harness::threads_from_env);
            let result = harness::run_experiment(&spec, workers)?;
            harness::write_outputs(&out, &result)?;
            let (table, _) = harness::report(&result.summaries)?;
            print!("{table}");
            Ok(())
        }
        Command::Report { trials } => {
            let rows = harness::read_rows(&trials)?;
            let (table, csv) = harness::report(&harness::summarize(&rows))?;
            let summary = trials.with_file_name("summary.csv");
            fs::write(&summary, csv).map_err(|e| io_err(&summary, e))?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Config(msg) | CliError::Io(msg)) = &e;
            eprintln!("avsi: {msg}");
            ExitCode::from(e.code())
        }
    }
}
