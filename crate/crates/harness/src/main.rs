use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blocksim_core::dynamics::{simulate_scene_traced, PerturbationSchedule, SimConfig};
use blocksim_core::ipe::{ipe_predict, IpeParams, PredictionRecord, SceneSource};
use blocksim_core::render::{
    gaussian_blur, render_scene, render_triplet, sample_camera, triplet_cameras, Camera, CameraDistribution, Image,
    RenderConfig,
};
use blocksim_core::scene::{
    calibrated_stddev, generate_boundary_scene, generate_scene, BoundaryParams, GenParams, SceneRecord, SceneState,
};
use blocksim_core::seed::{derive_seed, rng_from_seed, stream};
use blocksim_core::vision::{infer_scene, MhConfig};
use blocksim_harness::dataset::{gen_dataset, DatasetConfig};
use blocksim_harness::experiments::{run, ExperimentConfig};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "blocksim", version, about = "Block-stack stability simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate stacked scenes as JSON lines.
    GenScenes {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        n_blocks: usize,
        /// Horizontal offset stddev; defaults to the calibrated value.
        #[arg(long)]
        stddev: Option<f64>,
        /// Emit balanced stacks at this visual-instability level (1-4) instead.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render every scene of a scene file to binary graymaps.
    Render {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Narrow viewpoints and no tilt.
        #[arg(long)]
        restricted: bool,
        /// Also render the two orbited views.
        #[arg(long)]
        triplet: bool,
        /// Gaussian blur width in pixels.
        #[arg(long)]
        blur: Option<f64>,
    },
    /// Emit a labeled image dataset with an index file.
    GenDataset {
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        #[arg(long, default_value_t = 4)]
        n_blocks: usize,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Simulate every scene of a scene file once.
    Simulate {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one trajectory file per scene into this directory.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Noisy-simulation stability judgment for every scene of a scene file.
    Ipe {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 40.0)]
        phi: f64,
        #[arg(long, default_value_t = 20)]
        n_sims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer a scene posterior from three rendered views.
    Infer(InferArgs),
    /// Accuracy over the sigma x phi grid.
    Exp1(ExpArgs),
    /// Balanced stacks at increasing visual instability.
    Exp3(ExpArgs),
    /// Transfer across block counts.
    Exp4(ExpArgs),
}

#[derive(Args)]
struct InferArgs {
    /// Scene file; the observation is rendered from scene `line`.
    #[arg(long, conflicts_with = "images")]
    scenes: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    line: usize,
    /// Three observed graymaps (base view, then the orbited views).
    #[arg(long, num_args = 3, requires = "camera")]
    images: Option<Vec<PathBuf>>,
    /// File holding the base camera as one JSON line.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 4)]
    n_blocks: usize,
    #[arg(long)]
    infer_count: bool,
    #[arg(long)]
    restricted: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenes per condition group; experiment default when omitted.
    #[arg(long)]
    n_scenes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    phis: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    block_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    /// Noise and force used by exp3 and exp4.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    n_sims: Option<usize>,
    /// Judge inferred scenes instead of the true states.
    #[arg(long)]
    vision: bool,
    #[arg(long)]
    mh_steps: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = dispatch(Cli::parse().command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenScenes { n, n_blocks, stddev, level, seed, out } => gen_scenes(n, n_blocks, stddev, level, seed, out),
        Command::Render { scenes, out_dir, resolution, seed, restricted, triplet, blur } => {
            render(&scenes, &out_dir, resolution, seed, restricted, triplet, blur)
        }
        Command::GenDataset { n_train, n_test, n_blocks, resolution, seed, out_dir } => {
            let summary = gen_dataset(&DatasetConfig::new(n_train, n_test, n_blocks, resolution, seed), &out_dir)?;
            println!("{} images, stable fraction {:.3}", summary.entries.len(), summary.stable_fraction);
            Ok(())
        }
        Command::Simulate { scenes, sigma, phi, seed, out, trace_dir } => simulate(&scenes, sigma, phi, seed, out, trace_dir),
        Command::Ipe { scenes, sigma, phi, n_sims, seed, out } => ipe(&scenes, sigma, phi, n_sims, seed, out),
        Command::Infer(args) => infer(args),
        Command::Exp1(args) => experiment(ExperimentConfig::exp1(args.seed), args),
        Command::Exp3(args) => experiment(ExperimentConfig::exp3(args.seed), args),
        Command::Exp4(args) => experiment(ExperimentConfig::exp4(args.seed), args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn read_scenes(path: &Path) -> Result<Vec<SceneState>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            SceneRecord::parse_line(l)
                .and_then(|r| r.to_scene())
                .with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

fn gen_scenes(n: usize, n_blocks: usize, stddev: Option<f64>, level: Option<u32>, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let stddev = match stddev {
        Some(s) => s,
        None => calibrated_stddev(n_blocks)?,
    };
    let boundary = BoundaryParams { n_blocks, ..BoundaryParams::default() };
    let lines = (0..n)
        .into_par_iter()
        .map(|i| {
            let scene_seed = derive_seed(seed, stream::SCENE, i as u64);
            let scene = match level {
                Some(level) => generate_boundary_scene(level, true, scene_seed, &boundary)?,
                None => generate_scene(&GenParams::new(n_blocks, stddev, scene_seed)?),
            };
            Ok(SceneRecord::from_scene(scene_seed, &scene)?.to_line())
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out.as_deref(), &(lines.join("\n") + "\n"))
}

fn render(
    scenes: &Path,
    out_dir: &Path,
    resolution: usize,
    seed: u64,
    restricted: bool,
    triplet: bool,
    blur: Option<f64>,
) -> Result<()> {
    let scenes = read_scenes(scenes)?;
    let config = RenderConfig::with_resolution(resolution);
    config.validate()?;
    let dist = if restricted { CameraDistribution::restricted() } else { CameraDistribution::default() };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let rendered = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let camera = sample_camera(scene, &dist, derive_seed(seed, stream::CAMERA, i as u64))?;
            let images: Vec<Image> = if triplet {
                render_triplet(scene, &camera, &config).into()
            } else {
                vec![render_scene(scene, &camera, &config)]
            };
            let images = images.into_iter().map(|im| blur.map_or(im.clone(), |w| gaussian_blur(&im, w))).collect();
            Ok((camera, images))
        })
        .collect::<Result<Vec<(Camera, Vec<Image>)>>>()?;
    let mut cameras = String::new();
    for (i, (camera, images)) in rendered.iter().enumerate() {
        for (v, im) in images.iter().enumerate() {
            let name = if triplet { format!("{i:06}-{v}.pgm") } else { format!("{i:06}.pgm") };
            let path = out_dir.join(name);
            im.write_pgm(&path).with_context(|| format!("writing {}", path.display()))?;
        }
        cameras.push_str(&serde_json::to_string(camera)?);
        cameras.push('\n');
    }
    emit(Some(&out_dir.join("cameras.jsonl")), &cameras)
}

fn simulate(scenes: &Path, sigma: f64, phi: f64, seed: u64, out: Option<PathBuf>, trace_dir: Option<PathBuf>) -> Result<()> {
    let scenes = read_scenes(scenes)?;
    let config = SimConfig::default();
    if let Some(dir) = &trace_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let results = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let sim_seed = derive_seed(seed, stream::SIM, i as u64);
            let perturbation =
                PerturbationSchedule::random(phi, &mut rng_from_seed(derive_seed(sim_seed, stream::PERTURB, 0)));
            let mut trace = String::new();
            let outcome = simulate_scene_traced(scene, &config, &perturbation, sigma, sim_seed, |frame| {
                if trace_dir.is_some() {
                    trace.push_str(&frame.to_line());
                    trace.push('\n');
                }
            })
            .with_context(|| format!("scene {i}"))?;
            let line = serde_json::json!({ "scene_line": i, "outcome": outcome }).to_string();
            Ok((line, trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for (i, (line, trace)) in results.iter().enumerate() {
        text.push_str(line);
        text.push('\n');
        if let Some(dir) = &trace_dir {
            let path = dir.join(format!("{i:06}.jsonl"));
            fs::write(&path, trace).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    emit(out.as_deref(), &text)
}

fn ipe(scenes: &Path, sigma: f64, phi: f64, n_sims: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let scenes = read_scenes(scenes)?;
    let params = IpeParams { sigma, phi, n_sims, ..IpeParams::default() };
    let config = SimConfig::default();
    let records = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let pred = ipe_predict(SceneSource::State(scene), &params, &config, derive_seed(seed, stream::SIM, i as u64))
                .with_context(|| format!("scene {i}"))?;
            Ok(PredictionRecord::new(format!("{i:06}"), &params, &pred).to_line())
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out.as_deref(), &format!("{}\n{}\n", PredictionRecord::HEADER, records.join("\n")))
}

fn infer(args: InferArgs) -> Result<()> {
    let config = MhConfig {
        steps: args.steps,
        burn_in: args.burn_in,
        n_blocks: args.n_blocks,
        infer_block_count: args.infer_count,
        render: RenderConfig::with_resolution(args.resolution),
        seed: derive_seed(args.seed, stream::MH, 0),
        ..MhConfig::default()
    };
    let (images, base) = match (&args.scenes, &args.images, &args.camera) {
        (Some(scenes), None, _) => {
            let scenes = read_scenes(scenes)?;
            let Some(scene) = scenes.get(args.line) else {
                bail!("scene file has {} scenes, line {} requested", scenes.len(), args.line);
            };
            let dist = if args.restricted { CameraDistribution::restricted() } else { CameraDistribution::default() };
            let camera = sample_camera(scene, &dist, derive_seed(args.seed, stream::CAMERA, args.line as u64))?;
            (render_triplet(scene, &camera, &config.render), camera)
        }
        (None, Some(paths), Some(camera)) => {
            let text = fs::read_to_string(camera).with_context(|| format!("reading {}", camera.display()))?;
            let camera: Camera = serde_json::from_str(text.trim()).context("parsing camera")?;
            let read = |p: &PathBuf| Image::read_pgm(p).with_context(|| format!("reading {}", p.display()));
            ([read(&paths[0])?, read(&paths[1])?, read(&paths[2])?], camera)
        }
        _ => bail!("pass either --scenes or --images with --camera"),
    };
    let posterior = infer_scene(&images, &triplet_cameras(&base), &config)?;
    log::info!("acceptance rate {:.3}, block-count mode {}", posterior.acceptance_rate, posterior.block_count_mode());
    emit(args.out.as_deref(), &(posterior.to_lines().join("\n") + "\n"))
}

fn experiment(mut config: ExperimentConfig, args: ExpArgs) -> Result<()> {
    if let Some(n) = args.n_scenes {
        config.n_scenes = n;
    }
    if let Some(v) = args.sigmas {
        config.sigmas = v;
    }
    if let Some(v) = args.phis {
        config.phis = v;
    }
    if let Some(v) = args.block_counts {
        config.block_counts = v;
    }
    if let Some(v) = args.levels {
        config.levels = v;
    }
    if let Some(v) = args.sigma {
        config.ipe.sigma = v;
    }
    if let Some(v) = args.phi {
        config.ipe.phi = v;
    }
    if let Some(v) = args.n_sims {
        config.ipe.n_sims = v;
    }
    if let Some(v) = args.mh_steps {
        config.mh.steps = v;
        config.mh.burn_in = config.mh.burn_in.min(v / 2);
    }
    config.vision = args.vision;
    config.out_dir = Some(args.out_dir);
    let output = run(&config)?;
    print!("{}", output.table.to_tsv());
    Ok(())
}
