use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pushlab::bench::{self, ExperimentSuite, ObstacleSuite, SuiteReport, TrajectoryReport, TrajectorySuite};
use pushlab::ctrl::{run_episode, ControllerConfig, Mode};
use pushlab::data::{DataConfig, Dataset, SizeClass, Split};
use pushlab::dynamics::{evaluate, train, Architecture, DynamicsModel, TrainConfig};
use pushlab::sim::{ObjectParams, RandomizationRanges, Simulator, WorldState};
use pushlab::tasks::{TaskKind, TaskSpec};
use pushlab::Pose;

#[derive(Parser)]
#[command(name = "pushlab", version, about = "Learned planar pushing: data, models, controllers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Short,
    Long,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Posing,
    PosingPenalty,
}

#[derive(Clone, Copy, ValueEnum)]
enum Subset {
    All,
    Small,
    Big,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-push dataset.
    GenData {
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        pushes: usize,
        #[arg(long)]
        mag_min: Option<f64>,
        #[arg(long)]
        mag_max: Option<f64>,
        #[arg(long, default_value_t = 90.0)]
        cone_degrees: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the wide magnitude range of the improved controller.
        #[arg(long)]
        improved: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a dynamics model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        w: usize,
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gru")]
        arch: Architecture,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
        /// Skip the orientation head.
        #[arg(long)]
        no_rotation: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prediction errors of a checkpoint on the test split.
    EvalModel {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Subset::All)]
        subset: Subset,
    },
    /// Run one closed-loop episode and write its trace.
    RunEpisode {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Task JSON file.
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value = "basic")]
        mode: Mode,
        /// Controller config JSON, overriding the mode defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial object pose `x,y,yaw`.
        #[arg(long, default_value = "0,0,0")]
        start: String,
        /// Randomize the object with this seed instead of using nominal parameters.
        #[arg(long)]
        object_seed: Option<u64>,
        #[arg(long, default_value_t = 60)]
        max_steps: usize,
        #[arg(long)]
        trace_out: PathBuf,
    },
    /// Run a posing suite.
    RunSuite {
        /// Master config JSON (`checkpoint` plus `suite`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Grid::Short)]
        grid: Grid,
        #[arg(long, default_value = "basic")]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Objective::Posing)]
        objective: Objective,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ten cases by five repeats per category.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the trajectory-following suite.
    RunTraj {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the obstacle-avoidance suite.
    RunObstacles {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Ratio table between a basic and an improved suite report.
    Compare {
        #[arg(long)]
        basic: PathBuf,
        #[arg(long)]
        improved: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG charts from suite or trajectory reports.
    Plot {
        /// Suite report JSON; repeat to overlay several.
        #[arg(long)]
        report: Vec<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Master config for the experiment subcommands.
#[derive(Serialize, Deserialize)]
struct MasterConfig {
    checkpoint: PathBuf,
    #[serde(default)]
    suite: Option<ExperimentSuite>,
    #[serde(default)]
    trajectory: Option<TrajectorySuite>,
    #[serde(default)]
    obstacles: Option<ObstacleSuite>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<DynamicsModel> {
    DynamicsModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Resolves the checkpoint and optional config section for an experiment.
fn master(config: &Option<PathBuf>, checkpoint: &Option<PathBuf>) -> Result<(DynamicsModel, Option<MasterConfig>)> {
    let cfg: Option<MasterConfig> = config.as_deref().map(read_json).transpose()?;
    let path = match (checkpoint, &cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.checkpoint.clone(),
        (None, None) => bail!("either --config or --checkpoint is required"),
    };
    Ok((load_model(&path)?, cfg))
}

fn parse_pose(s: &str) -> Result<Pose> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().context("pose must be `x,y,yaw`")?;
    match v[..] {
        [x, y, yaw] => Ok(Pose::new(x, y, yaw)),
        _ => bail!("pose must have three components"),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData { episodes, pushes, mag_min, mag_max, cone_degrees, seed, improved, out } => {
            let base = if improved { DataConfig::improved() } else { DataConfig::default() };
            let magnitude_range = [mag_min.unwrap_or(base.magnitude_range[0]), mag_max.unwrap_or(base.magnitude_range[1])];
            let cfg = DataConfig { episodes, pushes_per_episode: pushes, magnitude_range, cone_degrees, master_seed: seed, ..base };
            let ds = pushlab::data::generate_dataset(&cfg)?;
            ds.validate()?;
            ds.save(&out)?;
            eprintln!("wrote {} episodes to {}", ds.episodes.len(), out.display());
        }
        Command::Train { data, w, epochs, seed, arch, hidden, batch_size, no_rotation, out } => {
            let ds = Dataset::load(&data)?;
            let cfg = TrainConfig {
                architecture: arch,
                window: w,
                hidden,
                epochs,
                batch_size,
                seed,
                rotation: !no_rotation,
                ..TrainConfig::default()
            };
            let (model, log) = train(&ds, &cfg)?;
            for e in &log.epochs {
                eprintln!(
                    "epoch {:3} lr {:.2e} train {:.4e} val {:.4e} rot {:.4} / {:.4}",
                    e.epoch, e.lr, e.train_translation, e.val_translation, e.train_rotation, e.val_rotation
                );
            }
            model.save(&out, serde_json::json!({ "train": cfg, "data": data, "best_translation_epoch": log.best_translation_epoch, "best_rotation_epoch": log.best_rotation_epoch }))?;
        }
        Command::EvalModel { checkpoint, data, subset } => {
            let model = load_model(&checkpoint)?;
            let ds = Dataset::load(&data)?;
            let samples = ds.windows(Some(Split::Test), model.window(), true);
            let class = match subset {
                Subset::All => None,
                Subset::Small => Some(SizeClass::Small),
                Subset::Big => Some(SizeClass::Big),
            };
            let report = evaluate(&model, &samples, class)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::RunEpisode { checkpoint, task, mode, config, seed, start, object_seed, max_steps, trace_out } => {
            let model = load_model(&checkpoint)?;
            let spec = TaskSpec::load(&task).with_context(|| format!("reading task {}", task.display()))?;
            let cfg: ControllerConfig = match config {
                Some(p) => read_json(&p)?,
                None => ControllerConfig::for_mode(mode),
            };
            let params = match object_seed {
                Some(s) => RandomizationRanges::default().sample(&mut pushlab::rng::stream_rng(s, &[])),
                None => ObjectParams::midpoint(),
            };
            let initial = WorldState { object_pose: parse_pose(&start)?, pusher_pos: [0.0, 0.0], params };
            let trace = run_episode(&model, &Simulator::default(), initial, &spec, &cfg, max_steps, seed, model.window())?;
            trace.save(&trace_out)?;
            eprintln!("{:?} after {} pushes, travel {:.3} m", trace.outcome(), trace.steps.len(), trace.total_travel());
        }
        Command::RunSuite { config, checkpoint, grid, mode, objective, seed, full_scale, out_dir } => {
            let (model, cfg) = master(&config, &checkpoint)?;
            let suite = match cfg.and_then(|c| c.suite) {
                Some(s) => s,
                None => {
                    let base = match grid {
                        Grid::Short => ExperimentSuite::short(mode),
                        Grid::Long => ExperimentSuite::long(mode),
                    };
                    let objective = match objective {
                        Objective::Posing => TaskKind::Posing,
                        Objective::PosingPenalty => TaskKind::PosingPenalty,
                    };
                    let s = ExperimentSuite { objective, master_seed: seed, ..base };
                    if full_scale {
                        s.full_scale()
                    } else {
                        s
                    }
                }
            };
            let report = bench::run_suite(&model, model.window(), &suite);
            report.save(&out_dir, &suite.name)?;
            for (i, c) in report.categories.iter().enumerate() {
                let med: Vec<String> = c.thresholds.iter().map(|t| t.median_steps.map_or("-".into(), |m| format!("{m:.1}"))).collect();
                eprintln!("category {} {}: median steps {} travel {:.3}", i + 1, c.category.label(), med.join(" / "), c.travel_median);
            }
        }
        Command::RunTraj { config, checkpoint, seed, out_dir } => {
            let (model, cfg) = master(&config, &checkpoint)?;
            let suite = cfg.and_then(|c| c.trajectory).unwrap_or(TrajectorySuite { master_seed: seed, ..TrajectorySuite::default() });
            let report = bench::run_trajectory_suite(&model, model.window(), &suite);
            write_json(&out_dir.join("trajectory.json"), &report)?;
            for r in &report.results {
                eprintln!(
                    "{} w={} error {:.2} mm push {:.1} mm",
                    r.shape.label(),
                    r.w_theta,
                    1000.0 * r.mean_path_error,
                    1000.0 * r.mean_push_length
                );
            }
        }
        Command::RunObstacles { config, checkpoint, seed, out_dir } => {
            let (model, cfg) = master(&config, &checkpoint)?;
            let suite = cfg.and_then(|c| c.obstacles).unwrap_or(ObstacleSuite { master_seed: seed, ..ObstacleSuite::default() });
            let report = bench::run_obstacle_suite(&model, model.window(), &suite);
            write_json(&out_dir.join("obstacles.json"), &report)?;
            for s in &report.summaries {
                eprintln!(
                    "{}: success {:.2} collisions {}{}",
                    s.config,
                    s.success_rate,
                    s.collisions,
                    if s.expected_failure { " (expected failure)" } else { "" }
                );
            }
        }
        Command::Compare { basic, improved, out } => {
            let cmp = bench::compare_controllers(&SuiteReport::load(&basic)?, &SuiteReport::load(&improved)?)?;
            let text = serde_json::to_string_pretty(&cmp)?;
            match out {
                Some(p) => write_json(&p, &cmp)?,
                None => println!("{text}"),
            }
        }
        Command::Plot { report, trajectory, out_dir } => {
            let reports: Vec<SuiteReport> = report.iter().map(|p| SuiteReport::load(p)).collect::<Result<_, _>>()?;
            std::fs::create_dir_all(&out_dir)?;
            if !reports.is_empty() {
                let named: Vec<(&str, &SuiteReport)> = reports.iter().map(|r| (r.name.as_str(), r)).collect();
                std::fs::write(out_dir.join("steps.svg"), bench::steps_chart(&named))?;
                std::fs::write(out_dir.join("travel.svg"), bench::travel_chart(&named))?;
            }
            if let Some(t) = trajectory {
                let rep: TrajectoryReport = read_json(&t)?;
                bench::emit_trajectory_plots(&rep, &out_dir)?;
            }
        }
    }
    Ok(())
}
