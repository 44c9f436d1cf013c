//! Experiment grids, episode batches and their aggregated reports.

mod obstacles;
mod plot;
mod report;
mod trajectory;

pub use obstacles::{
    default_obstacle_configs, run_obstacle_suite, ObstacleConfig, ObstacleConfigSummary, ObstacleReport, ObstacleResult, ObstacleSuite,
};
pub use plot::{emit_plots, emit_trajectory_plots, steps_chart, trajectory_chart, travel_chart};
pub use report::{
    compare_controllers, CategoryReport, Comparison, ComparisonRow, EpisodeSummary, SuiteReport, ThresholdStats, TRAVEL_METRIC,
};
pub use trajectory::{run_trajectory_suite, Shape, TrajectoryReport, TrajectoryResult, TrajectorySuite};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctrl::{run_episode, ControllerConfig, Mode};
use crate::dynamics::MotionPredictor;
use crate::rng::{derive_seed, stream_rng};
use crate::se2::ang_diff;
use crate::sim::{RandomizationRanges, SimConfig, Simulator, WorldState};
use crate::tasks::{TaskKind, TaskSpec, Thresholds};
use crate::Pose;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("reports cover different categories or seeds")]
    CategoryMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Initial-to-target distance and orientation-change ranges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub distance: [f64; 2],
    pub rotation_deg: [f64; 2],
}

impl Category {
    pub fn label(&self) -> String {
        format!(
            "{:.0}-{:.0}cm/{:.0}-{:.0}deg",
            100.0 * self.distance[0],
            100.0 * self.distance[1],
            self.rotation_deg[0],
            self.rotation_deg[1]
        )
    }
}

fn grid(distances: [[f64; 2]; 2]) -> Vec<Category> {
    let rotations = [[0.0, 30.0], [30.0, 60.0], [60.0, 90.0]];
    distances.iter().flat_map(|&distance| rotations.iter().map(move |&rotation_deg| Category { distance, rotation_deg })).collect()
}

/// 5-15 cm and 15-20 cm by three rotation bands.
pub fn short_grid() -> Vec<Category> {
    grid([[0.05, 0.15], [0.15, 0.20]])
}

/// 10-20 cm and 20-30 cm by three rotation bands.
pub fn long_grid() -> Vec<Category> {
    grid([[0.10, 0.20], [0.20, 0.30]])
}

/// 5 cm, 2 cm, 1 cm, and 3 mm with 2 degrees.
pub fn default_thresholds() -> Vec<Thresholds> {
    vec![
        Thresholds { position: 0.05, orientation: None },
        Thresholds { position: 0.02, orientation: None },
        Thresholds { position: 0.01, orientation: None },
        Thresholds { position: 0.003, orientation: Some(2f64.to_radians()) },
    ]
}

pub fn within(pose: &Pose, target: &Pose, t: &Thresholds) -> bool {
    pose.distance_to(target) < t.position && t.orientation.is_none_or(|o| ang_diff(pose.yaw(), target.yaw()) < o)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSuite {
    pub name: String,
    pub categories: Vec<Category>,
    pub cases_per_category: usize,
    pub repeats: usize,
    pub thresholds: Vec<Thresholds>,
    pub controller: ControllerConfig,
    /// `posing` or `posing_penalty`.
    pub objective: TaskKind,
    pub w_theta: f64,
    /// Episode stop condition.
    pub stop: Thresholds,
    pub max_steps: usize,
    pub master_seed: u64,
    pub randomization: RandomizationRanges,
    pub sim: SimConfig,
}

impl ExperimentSuite {
    /// Desk-scale short grid: 2 cases by 2 repeats per category, stopping at
    /// 1 cm within 60 steps.
    pub fn short(mode: Mode) -> Self {
        Self {
            name: format!("short-{}", mode_name(mode)),
            categories: short_grid(),
            cases_per_category: 2,
            repeats: 2,
            thresholds: default_thresholds(),
            controller: ControllerConfig::for_mode(mode),
            objective: TaskKind::Posing,
            w_theta: 0.025,
            stop: Thresholds { position: 0.01, orientation: None },
            max_steps: 60,
            master_seed: 0,
            randomization: RandomizationRanges::default(),
            sim: SimConfig::default(),
        }
    }

    pub fn long(mode: Mode) -> Self {
        Self { name: format!("long-{}", mode_name(mode)), categories: long_grid(), ..Self::short(mode) }
    }

    /// Ten cases by five repeats per category.
    pub fn full_scale(self) -> Self {
        Self { cases_per_category: 10, repeats: 5, ..self }
    }

    pub fn episode_count(&self) -> usize {
        self.categories.len() * self.cases_per_category * self.repeats
    }

    /// All episodes in report order.
    pub fn cases(&self) -> Vec<SuiteCase> {
        let mut out = Vec::with_capacity(self.episode_count());
        for (ci, cat) in self.categories.iter().enumerate() {
            for case in 0..self.cases_per_category {
                let mut rng = stream_rng(self.master_seed, &[ci as u64, case as u64]);
                let params = self.randomization.sample(&mut rng);
                let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let dist = rng.gen_range(cat.distance[0]..=cat.distance[1]);
                let bearing = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let turn = sign * rng.gen_range(cat.rotation_deg[0]..=cat.rotation_deg[1]).to_radians();
                let initial = WorldState { object_pose: Pose::new(0.0, 0.0, yaw), pusher_pos: [0.0, 0.0], params };
                let target = Pose::new(dist * bearing.cos(), dist * bearing.sin(), yaw + turn);
                for repeat in 0..self.repeats {
                    let seed = derive_seed(self.master_seed, &[ci as u64, case as u64, repeat as u64, 1]);
                    out.push(SuiteCase { category: ci, case, repeat, initial, target, seed });
                }
            }
        }
        out
    }

    pub fn task(&self, target: Pose) -> TaskSpec {
        let base = TaskSpec::posing(target, self.w_theta, self.stop.position);
        let spec = match self.objective {
            TaskKind::PosingPenalty => TaskSpec::posing_penalty(target, self.w_theta, self.stop.position),
            _ => base,
        };
        TaskSpec { thresholds: self.stop, ..spec }
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Basic => "basic",
        Mode::Improved => "improved",
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteCase {
    pub category: usize,
    pub case: usize,
    pub repeat: usize,
    pub initial: WorldState,
    pub target: Pose,
    pub seed: u64,
}

/// Environment variable holding the worker count for episode batches.
pub const WORKERS_ENV: &str = "PUSHLAB_WORKERS";

/// Maps `f` over `items` on a pool sized by [`WORKERS_ENV`], keeping order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    let workers = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match workers.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.par_iter().map(&f).collect(),
    }
}

/// Runs every episode of the suite. Episode errors become censored entries.
pub fn run_suite<P: MotionPredictor + ?Sized>(model: &P, window: usize, suite: &ExperimentSuite) -> SuiteReport {
    let sim = Simulator::new(suite.sim);
    let cases = suite.cases();
    let episodes = par_map(&cases, |c| {
        let task = suite.task(c.target);
        let started = std::time::Instant::now();
        let trace = run_episode(model, &sim, c.initial, &task, &suite.controller, suite.max_steps, c.seed, window);
        EpisodeSummary::new(c, trace, &suite.thresholds, started.elapsed().as_secs_f64())
    });
    SuiteReport::assemble(suite, episodes)
}
