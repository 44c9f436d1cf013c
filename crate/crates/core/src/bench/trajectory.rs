use serde::{Deserialize, Serialize};

use super::par_map;
use crate::ctrl::{run_episode, ControllerConfig, EpisodeOutcome};
use crate::dynamics::MotionPredictor;
use crate::rng::{derive_seed, stream_rng};
use crate::se2::Point2;
use crate::sim::{RandomizationRanges, SimConfig, Simulator, WorldState};
use crate::tasks::{circle_waypoints, l_waypoints, path_distance, TaskSpec};
use crate::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    Circle { radius: f64 },
    L { side: f64 },
}

impl Shape {
    pub fn waypoints(&self, start: &Pose, spacing: f64) -> Vec<Pose> {
        match *self {
            Shape::Circle { radius } => circle_waypoints(start, radius, spacing),
            Shape::L { side } => l_waypoints(start, side, spacing),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Shape::Circle { radius } => format!("circle-r{:.0}cm", 100.0 * radius),
            Shape::L { side } => format!("l-{:.0}cm", 100.0 * side),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySuite {
    pub shapes: Vec<Shape>,
    pub w_thetas: Vec<f64>,
    pub spacing: f64,
    pub controller: ControllerConfig,
    pub repeats: usize,
    /// Step budget per waypoint.
    pub steps_per_waypoint: usize,
    pub master_seed: u64,
    pub randomization: RandomizationRanges,
    pub sim: SimConfig,
}

impl Default for TrajectorySuite {
    /// Circles of radius 10/20/30 cm and L paths of side 10/20/30 cm, with
    /// orientation weights 0 and 0.01, 100 samples and a one-step horizon.
    fn default() -> Self {
        let sizes = [0.1, 0.2, 0.3];
        let shapes = sizes.iter().map(|&radius| Shape::Circle { radius }).chain(sizes.iter().map(|&side| Shape::L { side })).collect();
        Self {
            shapes,
            w_thetas: vec![0.0, 0.01],
            spacing: 0.02,
            controller: ControllerConfig { samples: 100, horizon: 1, ..ControllerConfig::basic() },
            repeats: 1,
            steps_per_waypoint: 3,
            master_seed: 0,
            randomization: RandomizationRanges::default(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub shape: Shape,
    pub w_theta: f64,
    pub repeat: usize,
    pub completed: bool,
    pub steps: usize,
    /// Mean distance from the object centre after each push to the path.
    pub mean_path_error: f64,
    pub max_path_error: f64,
    pub mean_push_length: f64,
    pub waypoints: Vec<Point2<f64>>,
    pub path: Vec<Point2<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub master_seed: u64,
    pub results: Vec<TrajectoryResult>,
}

impl TrajectoryReport {
    pub fn find(&self, shape: Shape, w_theta: f64) -> impl Iterator<Item = &TrajectoryResult> {
        self.results.iter().filter(move |r| r.shape == shape && r.w_theta == w_theta)
    }
}

pub fn run_trajectory_suite<P: MotionPredictor + ?Sized>(model: &P, window: usize, suite: &TrajectorySuite) -> TrajectoryReport {
    let sim = Simulator::new(suite.sim);
    let mut jobs = Vec::new();
    for (si, &shape) in suite.shapes.iter().enumerate() {
        for (wi, &w_theta) in suite.w_thetas.iter().enumerate() {
            for repeat in 0..suite.repeats {
                jobs.push((si, shape, wi, w_theta, repeat));
            }
        }
    }
    let results = par_map(&jobs, |&(si, shape, wi, w_theta, repeat)| {
        let params = suite.randomization.sample(&mut stream_rng(suite.master_seed, &[si as u64, repeat as u64]));
        let start = Pose::identity();
        let waypoints = shape.waypoints(&start, suite.spacing);
        let task = TaskSpec::trajectory(waypoints.clone(), w_theta);
        let initial = WorldState { object_pose: start, pusher_pos: [0.0, 0.0], params };
        let seed = derive_seed(suite.master_seed, &[si as u64, wi as u64, repeat as u64, 1]);
        let wp: Vec<Point2<f64>> = waypoints.iter().map(|p| [p.x, p.y]).collect();
        let max_steps = suite.steps_per_waypoint * waypoints.len();
        match run_episode(model, &sim, initial, &task, &suite.controller, max_steps, seed, window) {
            Ok(trace) => {
                let errors: Vec<f64> =
                    trace.steps.iter().map(|s| path_distance([s.pose_after.x, s.pose_after.y], [start.x, start.y], &waypoints)).collect();
                let n = errors.len().max(1) as f64;
                TrajectoryResult {
                    shape,
                    w_theta,
                    repeat,
                    completed: trace.outcome() == EpisodeOutcome::Success,
                    steps: trace.steps.len(),
                    mean_path_error: errors.iter().sum::<f64>() / n,
                    max_path_error: errors.iter().copied().fold(0.0, f64::max),
                    mean_push_length: trace.steps.iter().map(|s| s.action.magnitude()).sum::<f64>() / n,
                    waypoints: wp,
                    path: trace.poses().map(|p| [p.x, p.y]).collect(),
                    error: None,
                }
            }
            Err(e) => TrajectoryResult {
                shape,
                w_theta,
                repeat,
                completed: false,
                steps: 0,
                mean_path_error: 0.0,
                max_path_error: 0.0,
                mean_push_length: 0.0,
                waypoints: wp,
                path: vec![[start.x, start.y]],
                error: Some(e.to_string()),
            },
        }
    });
    TrajectoryReport { master_seed: suite.master_seed, results }
}
