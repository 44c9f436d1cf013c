//! Closed-loop episodes against the simulator and their JSON-Lines traces.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{select_action, ControllerConfig, CtrlError, StepInput};
use crate::dynamics::{HistoryContext, MotionPredictor, PushAction};
use crate::geom::{box_distance, point_rect_distance, rect_distance, OrientedRect};
use crate::se2::{to_object_frame, Point2};
use crate::sim::{PushCommand, Simulator, WorldState, PUSHER_RADIUS};
use crate::tasks::{Obstacle, StopStatus, TaskSpec, TaskTracker};
use crate::{Motion, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Success,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub pose_before: Pose,
    pub pose_after: Pose,
    pub action: PushAction,
    pub predicted: Motion,
    pub realized: Motion,
    /// Distance from the previous pusher rest position to this push's start.
    pub travel: f64,
    pub fallback: bool,
    pub restarts: usize,
    pub waypoint_index: usize,
    pub best_cost: f64,
    /// Smallest object/obstacle and pusher/obstacle clearance during the push.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance: Option<f64>,
}

impl TraceStep {
    /// Translation error between predicted and realized motion.
    pub fn prediction_error(&self) -> f64 {
        (self.predicted.dx - self.realized.dx).hypot(self.predicted.dy - self.realized.dy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub initial: WorldState,
    pub task: TaskSpec,
    pub controller: ControllerConfig,
    pub max_steps: usize,
    pub seed: u64,
    pub outcome: EpisodeOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn outcome(&self) -> EpisodeOutcome {
        self.header.outcome
    }

    /// Object pose after `k` pushes (`k = 0` is the initial pose).
    pub fn pose_at(&self, k: usize) -> Pose {
        if k == 0 {
            self.header.initial.object_pose
        } else {
            self.steps[k - 1].pose_after
        }
    }

    pub fn poses(&self) -> impl Iterator<Item = Pose> + '_ {
        (0..=self.steps.len()).map(|k| self.pose_at(k))
    }

    pub fn final_pose(&self) -> Pose {
        self.pose_at(self.steps.len())
    }

    pub fn total_travel(&self) -> f64 {
        self.steps.iter().map(|s| s.travel).sum()
    }

    pub fn min_clearance(&self) -> Option<f64> {
        self.steps.iter().filter_map(|s| s.clearance).reduce(f64::min)
    }

    /// First push count after which `pred` holds for the object pose.
    pub fn first_step_where(&self, pred: impl Fn(&Pose) -> bool) -> Option<usize> {
        self.poses().position(|p| pred(&p))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w)?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> std::io::Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "empty trace"))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        let mut steps = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                steps.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { header, steps })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn lerp_pose(a: &Pose, b: &Pose, t: f64) -> Pose {
    let dyaw = crate::scalar::wrap_angle(b.yaw() - a.yaw());
    Pose::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.yaw() + t * dyaw)
}

/// Smallest clearance to any obstacle over a push, sampled along the object
/// and pusher paths.
fn push_clearance(obstacles: &[Obstacle], half_extents: [f64; 2], before: &Pose, after: &Pose, pusher: (Point2<f64>, Point2<f64>)) -> f64 {
    const SAMPLES: usize = 8;
    let mut best = f64::INFINITY;
    for k in 0..=SAMPLES {
        let t = k as f64 / SAMPLES as f64;
        let body = OrientedRect::new(lerp_pose(before, after, t), half_extents);
        let q = [pusher.0[0] + t * (pusher.1[0] - pusher.0[0]), pusher.0[1] + t * (pusher.1[1] - pusher.0[1])];
        for o in obstacles {
            let r = o.rect();
            best = best.min(rect_distance(&body, &r)).min(point_rect_distance(q, &r) - PUSHER_RADIUS);
        }
    }
    best
}

/// Runs the select / execute / observe loop until the task stops.
pub fn run_episode<P: MotionPredictor + ?Sized>(
    model: &P,
    sim: &Simulator,
    initial: WorldState,
    task: &TaskSpec,
    cfg: &ControllerConfig,
    max_steps: usize,
    seed: u64,
    window: usize,
) -> Result<EpisodeTrace, CtrlError> {
    cfg.validate()?;
    let dims = initial.params.dims();
    let mut tracker = TaskTracker::new(task.clone());
    let mut history = HistoryContext::new(window);
    let mut state = initial;
    let mut rest: Option<Point2<f64>> = None;
    let mut steps = Vec::new();
    let outcome = loop {
        let pose = state.object_pose;
        match tracker.update(&pose, steps.len(), max_steps) {
            StopStatus::Success => break EpisodeOutcome::Success,
            StopStatus::Exhausted => break EpisodeOutcome::Exhausted,
            StopStatus::Continue => {}
        }
        let objective = tracker.objective(&pose, rest);
        let clearance = rest.map(|r| {
            let q = to_object_frame(&pose, r);
            let [hx, hy] = dims.half_extents();
            box_distance([q.u, q.v], hx, hy) - PUSHER_RADIUS
        });
        let input = StepInput {
            pose,
            history: &history,
            dims,
            goal_distance: pose.distance_to(&tracker.current_target()),
            pusher_clearance: clearance,
            step: steps.len(),
            seed,
        };
        let sel = select_action(model, &input, &objective, cfg)?;
        let out = sim.step_push(&state, &PushCommand { start: sel.action.ro, delta: sel.action.d_ro })?;
        let travel = rest.map_or(0.0, |r| (r[0] - out.pusher_start[0]).hypot(r[1] - out.pusher_start[1]));
        let clearance = (!task.obstacles.is_empty()).then(|| {
            push_clearance(&task.obstacles, dims.half_extents(), &pose, &out.state.object_pose, (out.pusher_start, out.state.pusher_pos))
        });
        steps.push(TraceStep {
            step: steps.len(),
            pose_before: pose,
            pose_after: out.state.object_pose,
            action: sel.action,
            predicted: sel.predicted,
            realized: out.motion,
            travel,
            fallback: sel.fallback,
            restarts: sel.restarts,
            waypoint_index: tracker.waypoint_index(),
            best_cost: sel.best_cost,
            clearance,
        });
        history.advance(sel.action.ro, sel.action.d_ro, out.motion);
        rest = Some(out.state.pusher_pos);
        state = out.state;
    };
    Ok(EpisodeTrace { header: TraceHeader { initial, task: task.clone(), controller: cfg.clone(), max_steps, seed, outcome }, steps })
}
