//! Task objectives, obstacle geometry and stop conditions.

use serde::{Deserialize, Serialize};

use crate::dynamics::RolloutStep;
use crate::geom::{point_rect_distance, rect_distance, OrientedRect};
use crate::perimeter::SAMPLING_MARGIN;
use crate::se2::{ang_diff, pose_diff, Point2};
use crate::Pose;

/// Axis-aligned (in its own frame) rectangular obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub pose: Pose,
    pub half_extents: [f64; 2],
}

impl Obstacle {
    /// Square obstacle with side `side`.
    pub fn square(x: f64, y: f64, side: f64) -> Self {
        Self { pose: Pose::new(x, y, 0.0), half_extents: [0.5 * side, 0.5 * side] }
    }

    pub fn rect(&self) -> OrientedRect<f64> {
        OrientedRect::new(self.pose, self.half_extents)
    }
}

/// Orientation weight, possibly gated on the distance to the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightSchedule {
    Constant {
        weight: f64,
    },
    /// `weight` once the object is within `radius` of the target, else 0.
    NearTarget {
        weight: f64,
        radius: f64,
    },
}

impl WeightSchedule {
    pub fn at(&self, goal_distance: f64) -> f64 {
        match *self {
            WeightSchedule::Constant { weight } => weight,
            WeightSchedule::NearTarget { weight, radius } => {
                if goal_distance <= radius {
                    weight
                } else {
                    0.0
                }
            }
        }
    }
}

/// Travel-penalty weight: a quarter of the goal distance until the object
/// is within `cutoff` of the target, zero afterwards.
pub fn travel_weight(goal_distance: f64, cutoff: f64) -> f64 {
    if goal_distance > cutoff {
        0.25 * goal_distance
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Posing,
    PosingPenalty,
    Trajectory,
    Obstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceAggregate {
    /// Minimum over rollout steps.
    #[default]
    Min,
    /// Per-step terms summed.
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleCostParams {
    pub w_object: f64,
    pub w_pusher: f64,
    pub alpha: f64,
    /// The term is added only when a distance falls below this.
    pub gate: f64,
    #[serde(default)]
    pub aggregate: DistanceAggregate,
}

impl Default for ObstacleCostParams {
    fn default() -> Self {
        Self { w_object: 10.0, w_pusher: 10.0, alpha: 100.0 * std::f64::consts::LN_10, gate: 0.01, aggregate: DistanceAggregate::Min }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub position: f64,
    /// Also require this orientation error when set.
    pub orientation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub target: Pose,
    #[serde(default)]
    pub waypoints: Vec<Pose>,
    pub w_theta: WeightSchedule,
    /// Goal distance below which the travel penalty vanishes.
    #[serde(default = "default_phi_cutoff")]
    pub phi_cutoff: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub obstacle_cost: ObstacleCostParams,
    pub thresholds: Thresholds,
    /// Waypoint advance distance; default half the waypoint spacing.
    #[serde(default)]
    pub waypoint_proximity: Option<f64>,
}

fn default_phi_cutoff() -> f64 {
    0.02
}

impl TaskSpec {
    pub fn posing(target: Pose, w_theta: f64, position_threshold: f64) -> Self {
        Self {
            kind: TaskKind::Posing,
            target,
            waypoints: Vec::new(),
            w_theta: WeightSchedule::Constant { weight: w_theta },
            phi_cutoff: default_phi_cutoff(),
            obstacles: Vec::new(),
            obstacle_cost: ObstacleCostParams::default(),
            thresholds: Thresholds { position: position_threshold, orientation: None },
            waypoint_proximity: None,
        }
    }

    pub fn posing_penalty(target: Pose, w_theta: f64, position_threshold: f64) -> Self {
        Self { kind: TaskKind::PosingPenalty, ..Self::posing(target, w_theta, position_threshold) }
    }

    pub fn trajectory(waypoints: Vec<Pose>, w_theta: f64) -> Self {
        let target = *waypoints.last().expect("at least one waypoint");
        Self { kind: TaskKind::Trajectory, waypoints, ..Self::posing(target, w_theta, 0.0) }
    }

    /// Obstacle task: orientation weight 0.3 within 5 cm of the target.
    pub fn obstacle(target: Pose, obstacles: Vec<Obstacle>, position_threshold: f64) -> Self {
        Self {
            kind: TaskKind::Obstacle,
            obstacles,
            w_theta: WeightSchedule::NearTarget { weight: 0.3, radius: 0.05 },
            ..Self::posing(target, 0.0, position_threshold)
        }
    }

    /// Mean spacing between consecutive waypoints.
    pub fn waypoint_spacing(&self) -> f64 {
        let n = self.waypoints.len();
        if n < 2 {
            return 0.0;
        }
        self.waypoints.windows(2).map(|w| w[0].distance_to(&w[1])).sum::<f64>() / (n - 1) as f64
    }

    pub fn proximity(&self) -> f64 {
        self.waypoint_proximity.unwrap_or(0.5 * self.waypoint_spacing())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::from)
    }
}

/// Cost of the final rollout pose.
pub fn cost_posing(poses: &[Pose], target: &Pose, w_theta: f64) -> f64 {
    pose_diff(target, poses.last().expect("non-empty rollout"), w_theta)
}

/// [`cost_posing`] plus the travel penalty `phi * |r_current - r_sampled|^2`.
pub fn cost_posing_penalty(poses: &[Pose], target: &Pose, w_theta: f64, phi: f64, r_current: Point2<f64>, r_sampled: Point2<f64>) -> f64 {
    let t = (r_current[0] - r_sampled[0]).hypot(r_current[1] - r_sampled[1]);
    cost_posing(poses, target, w_theta) + phi * t * t
}

/// Cost of the first rollout pose against the next waypoint.
pub fn cost_trajectory(poses: &[Pose], waypoint: &Pose, w_theta: f64) -> f64 {
    pose_diff(waypoint, poses.first().expect("non-empty rollout"), w_theta)
}

/// The exponential obstacle term for given object and pusher clearances.
pub fn obstacle_term(d_object: f64, d_pusher: f64, p: &ObstacleCostParams) -> f64 {
    p.w_object * (-p.alpha * d_object).exp() + p.w_pusher * (-p.alpha * d_pusher).exp()
}

/// Obstacle penalty over a rollout: object footprints at `poses` and pusher
/// positions `pusher_path`. Zero unless a clearance falls below the gate.
pub fn cost_obstacle(
    poses: &[Pose],
    half_extents: [f64; 2],
    pusher_path: &[Point2<f64>],
    obstacles: &[Obstacle],
    p: &ObstacleCostParams,
) -> f64 {
    if obstacles.is_empty() {
        return 0.0;
    }
    let d_obj: Vec<f64> = poses
        .iter()
        .map(|pose| {
            let r = OrientedRect::new(*pose, half_extents);
            obstacles.iter().map(|o| rect_distance(&r, &o.rect())).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let d_push: Vec<f64> =
        pusher_path.iter().map(|q| obstacles.iter().map(|o| point_rect_distance(*q, &o.rect())).fold(f64::INFINITY, f64::min)).collect();
    let min_o = d_obj.iter().copied().fold(f64::INFINITY, f64::min);
    let min_p = d_push.iter().copied().fold(f64::INFINITY, f64::min);
    if min_o.min(min_p) >= p.gate {
        return 0.0;
    }
    match p.aggregate {
        DistanceAggregate::Min => obstacle_term(min_o, min_p, p),
        DistanceAggregate::Sum => {
            d_obj.iter().map(|&d| p.w_object * (-p.alpha * d).exp()).sum::<f64>()
                + d_push.iter().map(|&d| p.w_pusher * (-p.alpha * d).exp()).sum::<f64>()
        }
    }
}

/// World pusher positions visited by a rollout: each start point and the
/// nominal end of each push.
pub fn pusher_path(start: &Pose, steps: &[RolloutStep], poses: &[Pose]) -> Vec<Point2<f64>> {
    let mut out = Vec::with_capacity(2 * steps.len());
    let mut before = *start;
    for (s, after) in steps.iter().zip(poses) {
        let a = s.action;
        let mag = a.d_ro.norm();
        let end = if mag > 0.0 { a.ro + a.d_ro * ((mag + SAMPLING_MARGIN) / mag) } else { a.ro };
        out.push(before.transform_point(a.ro.to_array()));
        out.push(before.transform_point(end.to_array()));
        before = *after;
    }
    out
}

/// Everything an objective needs to score one candidate.
pub struct CostContext<'a> {
    pub start: &'a Pose,
    pub steps: &'a [RolloutStep],
    /// World poses after each rollout step.
    pub poses: &'a [Pose],
    pub half_extents: [f64; 2],
}

/// A task objective frozen at one control step.
#[derive(Clone, Debug)]
pub struct Objective {
    pub kind: TaskKind,
    pub target: Pose,
    pub w_theta: f64,
    pub phi: f64,
    pub r_current: Option<Point2<f64>>,
    pub obstacles: Vec<Obstacle>,
    pub obstacle_cost: ObstacleCostParams,
}

impl Objective {
    pub fn cost(&self, c: &CostContext) -> f64 {
        match self.kind {
            TaskKind::Posing => cost_posing(c.poses, &self.target, self.w_theta),
            TaskKind::PosingPenalty => match self.r_current {
                Some(rc) => {
                    let sampled = c.start.transform_point(c.steps[0].action.ro.to_array());
                    cost_posing_penalty(c.poses, &self.target, self.w_theta, self.phi, rc, sampled)
                }
                None => cost_posing(c.poses, &self.target, self.w_theta),
            },
            TaskKind::Trajectory => cost_trajectory(c.poses, &self.target, self.w_theta),
            TaskKind::Obstacle => {
                let path = pusher_path(c.start, c.steps, c.poses);
                cost_posing(c.poses, &self.target, self.w_theta)
                    + cost_obstacle(c.poses, c.half_extents, &path, &self.obstacles, &self.obstacle_cost)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopStatus {
    Continue,
    Success,
    Exhausted,
}

/// Episode progress: waypoint index and stop decisions.
#[derive(Clone, Debug)]
pub struct TaskTracker {
    pub spec: TaskSpec,
    waypoint: usize,
}

impl TaskTracker {
    pub fn new(spec: TaskSpec) -> Self {
        Self { spec, waypoint: 0 }
    }

    pub fn waypoint_index(&self) -> usize {
        self.waypoint
    }

    /// Pose the controller currently steers toward.
    pub fn current_target(&self) -> Pose {
        match self.spec.kind {
            TaskKind::Trajectory => self.spec.waypoints[self.waypoint.min(self.spec.waypoints.len() - 1)],
            _ => self.spec.target,
        }
    }

    fn reached(&self, pose: &Pose) -> bool {
        let t = &self.spec.thresholds;
        pose.distance_to(&self.spec.target) < t.position && t.orientation.is_none_or(|o| ang_diff(pose.yaw(), self.spec.target.yaw()) < o)
    }

    /// Advances waypoints past `pose` and decides whether to stop before
    /// executing step `step`.
    pub fn update(&mut self, pose: &Pose, step: usize, max_steps: usize) -> StopStatus {
        let done = match self.spec.kind {
            TaskKind::Trajectory => {
                let prox = self.spec.proximity();
                while self.waypoint < self.spec.waypoints.len() && pose.distance_to(&self.spec.waypoints[self.waypoint]) < prox {
                    self.waypoint += 1;
                }
                self.waypoint >= self.spec.waypoints.len()
            }
            _ => self.reached(pose),
        };
        if done {
            StopStatus::Success
        } else if step >= max_steps {
            StopStatus::Exhausted
        } else {
            StopStatus::Continue
        }
    }

    /// Objective for the next control step given the current pose and the
    /// pusher position left by the previous push.
    pub fn objective(&self, pose: &Pose, r_current: Option<Point2<f64>>) -> Objective {
        let target = self.current_target();
        let goal = pose.distance_to(&self.spec.target);
        Objective {
            kind: self.spec.kind,
            target,
            w_theta: self.spec.w_theta.at(goal),
            phi: travel_weight(goal, self.spec.phi_cutoff),
            r_current,
            obstacles: self.spec.obstacles.clone(),
            obstacle_cost: self.spec.obstacle_cost,
        }
    }
}

/// Dense waypoints on a circle through `start`, counter-clockwise, keeping
/// the start orientation.
pub fn circle_waypoints(start: &Pose, radius: f64, spacing: f64) -> Vec<Pose> {
    let n = ((std::f64::consts::TAU * radius) / spacing).ceil().max(3.0) as usize;
    // centre to the left of the start heading in world x
    let (cx, cy) = (start.x, start.y + radius);
    (1..=n)
        .map(|k| {
            let a = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / n as f64;
            Pose::new(cx + radius * a.cos(), cy + radius * a.sin(), start.yaw())
        })
        .collect()
}

/// Dense waypoints along an L: `side` along +x, then `side` along +y.
pub fn l_waypoints(start: &Pose, side: f64, spacing: f64) -> Vec<Pose> {
    let n = (side / spacing).ceil().max(1.0) as usize;
    let step = side / n as f64;
    let leg1 = (1..=n).map(|k| Pose::new(start.x + step * k as f64, start.y, start.yaw()));
    let leg2 = (1..=n).map(|k| Pose::new(start.x + side, start.y + step * k as f64, start.yaw()));
    leg1.chain(leg2).collect()
}

/// Distance from `p` to the polyline through `path` (prefixed by `origin`).
pub fn path_distance(p: Point2<f64>, origin: Point2<f64>, path: &[Pose]) -> f64 {
    let mut prev = origin;
    let mut best = f64::INFINITY;
    for w in path {
        let q = [w.x, w.y];
        let d = [q[0] - prev[0], q[1] - prev[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 { (((p[0] - prev[0]) * d[0] + (p[1] - prev[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((p[0] - prev[0] - t * d[0]).hypot(p[1] - prev[1] - t * d[1]));
        prev = q;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn posing_examples() {
        let t = Pose::new(0.3, 0.1, 0.5);
        assert_eq!(cost_posing(&[t], &t, 0.025), 0.0);
        let p = Pose::new(0.31, 0.1, 0.5);
        assert!((cost_posing(&[p], &t, 0.025) - 1e-4).abs() < 1e-15);
        let closer = Pose::new(0.305, 0.1, 0.5);
        assert!(cost_posing(&[closer], &t, 0.025) < cost_posing(&[p], &t, 0.025));
    }

    #[test]
    fn penalty_examples() {
        let t = Pose::new(0.0, 0.0, 0.0);
        let p = [Pose::new(0.2, 0.0, 0.0)];
        let base = cost_posing(&p, &t, 0.0);
        assert_eq!(cost_posing_penalty(&p, &t, 0.0, 0.05, [0.1, 0.1], [0.1, 0.1]), base);
        assert_eq!(travel_weight(0.01, 0.02), 0.0);
        let phi = travel_weight(0.2, 0.02);
        assert!((phi - 0.05).abs() < 1e-15);
        let pen = cost_posing_penalty(&p, &t, 0.0, phi, [0.0, 0.0], [0.1, 0.0]) - base;
        assert!((pen - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn trajectory_examples() {
        let w = Pose::new(0.02, 0.0, 1.0);
        assert_eq!(cost_trajectory(&[w, Pose::identity()], &w, 0.01), 0.0);
        let rotated = Pose::new(0.02, 0.0, -1.0);
        assert_eq!(cost_trajectory(&[rotated], &w, 0.0), 0.0);
        let near = Pose::new(0.015, 0.0, 0.0);
        let far = Pose::new(0.0, 0.0, 0.0);
        assert!(cost_trajectory(&[near], &w, 0.0) < cost_trajectory(&[far], &w, 0.0));
    }

    #[test]
    fn obstacle_term_examples() {
        let p = ObstacleCostParams::default();
        assert!((obstacle_term(0.01, 0.01, &p) - 2.0).abs() < 1e-12);
        assert!((obstacle_term(0.0, 10.0, &p) - 10.0).abs() < 1e-12);
        // clearances of 2 cm keep the gate closed
        let obstacles = [Obstacle::square(0.0, 0.0, 0.03)];
        let pose = Pose::new(0.015 + 0.05 + 0.02, 0.0, 0.0);
        let pusher = [0.2, 0.0];
        assert_eq!(cost_obstacle(&[pose], [0.05, 0.05], &[pusher], &obstacles, &p), 0.0);
        let touching = Pose::new(0.015 + 0.05 + 0.005, 0.0, 0.0);
        let c = cost_obstacle(&[touching], [0.05, 0.05], &[pusher], &obstacles, &p);
        assert!((c - 10.0 * (-p.alpha * 0.005f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn stop_conditions() {
        let spec = TaskSpec::posing(Pose::new(0.1, 0.0, 0.0), 0.0, 0.01);
        let mut tr = TaskTracker::new(spec);
        assert_eq!(tr.update(&Pose::new(0.1, 0.0, 2.0), 0, 10), StopStatus::Success);
        assert_eq!(tr.update(&Pose::new(0.091, 0.0, 0.0), 3, 10), StopStatus::Success);
        assert_eq!(tr.update(&Pose::new(0.0, 0.0, 0.0), 10, 10), StopStatus::Exhausted);
        assert_eq!(tr.update(&Pose::new(0.0, 0.0, 0.0), 9, 10), StopStatus::Continue);
    }

    #[test]
    fn waypoints_advance_monotonically() {
        let start = Pose::identity();
        let wps = l_waypoints(&start, 0.1, 0.02);
        assert_eq!(wps.len(), 10);
        let mut tr = TaskTracker::new(TaskSpec::trajectory(wps.clone(), 0.0));
        assert!((tr.spec.proximity() - 0.01).abs() < 1e-12);
        let mut last = 0;
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            let p = if s < 0.5 { Pose::new(0.2 * s, 0.0, 0.0) } else { Pose::new(0.1, 0.2 * (s - 0.5), 0.0) };
            let st = tr.update(&p, k, 1000);
            assert!(tr.waypoint_index() >= last);
            last = tr.waypoint_index();
            if k == 100 {
                assert_eq!(st, StopStatus::Success);
            }
        }
        let c = circle_waypoints(&start, 0.2, 0.02);
        assert!(c.windows(2).all(|w| w[0].distance_to(&w[1]) < 0.021));
        assert!(c.last().unwrap().distance_to(&start) < 1e-12);
        assert!((path_distance([0.05, 0.01], [0.0, 0.0], &wps) - 0.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn obstacle_terms_decrease(d in 0.0f64..0.05, e in 1e-4f64..0.01) {
            let p = ObstacleCostParams::default();
            prop_assert!(obstacle_term(d + e, 1.0, &p) < obstacle_term(d, 1.0, &p));
            prop_assert!(obstacle_term(1.0, d + e, &p) < obstacle_term(1.0, d, &p));
        }

        #[test]
        fn penalty_never_below_plain(g in 0.0f64..0.5, rx in -0.3f64..0.3, ry in -0.3f64..0.3) {
            let t = Pose::identity();
            let p = [Pose::new(g, 0.0, 0.0)];
            let phi = travel_weight(g, 0.02);
            let a = cost_posing_penalty(&p, &t, 0.1, phi, [0.0, 0.0], [rx, ry]);
            let b = cost_posing(&p, &t, 0.1);
            prop_assert!(a >= b);
            prop_assert_eq!(a == b, phi == 0.0 || (rx == 0.0 && ry == 0.0));
        }
    }
}
