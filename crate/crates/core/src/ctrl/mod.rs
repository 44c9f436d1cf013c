//! Sampling-based action selection on top of learned rollouts: a blended
//! (softmin-weighted) controller and a greedy directional one.

mod episode;
#[cfg(test)]
mod tests;

pub use episode::{run_episode, EpisodeOutcome, EpisodeTrace, TraceStep};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate, rollout_batch, HistoryContext, MotionPredictor, PushAction, RoMode, RolloutStep};
use crate::geom::box_distance;
use crate::net::NetError;
use crate::perimeter::{clamp_into_cone, cone_direction, Face, Perimeter};
use crate::rng::stream_rng;
use crate::sim::{ObjectDims, SimError, PUSHER_RADIUS};
use crate::tasks::CostContext;
use crate::{BodyPoint, Motion, Pose};

#[derive(Debug, Error)]
pub enum CtrlError {
    #[error("sample count {0} is not divisible by 4")]
    IndivisibleN(usize),
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Basic,
    Improved,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "basic" => Ok(Mode::Basic),
            "improved" => Ok(Mode::Improved),
            _ => Err(format!("unknown controller mode `{s}`")),
        }
    }
}

/// Interval for the first push direction of an improved-mode sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDirection {
    /// Within 5 degrees of the inward normal.
    Narrow,
    /// Within 45 degrees of the inward normal.
    Wide,
}

impl InitialDirection {
    pub fn half_angle(self) -> f64 {
        match self {
            InitialDirection::Narrow => 5f64.to_radians(),
            InitialDirection::Wide => 45f64.to_radians(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Temperature {
    /// `fraction * (max cost - min cost)` at every control step.
    Adaptive {
        fraction: f64,
    },
    Fixed {
        lambda: f64,
    },
}

impl Temperature {
    pub fn lambda(&self, costs: &[f64]) -> f64 {
        match *self {
            Temperature::Fixed { lambda } => lambda,
            Temperature::Adaptive { fraction } => {
                let (lo, hi) = min_max(costs);
                fraction * (hi - lo)
            }
        }
    }
}

/// What switches the blended controller to short pushes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageTrigger {
    /// Object within `stage2_radius` of the target.
    TargetDistance,
    /// Pusher resting within `stage2_radius` of the object surface.
    ObjectDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub mode: Mode,
    pub samples: usize,
    pub horizon: usize,
    pub temperature: Temperature,
    pub stage_trigger: StageTrigger,
    pub stage2_radius: f64,
    pub stage1_range: [f64; 2],
    pub stage2_range: [f64; 2],
    pub improved_range: [f64; 2],
    pub restart_limit: usize,
    pub initial_dir: InitialDirection,
    /// Per-step direction change bound in degrees.
    pub per_step_jitter_deg: f64,
    /// Full aperture of the push-direction cone in degrees.
    pub cone_degrees: f64,
    pub ro_mode: RoMode,
}

impl ControllerConfig {
    pub fn basic() -> Self {
        Self {
            mode: Mode::Basic,
            samples: 20,
            horizon: 5,
            temperature: Temperature::Adaptive { fraction: 0.2 },
            stage_trigger: StageTrigger::TargetDistance,
            stage2_radius: 0.01,
            stage1_range: [0.008, 0.03],
            stage2_range: [0.001, 0.008],
            improved_range: [0.003, 0.05],
            restart_limit: 20,
            initial_dir: InitialDirection::Narrow,
            per_step_jitter_deg: 5.0,
            cone_degrees: 90.0,
            ro_mode: RoMode::Tracked,
        }
    }

    pub fn improved() -> Self {
        Self { mode: Mode::Improved, samples: 100, horizon: 3, ..Self::basic() }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Basic => Self::basic(),
            Mode::Improved => Self::improved(),
        }
    }

    pub fn half_cone(&self) -> f64 {
        0.5 * self.cone_degrees.to_radians()
    }

    pub fn validate(&self) -> Result<(), CtrlError> {
        let bad = |m: &str| Err(CtrlError::InvalidConfig(m.to_owned()));
        for (name, r) in [("stage1_range", self.stage1_range), ("stage2_range", self.stage2_range), ("improved_range", self.improved_range)]
        {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return bad(&format!("{name} must be positive and ordered"));
            }
        }
        if self.samples == 0 || self.horizon == 0 {
            return bad("samples and horizon must be at least 1");
        }
        if self.mode == Mode::Improved && !self.samples.is_multiple_of(4) {
            return Err(CtrlError::IndivisibleN(self.samples));
        }
        if !(self.stage2_radius >= 0.0) || !(self.cone_degrees >= 0.0 && self.cone_degrees < 180.0) {
            return bad("stage2_radius or cone_degrees out of range");
        }
        if let Temperature::Fixed { lambda } = self.temperature {
            if !(lambda > 0.0) {
                return bad("fixed lambda must be positive");
            }
        }
        Ok(())
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::basic()
    }
}

/// Inputs the controller sees at one control step.
#[derive(Clone, Copy, Debug)]
pub struct StepInput<'a> {
    pub pose: Pose,
    pub history: &'a HistoryContext,
    pub dims: ObjectDims,
    /// Object distance to the current target (waypoint or final pose).
    pub goal_distance: f64,
    /// Clearance between the resting pusher and the object, if known.
    pub pusher_clearance: Option<f64>,
    pub step: usize,
    pub seed: u64,
}

/// A task cost evaluated on one predicted rollout.
pub trait CostFn: Sync {
    fn cost(&self, c: &CostContext) -> f64;
}

impl CostFn for crate::tasks::Objective {
    fn cost(&self, c: &CostContext) -> f64 {
        crate::tasks::Objective::cost(self, c)
    }
}

impl<F: Fn(&CostContext) -> f64 + Sync> CostFn for F {
    fn cost(&self, c: &CostContext) -> f64 {
        self(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub action: PushAction,
    pub predicted: Motion,
    /// Cost of the best sample in the last population.
    pub best_cost: f64,
    /// Set when the blended action kept colliding and the best sample was used.
    pub fallback: bool,
    pub restarts: usize,
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)))
}

/// Normalized `exp(-c / lambda)` weights, computed on costs shifted by their
/// minimum. A degenerate temperature gives uniform weights.
pub fn softmin_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let (lo, _) = min_max(costs);
    if !(lambda > 0.0) || !lambda.is_finite() {
        return vec![1.0 / costs.len() as f64; costs.len()];
    }
    let raw: Vec<f64> = costs.iter().map(|&c| (-(c - lo) / lambda).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Weighted mean of the action 4-vectors.
pub fn blend(actions: &[PushAction], weights: &[f64]) -> PushAction {
    let total: f64 = weights.iter().sum();
    let mut acc = [0.0; 4];
    for (a, &w) in actions.iter().zip(weights) {
        acc[0] += w * a.ro.u;
        acc[1] += w * a.ro.v;
        acc[2] += w * a.d_ro.u;
        acc[3] += w * a.d_ro.v;
    }
    PushAction::new(BodyPoint::new(acc[0] / total, acc[1] / total), BodyPoint::new(acc[2] / total, acc[3] / total))
}

/// Lowest index among the minimal costs.
pub fn argmin(costs: &[f64]) -> usize {
    costs.iter().enumerate().fold(0, |best, (i, &c)| if c < costs[best] { i } else { best })
}

/// `true` iff a pusher at `ro` overlaps an object with dimensions `dims`.
pub fn collides(dims: &ObjectDims, ro: BodyPoint) -> bool {
    let [hx, hy] = dims.half_extents();
    box_distance([ro.u, ro.v], hx, hy) < PUSHER_RADIUS
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, half: f64) -> f64 {
    if half > 0.0 {
        rng.gen_range(-half..=half)
    } else {
        0.0
    }
}

/// Magnitude range used by the blended controller at this step.
pub fn basic_range(cfg: &ControllerConfig, goal_distance: f64, pusher_clearance: Option<f64>) -> [f64; 2] {
    let near = match cfg.stage_trigger {
        StageTrigger::TargetDistance => goal_distance <= cfg.stage2_radius,
        StageTrigger::ObjectDistance => pusher_clearance.is_some_and(|c| c <= cfg.stage2_radius),
    };
    if near {
        cfg.stage2_range
    } else {
        cfg.stage1_range
    }
}

/// Blended-controller samples: uniform perimeter point, direction in the
/// inward cone, magnitude uniform in `range`. Sample `i` draws from its own
/// stream `stream ++ [i]`.
pub fn sample_actions_basic(dims: &ObjectDims, range: [f64; 2], cfg: &ControllerConfig, seed: u64, stream: &[u64]) -> Vec<PushAction> {
    let perimeter = Perimeter::new(dims.half_extents());
    let half = cfg.half_cone();
    let mut key = stream.to_vec();
    key.push(0);
    (0..cfg.samples)
        .map(|i| {
            *key.last_mut().expect("non-empty key") = i as u64;
            let mut rng = stream_rng(seed, &key);
            let (face, ro) = perimeter.sample(&mut rng);
            let dir = cone_direction(face, symmetric(&mut rng, half));
            PushAction::new(ro, dir * uniform(&mut rng, range))
        })
        .collect()
}

/// Improved-controller samples: `N / 4` per face, first direction within the
/// initial interval about the inward normal, magnitude uniform in
/// `improved_range`.
pub fn sample_actions_improved(dims: &ObjectDims, cfg: &ControllerConfig, seed: u64, stream: &[u64]) -> Result<Vec<PushAction>, CtrlError> {
    if !cfg.samples.is_multiple_of(4) {
        return Err(CtrlError::IndivisibleN(cfg.samples));
    }
    let perimeter = Perimeter::new(dims.half_extents());
    let half = cfg.initial_dir.half_angle();
    let per_face = cfg.samples / 4;
    let mut key = stream.to_vec();
    key.push(0);
    Ok((0..cfg.samples)
        .map(|i| {
            *key.last_mut().expect("non-empty key") = i as u64;
            let mut rng = stream_rng(seed, &key);
            let face = Face::ALL[i / per_face];
            let ro = perimeter.sample_on_face(face, &mut rng);
            let dir = cone_direction(face, symmetric(&mut rng, half));
            PushAction::new(ro, dir * uniform(&mut rng, cfg.improved_range))
        })
        .collect())
}

/// Per-step direction changes for improved-mode rollouts; the first entry is
/// zero so step 0 applies the sampled action itself.
pub fn direction_jitter(cfg: &ControllerConfig, seed: u64, stream: &[u64]) -> Vec<Vec<f64>> {
    let half = cfg.per_step_jitter_deg.to_radians();
    let mut key = stream.to_vec();
    key.push(0);
    (0..cfg.samples)
        .map(|i| {
            *key.last_mut().expect("non-empty key") = i as u64;
            let mut rng = stream_rng(seed, &key);
            (0..cfg.horizon).map(|k| if k == 0 { 0.0 } else { symmetric(&mut rng, half) }).collect()
        })
        .collect()
}

/// Rolls out `actions` and scores each rollout.
pub fn score_rollouts<P: MotionPredictor + ?Sized, C: CostFn + ?Sized>(
    model: &P,
    input: &StepInput,
    actions: &[PushAction],
    deltas: Option<&[Vec<f64>]>,
    cost: &C,
    cfg: &ControllerConfig,
) -> Result<(Vec<f64>, Vec<Vec<RolloutStep>>), CtrlError> {
    let perimeter = Perimeter::new(input.dims.half_extents());
    let rollouts = rollout_batch(model, input.history, actions, cfg.horizon, deltas, cfg.ro_mode, &perimeter)?;
    let half_extents = input.dims.half_extents();
    let costs = rollouts
        .iter()
        .map(|steps| {
            let poses = integrate(input.pose, steps.iter().map(|s| s.motion));
            cost.cost(&CostContext { start: &input.pose, steps, poses: &poses, half_extents })
        })
        .collect();
    Ok((costs, rollouts))
}

/// Blended selection with collision restarts and a lowest-cost fallback.
pub fn select_action_basic<P: MotionPredictor + ?Sized, C: CostFn + ?Sized>(
    model: &P,
    input: &StepInput,
    cost: &C,
    cfg: &ControllerConfig,
) -> Result<Selection, CtrlError> {
    let range = basic_range(cfg, input.goal_distance, input.pusher_clearance);
    let perimeter = Perimeter::new(input.dims.half_extents());
    let mut last = None;
    for attempt in 0..=cfg.restart_limit {
        let samples = sample_actions_basic(&input.dims, range, cfg, input.seed, &[input.step as u64, attempt as u64]);
        let (costs, _) = score_rollouts(model, input, &samples, None, cost, cfg)?;
        let weights = softmin_weights(&costs, cfg.temperature.lambda(&costs));
        let mixed = blend(&samples, &weights);
        let best = argmin(&costs);
        if !collides(&input.dims, mixed.ro) {
            let face = perimeter.face_of(mixed.ro);
            let action = PushAction::new(mixed.ro, clamp_into_cone(face, mixed.d_ro, cfg.half_cone()));
            let predicted = model.predict_batch(&[&input.history.window_with(action.ro, action.d_ro)])?[0];
            return Ok(Selection { action, predicted, best_cost: costs[best], fallback: false, restarts: attempt });
        }
        last = Some((samples[best], costs[best]));
    }
    let (action, best_cost) = last.expect("at least one attempt");
    let predicted = model.predict_batch(&[&input.history.window_with(action.ro, action.d_ro)])?[0];
    Ok(Selection { action, predicted, best_cost, fallback: true, restarts: cfg.restart_limit })
}

/// Greedy selection over balanced samples with directional rollouts.
pub fn select_action_improved<P: MotionPredictor + ?Sized, C: CostFn + ?Sized>(
    model: &P,
    input: &StepInput,
    cost: &C,
    cfg: &ControllerConfig,
) -> Result<Selection, CtrlError> {
    let key = [input.step as u64, 0];
    let samples = sample_actions_improved(&input.dims, cfg, input.seed, &key)?;
    let deltas = direction_jitter(cfg, input.seed, &[input.step as u64, 1]);
    let (costs, rollouts) = score_rollouts(model, input, &samples, Some(&deltas), cost, cfg)?;
    let best = argmin(&costs);
    let first = rollouts[best][0];
    Ok(Selection { action: samples[best], predicted: first.motion, best_cost: costs[best], fallback: false, restarts: 0 })
}

pub fn select_action<P: MotionPredictor + ?Sized, C: CostFn + ?Sized>(
    model: &P,
    input: &StepInput,
    cost: &C,
    cfg: &ControllerConfig,
) -> Result<Selection, CtrlError> {
    match cfg.mode {
        Mode::Basic => select_action_basic(model, input, cost, cfg),
        Mode::Improved => select_action_improved(model, input, cost, cfg),
    }
}
