use proptest::prelude::*;

use super::*;
use crate::dynamics::HistoryWindow;
use crate::perimeter::{cone_deviation, SAMPLING_MARGIN};
use crate::sim::{ObjectParams, Simulator, WorldState};
use crate::tasks::TaskSpec;

/// The object translates by the push vector.
struct Kinematic;

impl MotionPredictor for Kinematic {
    fn predict_batch(&self, windows: &[&HistoryWindow]) -> Result<Vec<Motion>, NetError> {
        Ok(windows.iter().map(|w| Motion::new(w.current.d_ro.u, w.current.d_ro.v, 0.0)).collect())
    }
}

fn dims() -> ObjectDims {
    ObjectParams::midpoint().dims()
}

fn input(history: &HistoryContext, step: usize) -> StepInput<'_> {
    StepInput { pose: Pose::identity(), history, dims: dims(), goal_distance: 0.2, pusher_clearance: None, step, seed: 11 }
}

fn on_perimeter(a: &PushAction) -> bool {
    let [hx, hy] = dims().half_extents();
    (box_distance([a.ro.u, a.ro.v], hx, hy) - (PUSHER_RADIUS + SAMPLING_MARGIN)).abs() < 1e-9
}

#[test]
fn basic_samples_follow_the_stage() {
    let cfg = ControllerConfig { samples: 200, ..ControllerConfig::basic() };
    let far = sample_actions_basic(&dims(), basic_range(&cfg, 0.5, None), &cfg, 3, &[0]);
    assert!(far.iter().all(|a| (0.008..=0.03).contains(&a.magnitude())));
    let near = sample_actions_basic(&dims(), basic_range(&cfg, 0.005, None), &cfg, 3, &[0]);
    assert!(near.iter().all(|a| (0.001..=0.008).contains(&a.magnitude())));
    let perimeter = Perimeter::new(dims().half_extents());
    for a in far.iter().chain(&near) {
        assert!(on_perimeter(a));
        assert!(cone_deviation(perimeter.face_of(a.ro), a.d_ro) <= cfg.half_cone() + 1e-12);
    }
    assert_eq!(far, sample_actions_basic(&dims(), basic_range(&cfg, 0.5, None), &cfg, 3, &[0]));
    assert_ne!(far, sample_actions_basic(&dims(), basic_range(&cfg, 0.5, None), &cfg, 3, &[1]));
}

#[test]
fn object_distance_trigger() {
    let cfg = ControllerConfig { stage_trigger: StageTrigger::ObjectDistance, ..ControllerConfig::basic() };
    assert_eq!(basic_range(&cfg, 0.5, Some(0.0)), cfg.stage2_range);
    assert_eq!(basic_range(&cfg, 0.001, None), cfg.stage1_range);
}

#[test]
fn improved_samples_are_balanced() {
    let cfg = ControllerConfig::improved();
    let s = sample_actions_improved(&dims(), &cfg, 5, &[0]).unwrap();
    let perimeter = Perimeter::new(dims().half_extents());
    for face in Face::ALL {
        assert_eq!(s.iter().filter(|a| perimeter.face_of(a.ro) == face).count(), 25);
    }
    for a in &s {
        assert!(on_perimeter(a));
        assert!((0.003..=0.05).contains(&a.magnitude()));
        assert!(cone_deviation(perimeter.face_of(a.ro), a.d_ro) <= 5f64.to_radians() + 1e-12);
    }
    let wide = ControllerConfig { initial_dir: InitialDirection::Wide, ..cfg.clone() };
    let w = sample_actions_improved(&dims(), &wide, 5, &[0]).unwrap();
    assert!(w.iter().any(|a| cone_deviation(perimeter.face_of(a.ro), a.d_ro) > 5f64.to_radians()));
    let odd = ControllerConfig { samples: 10, ..cfg };
    assert!(matches!(sample_actions_improved(&dims(), &odd, 5, &[0]), Err(CtrlError::IndivisibleN(10))));
    assert!(matches!(odd.validate(), Err(CtrlError::IndivisibleN(10))));
}

#[test]
fn config_validation() {
    assert!(ControllerConfig::basic().validate().is_ok());
    assert!(ControllerConfig::improved().validate().is_ok());
    let bad = ControllerConfig { stage2_range: [0.008, 0.001], ..ControllerConfig::basic() };
    assert!(matches!(bad.validate(), Err(CtrlError::InvalidConfig(_))));
    let json = serde_json::to_string(&ControllerConfig::improved()).unwrap();
    assert_eq!(serde_json::from_str::<ControllerConfig>(&json).unwrap(), ControllerConfig::improved());
}

#[test]
fn single_sample_is_returned_unchanged() {
    let h = HistoryContext::new(4);
    for mode in [Mode::Basic, Mode::Improved] {
        let cfg = ControllerConfig { samples: if mode == Mode::Basic { 1 } else { 4 }, ..ControllerConfig::for_mode(mode) };
        let cost = |c: &CostContext| c.poses.last().unwrap().distance_to(&Pose::new(0.2, 0.0, 0.0));
        let sel = select_action(&Kinematic, &input(&h, 0), &cost, &cfg).unwrap();
        if mode == Mode::Basic {
            let only = sample_actions_basic(&dims(), cfg.stage1_range, &cfg, 11, &[0, 0])[0];
            assert!((sel.action.ro - only.ro).norm() < 1e-15 && (sel.action.d_ro - only.d_ro).norm() < 1e-15);
            assert!(!sel.fallback);
        }
        assert_eq!(sel.predicted, Motion::new(sel.action.d_ro.u, sel.action.d_ro.v, 0.0));
    }
}

fn action(u: f64, v: f64, du: f64, dv: f64) -> PushAction {
    PushAction::new(BodyPoint::new(u, v), BodyPoint::new(du, dv))
}

#[test]
fn blending_limits() {
    let a = action(-0.08, 0.01, 0.01, 0.0);
    let b = action(-0.08, -0.03, 0.02, 0.004);
    let mid = blend(&[a, b], &softmin_weights(&[0.3, 0.3], 0.1));
    assert!((mid.ro.v + 0.01).abs() < 1e-15 && (mid.d_ro.u - 0.015).abs() < 1e-15);

    let acts = [a, b, action(0.0, 0.07, 0.0, -0.01)];
    let costs = [0.5, 0.2, 0.9];
    let sharp = blend(&acts, &softmin_weights(&costs, 1e-9));
    assert!((sharp.ro - b.ro).norm() < 1e-6 && (sharp.d_ro - b.d_ro).norm() < 1e-6);
    let flat = blend(&acts, &softmin_weights(&costs, 1e9));
    let mean = blend(&acts, &[1.0, 1.0, 1.0]);
    assert!((flat.ro - mean.ro).norm() < 1e-9 && (flat.d_ro - mean.d_ro).norm() < 1e-9);
}

#[test]
fn improved_selects_the_cost_minimizer() {
    let h = HistoryContext::new(4);
    let cfg = ControllerConfig { samples: 20, ..ControllerConfig::improved() };
    let samples = sample_actions_improved(&dims(), &cfg, 11, &[0, 0]).unwrap();
    for k in [0, 7, 19] {
        let target = samples[k];
        let cost = move |c: &CostContext| (c.steps[0].action.ro - target.ro).norm() + (c.steps[0].action.d_ro - target.d_ro).norm();
        let sel = select_action_improved(&Kinematic, &input(&h, 0), &cost, &cfg).unwrap();
        assert_eq!(sel.action, target);
    }
    let flat = |_: &CostContext| 1.0;
    assert_eq!(select_action_improved(&Kinematic, &input(&h, 0), &flat, &cfg).unwrap().action, samples[0]);
}

#[test]
fn directional_rollouts_turn_within_bounds() {
    let cfg = ControllerConfig::improved();
    let d = direction_jitter(&cfg, 1, &[0]);
    assert_eq!(d.len(), 100);
    for row in &d {
        assert_eq!(row.len(), 3);
        assert_eq!(row[0], 0.0);
        assert!(row.iter().all(|x| x.abs() <= 5f64.to_radians()));
    }
}

#[test]
fn zero_push_episode_when_already_there() {
    let params = ObjectParams::midpoint();
    let initial = WorldState { object_pose: Pose::new(0.1, 0.0, 0.0), pusher_pos: [0.0, 0.0], params };
    let task = TaskSpec::posing(Pose::new(0.105, 0.0, 0.3), 0.025, 0.01);
    let trace = run_episode(&Kinematic, &Simulator::default(), initial, &task, &ControllerConfig::basic(), 50, 1, 4).unwrap();
    assert!(trace.steps.is_empty());
    assert_eq!(trace.outcome(), EpisodeOutcome::Success);
}

#[test]
fn episode_trace_round_trips() {
    let params = ObjectParams::midpoint();
    let initial = WorldState { object_pose: Pose::identity(), pusher_pos: [0.0, 0.0], params };
    let task = TaskSpec::posing_penalty(Pose::new(0.1, 0.05, 0.0), 0.025, 0.01);
    let trace = run_episode(&Kinematic, &Simulator::default(), initial, &task, &ControllerConfig::basic(), 5, 2, 4).unwrap();
    assert_eq!(trace.steps.len(), 5);
    assert_eq!(trace.outcome(), EpisodeOutcome::Exhausted);
    assert_eq!(trace.steps[0].travel, 0.0);
    assert!(trace.steps[1..].iter().all(|s| s.travel > 0.0));
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 6);
    assert_eq!(EpisodeTrace::read_jsonl(&buf[..]).unwrap(), trace);
    // deterministic given the seed
    let again = run_episode(&Kinematic, &Simulator::default(), initial, &task, &ControllerConfig::basic(), 5, 2, 4).unwrap();
    assert_eq!(again, trace);
}

proptest! {
    #[test]
    fn weights_are_normalized_and_shift_invariant(
        costs in proptest::collection::vec(0.0f64..1.0, 1..30),
        shift in -100.0f64..100.0,
        lambda in 0.01f64..10.0,
    ) {
        let w = softmin_weights(&costs, lambda);
        prop_assert!(w.iter().all(|&x| x > 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let ws = softmin_weights(&shifted, lambda);
        for (a, b) in w.iter().zip(&ws) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn argmin_is_scale_invariant(costs in proptest::collection::vec(0.0f64..1.0, 1..50), scale in 1e-6f64..1e6) {
        let scaled: Vec<f64> = costs.iter().map(|c| c * scale).collect();
        prop_assert_eq!(argmin(&costs), argmin(&scaled));
    }

    #[test]
    fn basic_selection_never_collides_without_fallback(seed in any::<u64>(), wx in -0.3f64..0.3, wy in -0.3f64..0.3) {
        let h = HistoryContext::new(4);
        let cfg = ControllerConfig::basic();
        let goal = Pose::new(wx, wy, 0.0);
        let cost = move |c: &CostContext| c.poses.last().unwrap().distance_to(&goal);
        let inp = StepInput { seed, ..input(&h, 0) };
        let sel = select_action_basic(&Kinematic, &inp, &cost, &cfg).unwrap();
        prop_assert!(sel.fallback || !collides(&dims(), sel.action.ro));
        if sel.fallback {
            prop_assert!(on_perimeter(&sel.action));
        }
    }
}
