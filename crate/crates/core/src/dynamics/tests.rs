use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{episode_windows, generate_dataset, generate_episode, DataConfig, SizeClass, WindowSample};
use crate::net::gradcheck::max_relative_error;
use crate::net::tensor::Tensor2;
use crate::net::{HasParams, NetError};
use crate::perimeter::Perimeter;
use crate::{BodyPoint, Motion};

const ARCHS: [Architecture; 3] = [Architecture::Gru, Architecture::NoHistory, Architecture::Lstm];

fn samples(episodes: usize, seed: u64) -> Vec<WindowSample> {
    let ds = generate_dataset(&DataConfig { episodes, master_seed: seed, ..DataConfig::default() }).unwrap();
    ds.windows(None, 4, true)
}

#[test]
fn zero_weights_predict_zero_motion() {
    let s = samples(1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for arch in ARCHS {
        let mut m = DynamicsModel::new(arch, 4, 16, &mut rng);
        m.translation = m.translation.zeroed();
        m.rotation = m.rotation.map(|r| r.zeroed());
        assert_eq!(m.predict(&s[10].window).unwrap(), Motion::zero(), "{arch:?}");
    }
}

#[test]
fn current_branch_is_separate_from_history() {
    let s = samples(1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = DynamicsModel::new(Architecture::Gru, 4, 16, &mut rng);
    let a = s[20].window.clone();
    let mut b = a.clone();
    b.current.d_ro = b.current.d_ro * 1.5;
    assert_ne!(m.predict(&a).unwrap(), m.predict(&b).unwrap());
    let fa = m.normalizer.features(&[&a]);
    let fb = m.normalizer.features(&[&b]);
    assert_eq!(m.translation.history_state(fa.as_slice()), m.translation.history_state(fb.as_slice()));
}

#[test]
fn wrong_window_length_is_rejected() {
    let s = samples(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = DynamicsModel::new(Architecture::Gru, 3, 8, &mut rng);
    assert!(matches!(m.predict(&s[0].window), Err(NetError::ShapeMismatch { .. })));
}

#[test]
fn backward_requires_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = DynNet::<f64>::new(Architecture::Gru, 2, 4, 2, &mut rng);
    assert!(matches!(net.backward(&Tensor2::zeros(1, 2)), Err(NetError::GraphNotEvaluated)));
    net.forward(&Tensor2::zeros(1, 14)).unwrap();
    net.backward(&Tensor2::zeros(1, 2)).unwrap();
    assert!(matches!(net.backward(&Tensor2::zeros(1, 2)), Err(NetError::GraphNotEvaluated)));
}

#[test]
fn full_network_gradients() {
    for arch in ARCHS {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = DynNet::<f64>::new(arch, 3, 5, 2, &mut rng);
            let x = Tensor2::from_fn(3, 21, |_, _| rng.gen_range(-1.0..1.0));
            let c = Tensor2::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
            let dot = |y: &Tensor2<f64>| y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum::<f64>();
            let err = max_relative_error(
                &mut net,
                |n| dot(&n.predict(&x).unwrap()),
                |n| {
                    n.zero_grad();
                    let y = n.forward(&x).unwrap();
                    n.backward(&c).unwrap();
                    dot(&y)
                },
                1e-5,
            );
            assert!(err < 1e-4, "{arch:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn overfits_one_batch() {
    let s: Vec<_> = samples(1, 4).into_iter().skip(10).take(32).collect();
    let schedule = crate::net::StepDecay { every: usize::MAX, ..Default::default() };
    let cfg = TrainConfig { epochs: 500, batch_size: 32, rotation: false, schedule, ..TrainConfig::default() };
    let (model, log) = train_windows(&s, &[], &cfg).unwrap();
    let loss = train::translation_loss(&model, &s).unwrap();
    assert!(loss < 1e-8, "loss {loss} m^2 (last epoch {:?})", log.epochs.last());
}

#[test]
fn best_epoch_is_validation_argmin() {
    let ds = generate_dataset(&DataConfig { episodes: 10, master_seed: 3, ..DataConfig::default() }).unwrap();
    let cfg = TrainConfig { epochs: 6, hidden: 16, ..TrainConfig::default() };
    let (model, log) = train(&ds, &cfg).unwrap();
    let argmin = |f: fn(&EpochLog) -> f64| log.epochs.iter().enumerate().min_by(|a, b| f(a.1).partial_cmp(&f(b.1)).unwrap()).unwrap().0;
    assert_eq!(log.best_translation_epoch, argmin(|e| e.val_translation));
    assert_eq!(log.best_rotation_epoch, argmin(|e| e.val_rotation));
    let val = ds.windows(Some(crate::data::Split::Val), 4, true);
    let v = train::translation_loss(&model, &val).unwrap();
    assert!((v - log.epochs[log.best_translation_epoch].val_translation).abs() < 1e-15);

    // same seed, same weights
    let (again, _) = train(&ds, &cfg).unwrap();
    assert_eq!(again, model);
}

#[test]
fn empty_dataset_is_an_error() {
    assert!(matches!(train_windows(&[], &[], &TrainConfig::default()), Err(TrainError::EmptyDataset)));
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let s = samples(1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for arch in ARCHS {
        let mut m = DynamicsModel::new(arch, 4, 8, &mut rng);
        m.normalizer = Normalizer::fit(s.iter().map(|x| &x.window));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path, serde_json::json!({"note": 1})).unwrap();
        let back = DynamicsModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&s[30].window).unwrap(), m.predict(&s[30].window).unwrap());
    }
}

struct Oracle<'a>(&'a [WindowSample]);

impl MotionPredictor for Oracle<'_> {
    fn predict_batch(&self, windows: &[&HistoryWindow]) -> Result<Vec<Motion>, NetError> {
        Ok(windows.iter().map(|w| self.0.iter().find(|s| &s.window == *w).unwrap().target).collect())
    }
}

#[test]
fn perfect_predictor_has_zero_error() {
    let s = samples(1, 6);
    for subset in [None, Some(SizeClass::Small), Some(SizeClass::Big)] {
        let r = evaluate(&Oracle(&s), &s, subset).unwrap();
        assert_eq!((r.position.mean, r.position.std, r.orientation.mean, r.orientation.std), (0.0, 0.0, 0.0, 0.0));
    }
    let big = evaluate(&Oracle(&s), &s, Some(SizeClass::Big)).unwrap().position.count;
    let small = evaluate(&Oracle(&s), &s, Some(SizeClass::Small)).unwrap().position.count;
    assert_eq!(big + small, s.len());
}

#[test]
fn predictions_ignore_world_pose() {
    // the same pushes from a rotated and shifted initial pose give the same
    // body-frame records up to rounding, hence the same predictions
    let cfg = DataConfig::default();
    let a = generate_episode(0, &cfg, 77).unwrap();
    let b = generate_episode(90, &cfg, 77).unwrap();
    let wa = episode_windows(&a, 4, true);
    let wb = episode_windows(&b, 4, true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = DynamicsModel::new(Architecture::Gru, 4, 16, &mut rng);
    for (x, y) in wa.iter().zip(&wb).take(50) {
        let (p, q) = (m.predict(&x.window).unwrap(), m.predict(&y.window).unwrap());
        assert!((p.dx - q.dx).abs() < 1e-9 && (p.dy - q.dy).abs() < 1e-9 && (p.dyaw() - q.dyaw()).abs() < 1e-9);
    }
}

#[test]
fn rollout_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m = DynamicsModel::new(Architecture::Gru, 4, 16, &mut rng);
    let per = Perimeter::new([0.06, 0.05]);
    let ctx = HistoryContext::new(4);
    let action = PushAction::new(per.point(crate::perimeter::Face::NegX, 0.01), BodyPoint::new(0.02, 0.0));
    let one = rollout(&m, &ctx, action, 1, None, RoMode::Tracked, &per).unwrap();
    assert_eq!(one, vec![m.predict(&ctx.window_with(action.ro, action.d_ro)).unwrap()]);

    let plain = rollout(&m, &ctx, action, 4, None, RoMode::Tracked, &per).unwrap();
    let zeros = rollout(&m, &ctx, action, 4, Some(&[0.0; 4]), RoMode::Tracked, &per).unwrap();
    assert_eq!(plain, zeros);
    let turned = rollout(&m, &ctx, action, 4, Some(&[0.0, 0.1, 0.1, 0.1]), RoMode::Tracked, &per).unwrap();
    assert_eq!(turned[0], plain[0]);
    assert_ne!(turned[1], plain[1]);

    let steps = rollout_batch(&m, &ctx, &[action], 3, None, RoMode::Frozen, &per).unwrap();
    assert!(steps[0].iter().all(|s| s.action == action));
    let tracked = rollout_batch(&m, &ctx, &[action], 3, None, RoMode::Tracked, &per).unwrap();
    for s in &tracked[0] {
        let face = per.face_of(s.action.ro);
        assert!((per.normal_offset(face, s.action.ro) - per.standoff).abs() < 1e-12);
    }
}
