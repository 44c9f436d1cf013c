use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{dense_check, gru_check, lstm_check};
use super::layers::sigmoid;
use super::*;

#[test]
fn dense_examples() {
    let mut d = Dense::<f64>::zeros(2, 2, Activation::Relu);
    d.w.value = Tensor2::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(d.forward_vec(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);

    let mut d = Dense::<f64>::zeros(3, 2, Activation::None);
    d.b.value = Tensor2::row_vector(&[0.3, -2.0]);
    assert_eq!(d.forward_vec(&[5.0, 6.0, 7.0]).unwrap(), vec![0.3, -2.0]);
    assert!(matches!(d.forward_vec(&[1.0]), Err(NetError::ShapeMismatch { .. })));
}

#[test]
fn dense_matches_dot_product_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = Dense::<f64>::new(3, 3, Activation::None, &mut rng);
    let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = d.forward_vec(&x).unwrap();
    for i in 0..3 {
        let mut acc = d.b.value.get(0, i);
        for j in 0..3 {
            acc += d.w.value.get(i, j) * x[j];
        }
        assert!((acc - y[i]).abs() < 1e-12);
    }
}

#[test]
fn gru_zero_params() {
    let g = Gru::<f64>::zeros(2, 3);
    let h = [0.4, -0.2, 0.9];
    let out = g.cell_forward(&[1.0, -3.0], &h).unwrap();
    for (o, hp) in out.iter().zip(h) {
        assert!((o - 0.5 * hp).abs() < 1e-15);
    }
    assert_eq!(g.cell_forward(&[0.0, 0.0], &[0.0; 3]).unwrap(), vec![0.0; 3]);
}

#[test]
fn gru_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (ni, m) = (3, 2);
    let g = Gru::<f64>::new(ni, m, &mut rng);
    let x = [0.3, -0.7, 0.2];
    let h = [0.1, -0.5];
    let out = g.cell_forward(&x, &h).unwrap();
    let wx = |r: usize, c: usize| g.wx.value.get(r, c);
    let wh = |r: usize, c: usize| g.wh.value.get(r, c);
    let bx = |r: usize| g.bx.value.get(0, r);
    let bh = |r: usize| g.bh.value.get(0, r);
    for j in 0..m {
        let lin_x = |row: usize| bx(row) + (0..ni).map(|k| wx(row, k) * x[k]).sum::<f64>();
        let lin_h = |row: usize| bh(row) + (0..m).map(|k| wh(row, k) * h[k]).sum::<f64>();
        let r = 1.0 / (1.0 + (-(lin_x(j) + lin_h(j))).exp());
        let z = 1.0 / (1.0 + (-(lin_x(m + j) + lin_h(m + j))).exp());
        let n = (lin_x(2 * m + j) + r * lin_h(2 * m + j)).tanh();
        let expected = (1.0 - z) * h[j] + z * n;
        assert!((out[j] - expected).abs() < 1e-12);
    }
}

#[test]
fn linear_squared_loss_gradient_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut d = Dense::<f64>::new(3, 2, Activation::None, &mut rng);
    let x = Tensor2::row_vector(&[0.5, -1.0, 2.0]);
    let target = [0.1, 0.2];
    let (y, cache) = d.forward(&x).unwrap();
    let dy = Tensor2::from_fn(1, 2, |_, j| 2.0 * (y.get(0, j) - target[j]));
    d.backward(&cache, &dy);
    for i in 0..2 {
        for j in 0..3 {
            let expected = 2.0 * (y.get(0, i) - target[i]) * x.get(0, j);
            assert!((d.w.grad.get(i, j) - expected).abs() < 1e-12);
        }
    }
    // zero loss gives zero gradients
    d.zero_grad();
    d.backward(&cache, &Tensor2::zeros(1, 2));
    assert!(d.w.grad.as_slice().iter().chain(d.b.grad.as_slice()).all(|&g| g == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..20 {
        assert!(dense_check(seed, Activation::Relu) < 1e-4, "dense relu seed {seed}");
        assert!(dense_check(seed, Activation::None) < 1e-4, "dense seed {seed}");
        assert!(gru_check(seed) < 1e-4, "gru seed {seed}");
        assert!(lstm_check(seed) < 1e-4, "lstm seed {seed}");
    }
}

#[test]
fn adam_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut d = Dense::<f64>::new(3, 2, Activation::None, &mut rng);
    let before = d.clone();
    let mut opt = Adam::default();
    opt.step(&mut d, 1e-3);
    assert_eq!(d.w.value, before.w.value);

    let mut d = before.clone();
    let grad = Tensor2::from_fn(2, 3, |i, j| (i as f64 - 0.5) * (j as f64 + 1.0) * 1e-3);
    d.w.grad = grad.clone();
    let mut opt = Adam::default();
    opt.step(&mut d, 1e-3);
    for i in 0..2 {
        for j in 0..3 {
            let step = before.w.value.get(i, j) - d.w.value.get(i, j);
            // lr * g / (|g| + eps) with |g| >= 5e-4
            assert!((step - 1e-3 * grad.get(i, j).signum()).abs() < 1e-3 * 1e-4, "{step}");
        }
    }
    let mut again = before.clone();
    again.w.grad = d.w.grad.clone();
    Adam::default().step(&mut again, 1e-3);
    assert_eq!(again, d);
}

#[test]
fn schedule() {
    assert_eq!(lr_schedule(0, 1e-3), 1e-3);
    assert_eq!(lr_schedule(15, 1e-3), 5e-4);
    assert!(lr_schedule(40, 1e-3) <= lr_schedule(30, 1e-3));
    let s = StepDecay::default();
    assert!((1..100).all(|e| s.lr(e) <= s.lr(e - 1)));
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Gru::<f64>::new(3, 4, &mut rng);
    let d = Dense::<f32>::new(4, 2, Activation::Relu, &mut rng);
    let mut ck = Checkpoint::new(serde_json::json!({"arch": "test"}));
    ck.add_model("gru", &g);
    ck.add_model("head", &d);
    let mut buf = Vec::new();
    ck.write(&mut buf).unwrap();
    let back = Checkpoint::read(&buf[..]).unwrap();
    assert_eq!(back, ck);
    let mut g2 = Gru::<f64>::zeros(3, 4);
    back.load_model("gru", &mut g2).unwrap();
    assert_eq!(g2.wx.value, g.wx.value);
    let mut d2 = Dense::<f32>::zeros(4, 2, Activation::Relu);
    back.load_model("head", &mut d2).unwrap();
    assert_eq!(d2.w.value, d.w.value);
    let mut wrong = Gru::<f64>::zeros(3, 5);
    assert!(back.load_model("gru", &mut wrong).is_err());
    assert!(Checkpoint::read(&b"nonsense-bytes-here"[..]).is_err());
}

#[test]
fn sigmoid_is_stable() {
    assert_eq!(sigmoid(0.0f64), 0.5);
    assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) <= 1.0);
}

proptest! {
    #[test]
    fn gru_state_stays_bounded(seed in any::<u64>(), scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Gru::<f64>::new(3, 5, &mut rng);
        g.wx.value = g.wx.value.map(|v| v * scale);
        g.wh.value = g.wh.value.map(|v| v * scale);
        let mut h = Tensor2::zeros(2, 5);
        for _ in 0..6 {
            let x = Tensor2::from_fn(2, 3, |_, _| rng.gen_range(-50.0..50.0));
            h = g.step(&x, &h).unwrap().0;
            prop_assert!(h.as_slice().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn gru_generic_f32_close_to_f64(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g64 = Gru::<f64>::new(2, 3, &mut rng);
        let cast = |t: &Tensor2<f64>| Tensor2::<f32>::from_fn(t.rows(), t.cols(), |r, c| t.get(r, c) as f32);
        let mut g32 = Gru::<f32>::zeros(2, 3);
        g32.wx.value = cast(&g64.wx.value);
        g32.wh.value = cast(&g64.wh.value);
        g32.bx.value = cast(&g64.bx.value);
        g32.bh.value = cast(&g64.bh.value);
        let a = g64.cell_forward(&[0.2, -0.4], &[0.1, 0.0, -0.3]).unwrap();
        let b = g32.cell_forward(&[0.2, -0.4], &[0.1, 0.0, -0.3]).unwrap();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y as f64).abs() < 1e-5);
        }
    }
}
