//! Central finite-difference gradient checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Activation, Dense, Gru, HasParams, Lstm, Param};
use super::tensor::Tensor2;

/// Norm-relative discrepancy `|a - n| / max(|a| + |n|, floor)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / (na + nn).max(floor)
}

/// Compares the gradients accumulated by `backward` against central
/// differences of `loss` for every parameter tensor of `model`.
///
/// `backward` must zero the gradients, run a forward and backward pass and
/// return the loss. Returns the largest per-tensor relative error.
pub fn max_relative_error<M: HasParams<f64>>(model: &mut M, loss: impl Fn(&M) -> f64, backward: impl Fn(&mut M) -> f64, eps: f64) -> f64 {
    backward(model);
    let mut analytic = Vec::new();
    model.visit("", &mut |_, p| analytic.push(p.grad.as_slice().to_vec()));
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let shift = |m: &mut M, d: f64| {
                let mut idx = 0;
                m.visit_mut("", &mut |_, p| {
                    if idx == k {
                        p.value.as_mut_slice()[i] += d;
                    }
                    idx += 1;
                });
            };
            shift(model, eps);
            let up = loss(model);
            shift(model, -2.0 * eps);
            let down = loss(model);
            shift(model, eps);
            *slot = (up - down) / (2.0 * eps);
        }
        worst = worst.max(relative_error(a, &numeric, 1e-8));
    }
    worst
}

fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor2<f64> {
    Tensor2::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// A layer plus its input, so input gradients are checked too.
struct WithInput<L> {
    layer: L,
    xs: Vec<Param<f64>>,
    coef: Tensor2<f64>,
}

impl<L: HasParams<f64>> HasParams<f64> for WithInput<L> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<f64>)) {
        self.layer.visit(prefix, f);
        for (i, x) in self.xs.iter().enumerate() {
            f(format!("x{i}"), x);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<f64>)) {
        self.layer.visit_mut(prefix, f);
        for (i, x) in self.xs.iter_mut().enumerate() {
            f(format!("x{i}"), x);
        }
    }
}

fn weighted_sum(y: &Tensor2<f64>, c: &Tensor2<f64>) -> f64 {
    y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
}

/// Worst relative error for a random dense instance (parameters and input).
pub fn dense_check(seed: u64, act: Activation) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, ni, no) = (rng.gen_range(1..4), rng.gen_range(1..6), rng.gen_range(1..6));
    let layer = Dense::new(ni, no, act, &mut rng);
    let xs = vec![Param::new(rand_tensor(&mut rng, b, ni))];
    let coef = rand_tensor(&mut rng, b, no);
    let mut m = WithInput { layer, xs, coef };
    max_relative_error(
        &mut m,
        |m| weighted_sum(&m.layer.forward(&m.xs[0].value).unwrap().0, &m.coef),
        |m| {
            m.zero_grad();
            let (y, cache) = m.layer.forward(&m.xs[0].value).unwrap();
            let dx = m.layer.backward(&cache, &m.coef);
            m.xs[0].grad = dx;
            weighted_sum(&y, &m.coef)
        },
        1e-5,
    )
}

/// Same for a random GRU unrolled over up to three steps, including `h0`.
pub fn gru_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, ni, m, steps) = (rng.gen_range(1..4), rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4));
    let layer = Gru::new(ni, m, &mut rng);
    let mut xs: Vec<_> = (0..steps).map(|_| Param::new(rand_tensor(&mut rng, b, ni))).collect();
    xs.push(Param::new(rand_tensor(&mut rng, b, m).map(|v| 0.9 * v))); // h0
    let coef = rand_tensor(&mut rng, b, m);
    let mut model = WithInput { layer, xs, coef };
    let run = |m: &WithInput<Gru<f64>>| {
        let inputs: Vec<_> = m.xs[..steps].iter().map(|p| p.value.clone()).collect();
        m.layer.forward_seq(&inputs, m.xs[steps].value.clone()).unwrap()
    };
    max_relative_error(
        &mut model,
        |m| weighted_sum(&run(m).0, &m.coef),
        |m| {
            m.zero_grad();
            let (h, caches) = run(m);
            let coef = m.coef.clone();
            let (dxs, dh0) = m.layer.backward_seq(&caches, &coef);
            for (p, d) in m.xs.iter_mut().zip(dxs) {
                p.grad = d;
            }
            m.xs[steps].grad = dh0;
            weighted_sum(&h, &m.coef)
        },
        1e-5,
    )
}

/// Same for a random LSTM whose loss reads every hidden state.
pub fn lstm_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, ni, m, steps) = (rng.gen_range(1..4), rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4));
    let layer = Lstm::new(ni, m, &mut rng);
    let xs: Vec<_> = (0..steps).map(|_| Param::new(rand_tensor(&mut rng, b, ni))).collect();
    // loss reads every step's hidden state
    let coef = rand_tensor(&mut rng, b, m * steps);
    let mut model = WithInput { layer, xs, coef };
    let run = |m: &WithInput<Lstm<f64>>| {
        let inputs: Vec<_> = m.xs.iter().map(|p| p.value.clone()).collect();
        m.layer.forward_seq(&inputs).unwrap()
    };
    let loss_of = |hs: &[Tensor2<f64>], coef: &Tensor2<f64>| {
        hs.iter().enumerate().map(|(k, h)| weighted_sum(h, &coef.columns(k * h.cols(), h.cols()))).sum::<f64>()
    };
    max_relative_error(
        &mut model,
        |m| loss_of(&run(m).0, &m.coef),
        |m| {
            m.zero_grad();
            let (hs, caches) = run(m);
            let mm = m.layer.hidden_dim();
            let dhs: Vec<_> = (0..steps).map(|k| m.coef.columns(k * mm, mm)).collect();
            let dxs = m.layer.backward_seq(&caches, &dhs);
            for (p, d) in m.xs.iter_mut().zip(dxs) {
                p.grad = d;
            }
            loss_of(&hs, &m.coef)
        },
        1e-5,
    )
}
