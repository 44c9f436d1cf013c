use serde::{Deserialize, Serialize};

use super::layers::HasParams;
use crate::scalar::Scalar;

/// Bias-corrected Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of steps taken so far.
    pub t: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0 }
    }
}

impl Adam {
    /// Applies one update to every parameter of `model` from its accumulated gradient.
    pub fn step<S: Scalar, M: HasParams<S> + ?Sized>(&mut self, model: &mut M, lr: f64) {
        self.t += 1;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let c1 = S::lit(1.0 - self.beta1.powi(self.t as i32));
        let c2 = S::lit(1.0 - self.beta2.powi(self.t as i32));
        let (lr, eps) = (S::lit(lr), S::lit(self.eps));
        let one = S::one();
        model.visit_mut("", &mut |_, p| {
            let g = p.grad.as_slice();
            let m = p.m.as_mut_slice();
            let v = p.v.as_mut_slice();
            let w = p.value.as_mut_slice();
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                w[i] -= lr * mh / (vh.sqrt() + eps);
            }
        });
    }
}

/// Step decay: the rate is multiplied by `factor` every `every` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub base_lr: f64,
    pub factor: f64,
    pub every: usize,
}

impl Default for StepDecay {
    fn default() -> Self {
        Self { base_lr: 1e-3, factor: 0.5, every: 15 }
    }
}

impl StepDecay {
    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.factor.powi((epoch / self.every.max(1)) as i32)
    }
}

pub fn lr_schedule(epoch: usize, base_lr: f64) -> f64 {
    StepDecay { base_lr, ..StepDecay::default() }.lr(epoch)
}
