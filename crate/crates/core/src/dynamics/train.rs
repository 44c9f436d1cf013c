//! Mini-batch training of the dual dynamics networks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Architecture, DynNet, DynamicsModel, Normalizer, HIDDEN, ROTATION_SCALE, TRANSLATION_SCALE};
use crate::data::{Dataset, Split, WindowSample};
use crate::net::tensor::Tensor2;
use crate::net::{Adam, HasParams, NetError, StepDecay};
use crate::rng::stream_rng;
use crate::scalar::wrap_angle;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training windows")]
    EmptyDataset,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: StepDecay,
    pub seed: u64,
    /// Zero-pad the first pushes of each episode.
    pub padding: bool,
    /// Also train the rotation network.
    pub rotation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Gru,
            window: 4,
            hidden: HIDDEN,
            epochs: 40,
            batch_size: 256,
            schedule: StepDecay::default(),
            seed: 0,
            padding: true,
            rotation: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean squared translation error, m^2.
    pub train_translation: f64,
    pub val_translation: f64,
    /// Mean absolute wrapped angle error, rad (0 when rotation is not trained).
    pub train_rotation: f64,
    pub val_rotation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_translation_epoch: usize,
    pub best_rotation_epoch: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Head {
    Translation,
    Rotation,
}

fn targets(samples: &[&WindowSample], head: Head) -> Tensor2<f64> {
    match head {
        Head::Translation => Tensor2::from_fn(samples.len(), 2, |i, j| {
            let t = &samples[i].target;
            TRANSLATION_SCALE * if j == 0 { t.dx } else { t.dy }
        }),
        Head::Rotation => Tensor2::from_fn(samples.len(), 1, |i, _| ROTATION_SCALE * samples[i].target.dyaw()),
    }
}

/// Loss in physical units and its gradient with respect to the scaled outputs.
///
/// Translation uses the mean squared distance; the gradient is that of the
/// same loss in scaled units (identical minimizer). Rotation uses the mean
/// absolute wrapped difference with the signed-wrap subgradient.
fn loss_and_grad(pred: &Tensor2<f64>, target: &Tensor2<f64>, head: Head) -> (f64, Tensor2<f64>) {
    let b = pred.rows() as f64;
    match head {
        Head::Translation => {
            let mut g = Tensor2::zeros(pred.rows(), 2);
            let mut sum = 0.0;
            for i in 0..pred.rows() {
                for j in 0..2 {
                    let d = pred.get(i, j) - target.get(i, j);
                    sum += d * d;
                    g.set(i, j, 2.0 * d / b);
                }
            }
            (sum / b / (TRANSLATION_SCALE * TRANSLATION_SCALE), g)
        }
        Head::Rotation => {
            let mut g = Tensor2::zeros(pred.rows(), 1);
            let mut sum = 0.0;
            for i in 0..pred.rows() {
                let d = wrap_angle((pred.get(i, 0) - target.get(i, 0)) / ROTATION_SCALE);
                sum += d.abs();
                g.set(
                    i,
                    0,
                    if d > 0.0 {
                        1.0 / b
                    } else if d < 0.0 {
                        -1.0 / b
                    } else {
                        0.0
                    },
                );
            }
            (sum / b, g)
        }
    }
}

fn mean_loss(net: &DynNet<f64>, norm: &Normalizer, samples: &[&WindowSample], head: Head, batch: usize) -> Result<f64, NetError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in samples.chunks(batch.max(1)) {
        let wins: Vec<_> = chunk.iter().map(|s| &s.window).collect();
        let pred = net.predict(&norm.features(&wins))?;
        total += loss_and_grad(&pred, &targets(chunk, head), head).0 * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

struct HeadTrainer {
    net: DynNet<f64>,
    best: DynNet<f64>,
    best_val: f64,
    best_epoch: usize,
    opt: Adam,
    head: Head,
}

impl HeadTrainer {
    fn epoch(&mut self, norm: &Normalizer, batches: &[Vec<&WindowSample>], lr: f64) -> Result<f64, NetError> {
        let mut total = 0.0;
        let mut n = 0usize;
        for batch in batches {
            let wins: Vec<_> = batch.iter().map(|s| &s.window).collect();
            let x = norm.features(&wins);
            self.net.zero_grad();
            let pred = self.net.forward(&x)?;
            let (loss, grad) = loss_and_grad(&pred, &targets(batch, self.head), self.head);
            self.net.backward(&grad)?;
            self.opt.step(&mut self.net, lr);
            total += loss * batch.len() as f64;
            n += batch.len();
        }
        Ok(total / n.max(1) as f64)
    }

    fn validate(&mut self, norm: &Normalizer, val: &[&WindowSample], batch: usize, epoch: usize) -> Result<f64, NetError> {
        let v = mean_loss(&self.net, norm, val, self.head, batch)?;
        // without a validation split every epoch is "best", so the last one is kept
        if v < self.best_val || v.is_nan() {
            self.best_val = v;
            self.best_epoch = epoch;
            self.best = self.net.clone();
        }
        Ok(v)
    }
}

/// Trains on the dataset's train split, selecting the epoch with the lowest
/// validation loss separately for each network.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(DynamicsModel, TrainLog), TrainError> {
    let train_s = dataset.windows(Some(Split::Train), cfg.window, cfg.padding);
    let val_s = dataset.windows(Some(Split::Val), cfg.window, cfg.padding);
    train_windows(&train_s, &val_s, cfg)
}

pub fn train_windows(train_s: &[WindowSample], val_s: &[WindowSample], cfg: &TrainConfig) -> Result<(DynamicsModel, TrainLog), TrainError> {
    if train_s.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut init_rng = stream_rng(cfg.seed, &[0]);
    let mut model = DynamicsModel::new(cfg.architecture, cfg.window, cfg.hidden, &mut init_rng);
    model.normalizer = Normalizer::fit(train_s.iter().map(|s| &s.window));
    let norm = model.normalizer;
    let mut heads = vec![HeadTrainer {
        best: model.translation.clone(),
        net: model.translation.clone(),
        best_val: f64::INFINITY,
        best_epoch: 0,
        opt: Adam::default(),
        head: Head::Translation,
    }];
    if cfg.rotation {
        let r = model.rotation.clone().expect("constructed with rotation");
        heads.push(HeadTrainer {
            best: r.clone(),
            net: r,
            best_val: f64::INFINITY,
            best_epoch: 0,
            opt: Adam::default(),
            head: Head::Rotation,
        });
    }
    let val: Vec<&WindowSample> = val_s.iter().collect();
    let mut order: Vec<&WindowSample> = train_s.iter().collect();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr(epoch);
        order.shuffle(&mut stream_rng(cfg.seed, &[1, epoch as u64]));
        let batches: Vec<Vec<&WindowSample>> = order.chunks(cfg.batch_size.max(1)).map(|c| c.to_vec()).collect();
        let mut entry = EpochLog { epoch, lr, train_translation: 0.0, val_translation: 0.0, train_rotation: 0.0, val_rotation: 0.0 };
        for h in heads.iter_mut() {
            let tr = h.epoch(&norm, &batches, lr)?;
            let v = h.validate(&norm, &val, 1024, epoch)?;
            match h.head {
                Head::Translation => (entry.train_translation, entry.val_translation) = (tr, v),
                Head::Rotation => (entry.train_rotation, entry.val_rotation) = (tr, v),
            }
        }
        log.epochs.push(entry);
    }
    for h in heads {
        match h.head {
            Head::Translation => {
                log.best_translation_epoch = h.best_epoch;
                model.translation = h.best;
            }
            Head::Rotation => {
                log.best_rotation_epoch = h.best_epoch;
                model.rotation = Some(h.best);
            }
        }
    }
    if !cfg.rotation {
        model.rotation = None;
    }
    Ok((model, log))
}

/// Mean squared translation error (m^2) of `model` over `samples`.
pub fn translation_loss(model: &DynamicsModel, samples: &[WindowSample]) -> Result<f64, NetError> {
    let refs: Vec<_> = samples.iter().collect();
    mean_loss(&model.translation, &model.normalizer, &refs, Head::Translation, 1024)
}
