//! The dual push-dynamics networks and their baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::window::{HistoryWindow, FEATURES_PER_STEP};
use crate::net::layers::{DenseCache, GruStepCache, LstmStepCache};
use crate::net::tensor::Tensor2;
use crate::net::{Activation, Checkpoint, Dense, Gru, HasParams, Lstm, NetError, Param};
use crate::scalar::{wrap_angle, Scalar};
use crate::Motion;

/// Hidden width of every branch.
pub const HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Current triple through a dense branch, history through a GRU, merged by a dense trunk.
    Gru,
    /// Current triple only.
    NoHistory,
    /// Whole window through two stacked LSTM layers and a linear head.
    Lstm,
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gru" => Ok(Self::Gru),
            "no_history" | "no-history" => Ok(Self::NoHistory),
            "lstm" => Ok(Self::Lstm),
            _ => Err(format!("unknown architecture {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Body<S: Scalar> {
    Gru { current: Dense<S>, history: Gru<S>, trunk1: Dense<S>, trunk2: Dense<S>, head: Dense<S> },
    NoHistory { current: Dense<S>, trunk1: Dense<S>, trunk2: Dense<S>, head: Dense<S> },
    Lstm { layer1: Lstm<S>, layer2: Lstm<S>, head: Dense<S> },
}

#[derive(Clone, Debug)]
enum Cache<S: Scalar> {
    Gru { current: DenseCache<S>, history: Vec<GruStepCache<S>>, trunk1: DenseCache<S>, trunk2: DenseCache<S>, head: DenseCache<S> },
    NoHistory { current: DenseCache<S>, trunk1: DenseCache<S>, trunk2: DenseCache<S>, head: DenseCache<S> },
    Lstm { layer1: Vec<LstmStepCache<S>>, layer2: Vec<LstmStepCache<S>>, head: DenseCache<S> },
}

/// One network head: maps a flattened window (`w * 7` features) to `outputs` values.
#[derive(Clone, Debug)]
pub struct DynNet<S: Scalar> {
    arch: Architecture,
    window: usize,
    outputs: usize,
    body: Body<S>,
    cache: Option<Cache<S>>,
}

impl<S: Scalar> PartialEq for DynNet<S> {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.window == other.window && self.outputs == other.outputs && self.body == other.body
    }
}

fn step_inputs<S: Scalar>(x: &Tensor2<S>, range: std::ops::Range<usize>) -> Vec<Tensor2<S>> {
    range.map(|k| x.columns(k * FEATURES_PER_STEP, FEATURES_PER_STEP)).collect()
}

impl<S: Scalar> DynNet<S> {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, window: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        assert!(window >= 1);
        let f = FEATURES_PER_STEP;
        let body = match arch {
            Architecture::Gru => Body::Gru {
                current: Dense::new(f, hidden, Activation::Relu, rng),
                history: Gru::new(f, hidden, rng),
                trunk1: Dense::new(2 * hidden, hidden, Activation::Relu, rng),
                trunk2: Dense::new(hidden, hidden, Activation::Relu, rng),
                head: Dense::new(hidden, outputs, Activation::None, rng),
            },
            Architecture::NoHistory => Body::NoHistory {
                current: Dense::new(f, hidden, Activation::Relu, rng),
                trunk1: Dense::new(hidden, hidden, Activation::Relu, rng),
                trunk2: Dense::new(hidden, hidden, Activation::Relu, rng),
                head: Dense::new(hidden, outputs, Activation::None, rng),
            },
            Architecture::Lstm => Body::Lstm {
                layer1: Lstm::new(f, hidden, rng),
                layer2: Lstm::new(hidden, hidden, rng),
                head: Dense::new(hidden, outputs, Activation::None, rng),
            },
        };
        Self { arch, window, outputs, body, cache: None }
    }

    /// Same shapes with every parameter zero.
    pub fn zeroed(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut("", &mut |_, p| p.value.fill(S::zero()));
        z.cache = None;
        z
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn check_input(&self, x: &Tensor2<S>) -> Result<(), NetError> {
        let cols = self.window * FEATURES_PER_STEP;
        if x.cols() != cols {
            return Err(NetError::ShapeMismatch { expected: (x.rows(), cols), got: x.shape() });
        }
        Ok(())
    }

    fn run(&self, x: &Tensor2<S>) -> Result<(Tensor2<S>, Cache<S>), NetError> {
        self.check_input(x)?;
        let w = self.window;
        let cur = x.columns((w - 1) * FEATURES_PER_STEP, FEATURES_PER_STEP);
        match &self.body {
            Body::Gru { current, history, trunk1, trunk2, head } => {
                let (a, c_cur) = current.forward(&cur)?;
                let h0 = Tensor2::zeros(x.rows(), history.hidden_dim());
                let (h, c_hist) = history.forward_seq(&step_inputs(x, 0..w - 1), h0)?;
                let (t1, c1) = trunk1.forward(&Tensor2::hcat(&[&a, &h]))?;
                let (t2, c2) = trunk2.forward(&t1)?;
                let (y, ch) = head.forward(&t2)?;
                Ok((y, Cache::Gru { current: c_cur, history: c_hist, trunk1: c1, trunk2: c2, head: ch }))
            }
            Body::NoHistory { current, trunk1, trunk2, head } => {
                let (a, c_cur) = current.forward(&cur)?;
                let (t1, c1) = trunk1.forward(&a)?;
                let (t2, c2) = trunk2.forward(&t1)?;
                let (y, ch) = head.forward(&t2)?;
                Ok((y, Cache::NoHistory { current: c_cur, trunk1: c1, trunk2: c2, head: ch }))
            }
            Body::Lstm { layer1, layer2, head } => {
                let (hs1, c1) = layer1.forward_seq(&step_inputs(x, 0..w))?;
                let (hs2, c2) = layer2.forward_seq(&hs1)?;
                let (y, ch) = head.forward(hs2.last().expect("window >= 1"))?;
                Ok((y, Cache::Lstm { layer1: c1, layer2: c2, head: ch }))
            }
        }
    }

    /// Inference without keeping activations.
    pub fn predict(&self, x: &Tensor2<S>) -> Result<Tensor2<S>, NetError> {
        Ok(self.run(x)?.0)
    }

    /// Forward pass that records activations for [`Self::backward`].
    pub fn forward(&mut self, x: &Tensor2<S>) -> Result<Tensor2<S>, NetError> {
        let (y, cache) = self.run(x)?;
        self.cache = Some(cache);
        Ok(y)
    }

    /// Accumulates parameter gradients for the output gradient `dy` of the
    /// last [`Self::forward`]. Consumes the recorded activations.
    pub fn backward(&mut self, dy: &Tensor2<S>) -> Result<(), NetError> {
        let cache = self.cache.take().ok_or(NetError::GraphNotEvaluated)?;
        match (&mut self.body, cache) {
            (
                Body::Gru { current, history, trunk1, trunk2, head },
                Cache::Gru { current: cc, history: ch, trunk1: c1, trunk2: c2, head: chd },
            ) => {
                let d = head.backward(&chd, dy);
                let d = trunk2.backward(&c2, &d);
                let d = trunk1.backward(&c1, &d);
                let m = current.output_dim();
                current.backward(&cc, &d.columns(0, m));
                history.backward_seq(&ch, &d.columns(m, m));
            }
            (Body::NoHistory { current, trunk1, trunk2, head }, Cache::NoHistory { current: cc, trunk1: c1, trunk2: c2, head: chd }) => {
                let d = head.backward(&chd, dy);
                let d = trunk2.backward(&c2, &d);
                let d = trunk1.backward(&c1, &d);
                current.backward(&cc, &d);
            }
            (Body::Lstm { layer1, layer2, head }, Cache::Lstm { layer1: c1, layer2: c2, head: chd }) => {
                let d_last = head.backward(&chd, dy);
                let m = layer2.hidden_dim();
                let mut dhs = vec![Tensor2::zeros(dy.rows(), m); c2.len()];
                *dhs.last_mut().expect("window >= 1") = d_last;
                let d1 = layer2.backward_seq(&c2, &dhs);
                layer1.backward_seq(&c1, &d1);
            }
            _ => unreachable!("cache built by the same body"),
        }
        Ok(())
    }

    /// GRU summary of the history part of a single normalized window
    /// (`None` for architectures without a separate history branch).
    pub fn history_state(&self, x: &[S]) -> Option<Vec<S>> {
        let Body::Gru { history, .. } = &self.body else { return None };
        let x = Tensor2::row_vector(x);
        let h0 = Tensor2::zeros(1, history.hidden_dim());
        let (h, _) = history.forward_seq(&step_inputs(&x, 0..self.window - 1), h0).ok()?;
        Some(h.into_vec())
    }
}

impl<S: Scalar> HasParams<S> for DynNet<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param<S>)) {
        match &self.body {
            Body::Gru { current, history, trunk1, trunk2, head } => {
                current.visit(&format!("{prefix}current"), f);
                history.visit(&format!("{prefix}history"), f);
                trunk1.visit(&format!("{prefix}trunk1"), f);
                trunk2.visit(&format!("{prefix}trunk2"), f);
                head.visit(&format!("{prefix}head"), f);
            }
            Body::NoHistory { current, trunk1, trunk2, head } => {
                current.visit(&format!("{prefix}current"), f);
                trunk1.visit(&format!("{prefix}trunk1"), f);
                trunk2.visit(&format!("{prefix}trunk2"), f);
                head.visit(&format!("{prefix}head"), f);
            }
            Body::Lstm { layer1, layer2, head } => {
                layer1.visit(&format!("{prefix}lstm1"), f);
                layer2.visit(&format!("{prefix}lstm2"), f);
                head.visit(&format!("{prefix}head"), f);
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param<S>)) {
        match &mut self.body {
            Body::Gru { current, history, trunk1, trunk2, head } => {
                current.visit_mut(&format!("{prefix}current"), f);
                history.visit_mut(&format!("{prefix}history"), f);
                trunk1.visit_mut(&format!("{prefix}trunk1"), f);
                trunk2.visit_mut(&format!("{prefix}trunk2"), f);
                head.visit_mut(&format!("{prefix}head"), f);
            }
            Body::NoHistory { current, trunk1, trunk2, head } => {
                current.visit_mut(&format!("{prefix}current"), f);
                trunk1.visit_mut(&format!("{prefix}trunk1"), f);
                trunk2.visit_mut(&format!("{prefix}trunk2"), f);
                head.visit_mut(&format!("{prefix}head"), f);
            }
            Body::Lstm { layer1, layer2, head } => {
                layer1.visit_mut(&format!("{prefix}lstm1"), f);
                layer2.visit_mut(&format!("{prefix}lstm2"), f);
                head.visit_mut(&format!("{prefix}head"), f);
            }
        }
    }
}

/// Per-feature affine input normalization, shared by every step of a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; FEATURES_PER_STEP],
    pub std: [f64; FEATURES_PER_STEP],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self { mean: [0.0; FEATURES_PER_STEP], std: [1.0; FEATURES_PER_STEP] }
    }
}

impl Normalizer {
    /// Statistics of the current triples of `windows`.
    pub fn fit<'a>(windows: impl Iterator<Item = &'a HistoryWindow>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; FEATURES_PER_STEP];
        let mut sq = [0.0; FEATURES_PER_STEP];
        for w in windows {
            let f = w.current.features();
            for i in 0..FEATURES_PER_STEP {
                sum[i] += f[i];
                sq[i] += f[i] * f[i];
            }
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        let mut out = Self::default();
        for i in 0..FEATURES_PER_STEP {
            out.mean[i] = sum[i] / n as f64;
            let var = (sq[i] / n as f64 - out.mean[i] * out.mean[i]).max(0.0);
            out.std[i] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        out
    }

    /// Normalized feature matrix, one row per window.
    pub fn features(&self, windows: &[&HistoryWindow]) -> Tensor2<f64> {
        let w = windows.first().map_or(1, |x| x.len());
        let mut t = Tensor2::zeros(windows.len(), w * FEATURES_PER_STEP);
        for (i, win) in windows.iter().enumerate() {
            let row = t.row_mut(i);
            win.write_features(row);
            for (j, v) in row.iter_mut().enumerate() {
                let k = j % FEATURES_PER_STEP;
                *v = (*v - self.mean[k]) / self.std[k];
            }
        }
        t
    }
}

/// Output scaling: networks predict centimetres and decaradians.
pub const TRANSLATION_SCALE: f64 = 100.0;
pub const ROTATION_SCALE: f64 = 10.0;

/// Translation and rotation networks with their input normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsModel {
    pub translation: DynNet<f64>,
    /// `None` for translation-only models.
    pub rotation: Option<DynNet<f64>>,
    pub normalizer: Normalizer,
}

impl DynamicsModel {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, window: usize, hidden: usize, rng: &mut R) -> Self {
        let translation = DynNet::new(arch, window, hidden, 2, rng);
        let rotation = Some(DynNet::new(arch, window, hidden, 1, rng));
        Self { translation, rotation, normalizer: Normalizer::default() }
    }

    pub fn architecture(&self) -> Architecture {
        self.translation.architecture()
    }

    pub fn window(&self) -> usize {
        self.translation.window()
    }

    /// One-step prediction for every window.
    pub fn predict_batch(&self, windows: &[&HistoryWindow]) -> Result<Vec<Motion>, NetError> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        for w in windows {
            if w.len() != self.window() {
                return Err(NetError::ShapeMismatch { expected: (1, self.window()), got: (1, w.len()) });
            }
        }
        let x = self.normalizer.features(windows);
        let t = self.translation.predict(&x)?;
        let r = match &self.rotation {
            Some(net) => Some(net.predict(&x)?),
            None => None,
        };
        Ok((0..windows.len())
            .map(|i| {
                let dyaw = r.as_ref().map_or(0.0, |r| wrap_angle(r.get(i, 0) / ROTATION_SCALE));
                Motion::new(t.get(i, 0) / TRANSLATION_SCALE, t.get(i, 1) / TRANSLATION_SCALE, dyaw)
            })
            .collect())
    }

    pub fn predict(&self, window: &HistoryWindow) -> Result<Motion, NetError> {
        Ok(self.predict_batch(&[window])?[0])
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let meta = serde_json::json!({
            "kind": "push_dynamics",
            "architecture": self.architecture(),
            "window": self.window(),
            "hidden": self.hidden(),
            "has_rotation": self.rotation.is_some(),
            "normalizer": self.normalizer,
            "translation_scale": TRANSLATION_SCALE,
            "rotation_scale": ROTATION_SCALE,
            "extra": extra,
        });
        let mut ck = Checkpoint::new(meta);
        ck.add_model("translation.", &self.translation);
        if let Some(r) = &self.rotation {
            ck.add_model("rotation.", r);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NetError> {
        let bad = |what: &str| NetError::Checkpoint(format!("manifest: missing or invalid {what}"));
        let meta = &ck.meta;
        if meta.get("kind").and_then(|v| v.as_str()) != Some("push_dynamics") {
            return Err(bad("kind"));
        }
        let arch: Architecture = serde_json::from_value(meta["architecture"].clone()).map_err(|_| bad("architecture"))?;
        let window = meta["window"].as_u64().ok_or_else(|| bad("window"))? as usize;
        let hidden = meta["hidden"].as_u64().ok_or_else(|| bad("hidden"))? as usize;
        let has_rot = meta["has_rotation"].as_bool().ok_or_else(|| bad("has_rotation"))?;
        let normalizer: Normalizer = serde_json::from_value(meta["normalizer"].clone()).map_err(|_| bad("normalizer"))?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut translation = DynNet::new(arch, window, hidden, 2, &mut rng);
        ck.load_model("translation.", &mut translation)?;
        let rotation = if has_rot {
            let mut r = DynNet::new(arch, window, hidden, 1, &mut rng);
            ck.load_model("rotation.", &mut r)?;
            Some(r)
        } else {
            None
        };
        Ok(Self { translation, rotation, normalizer })
    }

    pub fn save(&self, path: &std::path::Path, extra: serde_json::Value) -> Result<(), NetError> {
        self.to_checkpoint(extra).save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NetError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn hidden(&self) -> usize {
        let mut h = 0;
        self.translation.visit("", &mut |name, p| {
            if h == 0 && name.ends_with("head.weight") {
                h = p.value.cols();
            }
        });
        h
    }
}
