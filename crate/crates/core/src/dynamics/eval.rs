//! One-step, teacher-forced prediction error.

use serde::{Deserialize, Serialize};

use super::model::DynamicsModel;
use super::window::HistoryWindow;
use crate::data::{SizeClass, WindowSample};
use crate::net::NetError;
use crate::se2::ang_diff;
use crate::Motion;

/// Anything that maps windows to predicted motions.
pub trait MotionPredictor: Sync {
    fn predict_batch(&self, windows: &[&HistoryWindow]) -> Result<Vec<Motion>, NetError>;
}

impl MotionPredictor for DynamicsModel {
    fn predict_batch(&self, windows: &[&HistoryWindow]) -> Result<Vec<Motion>, NetError> {
        DynamicsModel::predict_batch(self, windows)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN, count: 0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt(), count: values.len() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Euclidean translation error, metres.
    pub position: ErrorStats,
    /// Unsigned wrapped angle error, radians.
    pub orientation: ErrorStats,
}

/// Evaluates `model` on `samples`, optionally restricted to a push-size class.
pub fn evaluate<P: MotionPredictor + ?Sized>(
    model: &P,
    samples: &[WindowSample],
    subset: Option<SizeClass>,
) -> Result<EvalReport, NetError> {
    let chosen: Vec<&WindowSample> = samples.iter().filter(|s| subset.is_none_or(|c| s.size_class() == c)).collect();
    let mut pos = Vec::with_capacity(chosen.len());
    let mut ori = Vec::with_capacity(chosen.len());
    for chunk in chosen.chunks(1024) {
        let wins: Vec<_> = chunk.iter().map(|s| &s.window).collect();
        for (p, s) in model.predict_batch(&wins)?.iter().zip(chunk) {
            pos.push((p.dx - s.target.dx).hypot(p.dy - s.target.dy));
            ori.push(ang_diff(p.dyaw(), s.target.dyaw()));
        }
    }
    Ok(EvalReport { position: ErrorStats::of(&pos), orientation: ErrorStats::of(&ori) })
}
