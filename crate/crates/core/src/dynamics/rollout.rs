//! Autoregressive multi-step prediction under a repeated (or slowly
//! turning) push.

use serde::{Deserialize, Serialize};

use super::eval::MotionPredictor;
use super::window::{HistoryContext, PushAction};
use crate::net::NetError;
use crate::perimeter::Perimeter;
use crate::se2::to_object_frame;
use crate::{Motion, Pose};

/// How the start point evolves between rollout steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoMode {
    /// Re-express the previous start point after the predicted motion and
    /// snap it back onto its face of the sampling perimeter.
    #[default]
    Tracked,
    /// Keep the body-frame start point unchanged.
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutStep {
    pub action: PushAction,
    pub motion: Motion,
}

fn advance_action(prev: PushAction, motion: Motion, perimeter: &Perimeter, mode: RoMode) -> PushAction {
    let ro = match mode {
        RoMode::Frozen => prev.ro,
        RoMode::Tracked => {
            let face = perimeter.face_of(prev.ro);
            perimeter.project(face, to_object_frame(&motion.as_pose(), prev.ro.to_array()))
        }
    };
    PushAction { ro, d_ro: prev.d_ro }
}

/// Rolls every action out for `horizon` steps in one batch per step.
///
/// With `deltas`, the push direction at step `k` is the step `k - 1`
/// direction rotated by `deltas[i][k]` (step 0 rotates the action itself).
pub fn rollout_batch<P: MotionPredictor + ?Sized>(
    model: &P,
    ctx: &HistoryContext,
    actions: &[PushAction],
    horizon: usize,
    deltas: Option<&[Vec<f64>]>,
    mode: RoMode,
    perimeter: &Perimeter,
) -> Result<Vec<Vec<RolloutStep>>, NetError> {
    assert!(horizon >= 1, "horizon must be at least 1");
    let turn = |i: usize, k: usize, a: PushAction| match deltas {
        Some(d) => PushAction { ro: a.ro, d_ro: a.d_ro.rotated(d[i].get(k).copied().unwrap_or(0.0)) },
        None => a,
    };
    let mut ctxs: Vec<HistoryContext> = vec![ctx.clone(); actions.len()];
    let mut current: Vec<PushAction> = actions.iter().enumerate().map(|(i, &a)| turn(i, 0, a)).collect();
    let mut out: Vec<Vec<RolloutStep>> = vec![Vec::with_capacity(horizon); actions.len()];
    for k in 0..horizon {
        let windows: Vec<_> = ctxs.iter().zip(&current).map(|(c, a)| c.window_with(a.ro, a.d_ro)).collect();
        let refs: Vec<_> = windows.iter().collect();
        let motions = model.predict_batch(&refs)?;
        for i in 0..actions.len() {
            let a = current[i];
            out[i].push(RolloutStep { action: a, motion: motions[i] });
            if k + 1 < horizon {
                ctxs[i].advance(a.ro, a.d_ro, motions[i]);
                current[i] = turn(i, k + 1, advance_action(a, motions[i], perimeter, mode));
            }
        }
    }
    Ok(out)
}

/// Single-action rollout returning the predicted motions.
pub fn rollout<P: MotionPredictor + ?Sized>(
    model: &P,
    ctx: &HistoryContext,
    action: PushAction,
    horizon: usize,
    deltas: Option<&[f64]>,
    mode: RoMode,
    perimeter: &Perimeter,
) -> Result<Vec<Motion>, NetError> {
    let d = deltas.map(|d| vec![d.to_vec()]);
    let steps = rollout_batch(model, ctx, &[action], horizon, d.as_deref(), mode, perimeter)?;
    Ok(steps.into_iter().next().expect("one action").into_iter().map(|s| s.motion).collect())
}

/// World poses after each motion, starting from `start`.
pub fn integrate(start: Pose, motions: impl IntoIterator<Item = Motion>) -> Vec<Pose> {
    let mut pose = start;
    motions
        .into_iter()
        .map(|m| {
            pose = pose.apply(&m);
            pose
        })
        .collect()
}
