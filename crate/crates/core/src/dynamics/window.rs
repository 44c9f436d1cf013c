//! History windows: the model's only input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{BodyPoint, Motion};

/// Floats per flattened triple: motion (3), start point (2), push vector (2).
pub const FEATURES_PER_STEP: usize = 7;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window has {got} steps, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("non-finite entry in window")]
    NonFinite,
}

/// A push: pusher start point and push vector in the object frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub ro: BodyPoint,
    pub d_ro: BodyPoint,
}

impl PushAction {
    pub fn new(ro: BodyPoint, d_ro: BodyPoint) -> Self {
        Self { ro, d_ro }
    }

    pub fn magnitude(&self) -> f64 {
        self.d_ro.norm()
    }
}

/// One (motion, start point, push vector) step of the history.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    /// Object motion produced by the previous push.
    pub d_obj: Motion,
    pub ro: BodyPoint,
    pub d_ro: BodyPoint,
}

impl Triple {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn features(&self) -> [f64; FEATURES_PER_STEP] {
        [self.d_obj.dx, self.d_obj.dy, self.d_obj.dyaw(), self.ro.u, self.ro.v, self.d_ro.u, self.d_ro.v]
    }

    pub fn is_finite(&self) -> bool {
        self.features().iter().all(|v| v.is_finite())
    }
}

/// `past` holds the `w - 1` older steps, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryWindow {
    pub past: Vec<Triple>,
    pub current: Triple,
}

impl HistoryWindow {
    pub fn len(&self) -> usize {
        self.past.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, w: usize) -> Result<(), WindowError> {
        if self.len() != w {
            return Err(WindowError::Length { expected: w, got: self.len() });
        }
        if !self.current.is_finite() || !self.past.iter().all(Triple::is_finite) {
            return Err(WindowError::NonFinite);
        }
        Ok(())
    }

    /// Writes the flattened window, oldest step first, into `out`.
    pub fn write_features(&self, out: &mut [f64]) {
        for (chunk, t) in out.chunks_exact_mut(FEATURES_PER_STEP).zip(self.past.iter().chain(std::iter::once(&self.current))) {
            chunk.copy_from_slice(&t.features());
        }
    }

    pub fn features(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len() * FEATURES_PER_STEP];
        self.write_features(&mut v);
        v
    }
}

/// Running history during an episode: the last `w - 1` completed steps plus
/// the motion produced by the latest push.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryContext {
    w: usize,
    past: Vec<Triple>,
    last_motion: Motion,
}

impl HistoryContext {
    /// Empty history, zero-padded.
    pub fn new(w: usize) -> Self {
        assert!(w >= 1, "window length must be at least 1");
        Self { w, past: vec![Triple::zero(); w - 1], last_motion: Motion::zero() }
    }

    pub fn window_len(&self) -> usize {
        self.w
    }

    pub fn last_motion(&self) -> Motion {
        self.last_motion
    }

    /// The window that would be fed to the model if `ro`/`d_ro` were executed next.
    pub fn window_with(&self, ro: BodyPoint, d_ro: BodyPoint) -> HistoryWindow {
        HistoryWindow { past: self.past.clone(), current: Triple { d_obj: self.last_motion, ro, d_ro } }
    }

    /// Records an executed push and the motion it produced.
    pub fn advance(&mut self, ro: BodyPoint, d_ro: BodyPoint, realized: Motion) {
        if self.w > 1 {
            self.past.remove(0);
            self.past.push(Triple { d_obj: self.last_motion, ro, d_ro });
        }
        self.last_motion = realized;
    }
}
