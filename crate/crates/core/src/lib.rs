//! Planar pushing with learned dynamics and sampling-based predictive control.

pub mod bench;
pub mod ctrl;
pub mod data;
pub mod dynamics;
pub mod geom;
pub mod net;
pub mod perimeter;
pub mod rng;
pub mod scalar;
pub mod se2;
pub mod sim;
pub mod tasks;

pub use scalar::Scalar;

/// Object pose in the plane, double precision.
pub type Pose = se2::PlanarPose<f64>;
/// Body-frame object motion, double precision.
pub type Motion = se2::PlanarMotion<f64>;
/// Point or vector in an object's body frame, double precision.
pub type BodyPoint = se2::ObjectFramePoint<f64>;
