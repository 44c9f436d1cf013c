//! Planar rigid-body poses, body-frame motions and the pose distances used
//! by the learned model and the task objectives.
//!
//! Poses are elements of SE(2) stored as `(x, y, yaw)` with yaw normalized to
//! `(-pi, pi]`. Object motions are always expressed in the body frame of the
//! earlier pose, which is what keeps the learned model pose-invariant.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::scalar::{wrap_angle, Scalar};

/// A world-frame point `[x, y]`.
pub type Point2<S> = [S; 2];

#[inline]
fn rotate<S: Scalar>(yaw: S, p: Point2<S>) -> Point2<S> {
    let (s, c) = yaw.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Object (or target) pose in the plane.
#[derive(Clone, Copy, PartialEq)]
pub struct PlanarPose<S> {
    pub x: S,
    pub y: S,
    yaw: S,
}

/// Relative motion between two poses, in the body frame of the first.
#[derive(Clone, Copy, PartialEq)]
pub struct PlanarMotion<S> {
    pub dx: S,
    pub dy: S,
    dyaw: S,
}

/// A point expressed in an object's body frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ObjectFramePoint<S> {
    pub u: S,
    pub v: S,
}

impl<S: Scalar> PlanarPose<S> {
    pub fn new(x: S, y: S, yaw: S) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn identity() -> Self {
        Self { x: S::zero(), y: S::zero(), yaw: S::zero() }
    }

    #[inline]
    pub fn yaw(&self) -> S {
        self.yaw
    }

    #[inline]
    pub fn position(&self) -> Point2<S> {
        [self.x, self.y]
    }

    /// `self * other`: `other` is interpreted in the frame of `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let t = rotate(self.yaw, other.position());
        Self::new(self.x + t[0], self.y + t[1], self.yaw + other.yaw)
    }

    pub fn inverse(&self) -> Self {
        let t = rotate(-self.yaw, [-self.x, -self.y]);
        Self::new(t[0], t[1], -self.yaw)
    }

    /// Maps a body-frame point to the world frame.
    pub fn transform_point(&self, p: Point2<S>) -> Point2<S> {
        let r = rotate(self.yaw, p);
        [self.x + r[0], self.y + r[1]]
    }

    /// Rotates a body-frame direction into the world frame.
    pub fn rotate_vector(&self, v: Point2<S>) -> Point2<S> {
        rotate(self.yaw, v)
    }

    /// Rotates a world-frame direction into the body frame.
    pub fn unrotate_vector(&self, v: Point2<S>) -> Point2<S> {
        rotate(-self.yaw, v)
    }

    /// Pose reached after applying a body-frame motion.
    pub fn apply(&self, m: &PlanarMotion<S>) -> Self {
        self.compose(&m.as_pose())
    }

    pub fn distance_to(&self, other: &Self) -> S {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

impl<S: Scalar> PlanarMotion<S> {
    pub fn new(dx: S, dy: S, dyaw: S) -> Self {
        Self { dx, dy, dyaw: wrap_angle(dyaw) }
    }

    pub fn zero() -> Self {
        Self { dx: S::zero(), dy: S::zero(), dyaw: S::zero() }
    }

    #[inline]
    pub fn dyaw(&self) -> S {
        self.dyaw
    }

    pub fn as_pose(&self) -> PlanarPose<S> {
        PlanarPose { x: self.dx, y: self.dy, yaw: self.dyaw }
    }

    pub fn translation_norm(&self) -> S {
        self.dx.hypot(self.dy)
    }

    pub fn to_array(&self) -> [S; 3] {
        [self.dx, self.dy, self.dyaw]
    }

    pub fn cast<T: Scalar>(&self) -> PlanarMotion<T> {
        PlanarMotion::new(T::lit(self.dx.to_f64_lossy()), T::lit(self.dy.to_f64_lossy()), T::lit(self.dyaw.to_f64_lossy()))
    }
}

impl<S: Scalar> ObjectFramePoint<S> {
    pub fn new(u: S, v: S) -> Self {
        Self { u, v }
    }

    pub fn zero() -> Self {
        Self { u: S::zero(), v: S::zero() }
    }

    pub fn from_polar(len: S, angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Self { u: len * c, v: len * s }
    }

    pub fn norm(&self) -> S {
        self.u.hypot(self.v)
    }

    pub fn angle(&self) -> S {
        self.v.atan2(self.u)
    }

    pub fn dot(&self, o: &Self) -> S {
        self.u * o.u + self.v * o.v
    }

    /// Rotates the vector by `angle` radians.
    pub fn rotated(&self, angle: S) -> Self {
        let r = rotate(angle, [self.u, self.v]);
        Self { u: r[0], v: r[1] }
    }

    pub fn to_array(&self) -> Point2<S> {
        [self.u, self.v]
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn cast<T: Scalar>(&self) -> ObjectFramePoint<T> {
        ObjectFramePoint::new(T::lit(self.u.to_f64_lossy()), T::lit(self.v.to_f64_lossy()))
    }
}

impl<S: Scalar> Add for ObjectFramePoint<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.u + o.u, self.v + o.v)
    }
}

impl<S: Scalar> Sub for ObjectFramePoint<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.u - o.u, self.v - o.v)
    }
}

impl<S: Scalar> Mul<S> for ObjectFramePoint<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        Self::new(self.u * k, self.v * k)
    }
}

impl<S: Scalar> Neg for ObjectFramePoint<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.u, -self.v)
    }
}

impl<S: Scalar> fmt::Debug for PlanarPose<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlanarPose({:?}, {:?}, {:?})", self.x, self.y, self.yaw)
    }
}

impl<S: Scalar> fmt::Debug for PlanarMotion<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlanarMotion({:?}, {:?}, {:?})", self.dx, self.dy, self.dyaw)
    }
}

impl<S: Scalar> Default for PlanarPose<S> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<S: Scalar> Default for PlanarMotion<S> {
    fn default() -> Self {
        Self::zero()
    }
}

// All poses and motions go to disk as plain `[x, y, yaw]` triples.

impl<S: Scalar + Serialize> Serialize for PlanarPose<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        [self.x, self.y, self.yaw].serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for PlanarPose<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, yaw] = <[S; 3]>::deserialize(d)?;
        Ok(Self::new(x, y, yaw))
    }
}

impl<S: Scalar + Serialize> Serialize for PlanarMotion<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        [self.dx, self.dy, self.dyaw].serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for PlanarMotion<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [dx, dy, dyaw] = <[S; 3]>::deserialize(d)?;
        Ok(Self::new(dx, dy, dyaw))
    }
}

impl<S: Scalar + Serialize> Serialize for ObjectFramePoint<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        [self.u, self.v].serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for ObjectFramePoint<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [u, v] = <[S; 2]>::deserialize(d)?;
        Ok(Self::new(u, v))
    }
}

/// SE(2) group product `a * b`.
pub fn compose<S: Scalar>(a: &PlanarPose<S>, b: &PlanarPose<S>) -> PlanarPose<S> {
    a.compose(b)
}

/// `prev^-1 * curr`, the motion from `prev` to `curr` in the body frame of `prev`.
pub fn relative_motion<S: Scalar>(prev: &PlanarPose<S>, curr: &PlanarPose<S>) -> PlanarMotion<S> {
    let d = rotate(-prev.yaw, [curr.x - prev.x, curr.y - prev.y]);
    PlanarMotion::new(d[0], d[1], curr.yaw - prev.yaw)
}

/// Expresses a world point in the body frame of `object`.
pub fn to_object_frame<S: Scalar>(object: &PlanarPose<S>, world_point: Point2<S>) -> ObjectFramePoint<S> {
    let d = rotate(-object.yaw, [world_point[0] - object.x, world_point[1] - object.y]);
    ObjectFramePoint::new(d[0], d[1])
}

/// Non-oriented angle between two headings, in `[0, pi]`.
///
/// Equal to `min(|t1 - t2|, 2pi - |t1 - t2|)` for headings in `[0, 2pi)` and
/// invariant to adding whole turns to either argument.
pub fn ang_diff<S: Scalar>(t1: S, t2: S) -> S {
    wrap_angle(t1 - t2).abs()
}

/// Squared position distance plus `w_theta` times the squared heading gap.
pub fn pose_diff<S: Scalar>(p1: &PlanarPose<S>, p2: &PlanarPose<S>, w_theta: S) -> S {
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    let dt = ang_diff(p1.yaw, p2.yaw);
    dx * dx + dy * dy + w_theta * dt * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    type Pose = PlanarPose<f64>;

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && ang_diff(a.yaw(), b.yaw()) < tol
    }

    #[test]
    fn compose_examples() {
        let p = Pose::new(0.3, -0.2, 2.0);
        assert!(close(&compose(&Pose::identity(), &p), &p, 1e-15));
        assert!(close(&compose(&p, &p.inverse()), &Pose::identity(), 1e-12));
        // rotating (1,0) by +90 deg gives (0,1); offset by (1,0)
        let r = compose(&Pose::new(1.0, 0.0, FRAC_PI_2), &Pose::new(1.0, 0.0, 0.0));
        assert!(close(&r, &Pose::new(1.0, 1.0, FRAC_PI_2), 1e-12));
    }

    #[test]
    fn relative_motion_examples() {
        let p = Pose::new(0.5, 0.1, -1.0);
        let m = relative_motion(&p, &p);
        assert_eq!(m.to_array(), [0.0, 0.0, 0.0]);
        let m = relative_motion(&Pose::identity(), &Pose::new(0.01, 0.0, 0.1));
        assert!((m.dx - 0.01).abs() < 1e-15 && m.dy.abs() < 1e-15 && (m.dyaw() - 0.1).abs() < 1e-15);
        // world +y is body +x when facing +90 deg
        let m = relative_motion(&Pose::new(0.0, 0.0, FRAC_PI_2), &Pose::new(0.0, 0.01, FRAC_PI_2));
        assert!((m.dx - 0.01).abs() < 1e-15 && m.dy.abs() < 1e-15 && m.dyaw().abs() < 1e-15);
    }

    #[test]
    fn object_frame_examples() {
        let p = to_object_frame(&Pose::identity(), [0.1, 0.0]);
        assert_eq!((p.u, p.v), (0.1, 0.0));
        let obj = Pose::new(0.4, -0.3, 1.3);
        let p = to_object_frame(&obj, [0.4, -0.3]);
        assert_eq!((p.u, p.v), (0.0, 0.0));
        let p = to_object_frame(&Pose::new(0.0, 0.0, FRAC_PI_2), [0.0, 0.1]);
        assert!((p.u - 0.1).abs() < 1e-15 && p.v.abs() < 1e-15);
    }

    #[test]
    fn ang_diff_examples() {
        assert_eq!(ang_diff(1.234, 1.234), 0.0);
        assert!((ang_diff(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
        assert!((ang_diff(0.0, PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn pose_diff_examples() {
        let p = Pose::new(0.2, 0.1, 0.7);
        assert_eq!(pose_diff(&p, &p, 0.025), 0.0);
        let d = pose_diff(&Pose::identity(), &Pose::new(0.1, 0.0, FRAC_PI_2), 0.025);
        let expected = 0.01 + 0.025 * FRAC_PI_2 * FRAC_PI_2;
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.071685).abs() < 1e-6);
        let d = pose_diff(&Pose::identity(), &Pose::new(0.03, 0.04, 1.0), 0.0);
        assert!((d - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn yaw_normalized_on_construction() {
        let p = Pose::new(0.0, 0.0, 3.0 * PI);
        assert!((p.yaw() - PI).abs() < 1e-12);
        let m = PlanarMotion::new(0.0, 0.0, -PI);
        assert_eq!(m.dyaw(), PI);
    }

    #[test]
    fn serializes_as_triple() {
        let p = Pose::new(1.0, 2.0, 0.5);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1.0,2.0,0.5]");
        let back: Pose = serde_json::from_str("[1.0,2.0,0.5]").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn generic_over_f32() {
        let a = PlanarPose::<f32>::new(1.0, 0.0, std::f32::consts::FRAC_PI_2);
        let r = a.compose(&PlanarPose::new(1.0, 0.0, 0.0));
        assert!((r.x - 1.0).abs() < 1e-6 && (r.y - 1.0).abs() < 1e-6);
    }

    fn pose() -> impl Strategy<Value = Pose> {
        (-2.0..2.0f64, -2.0..2.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose::new(x, y, t))
    }

    proptest! {
        #[test]
        fn inverse_is_identity(p in pose()) {
            prop_assert!(close(&compose(&p, &p.inverse()), &Pose::identity(), 1e-12));
            prop_assert!(close(&compose(&p.inverse(), &p), &Pose::identity(), 1e-12));
        }

        #[test]
        fn compose_associative(a in pose(), b in pose(), c in pose()) {
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            prop_assert!(close(&l, &r, 1e-12));
        }

        #[test]
        fn ang_diff_symmetric_and_periodic(a in -20.0..20.0f64, b in -20.0..20.0f64, k in -3i32..4) {
            let d = ang_diff(a, b);
            prop_assert!((0.0..=PI).contains(&d));
            prop_assert!((d - ang_diff(b, a)).abs() < 1e-12);
            prop_assert!((d - ang_diff(a + 2.0 * PI * k as f64, b)).abs() < 1e-12);
        }

        #[test]
        fn ang_diff_matches_min_formula(a in 0.0..(2.0 * PI), b in 0.0..(2.0 * PI)) {
            let raw = (a - b).abs();
            let reference = raw.min(2.0 * PI - raw);
            prop_assert!((ang_diff(a, b) - reference).abs() < 1e-12);
        }

        #[test]
        fn pose_diff_rigid_invariance(p1 in pose(), p2 in pose(), g in pose(), w in 0.0..1.0f64) {
            // common translation leaves everything unchanged
            let shift = Pose::new(g.x, g.y, 0.0);
            let d0 = pose_diff(&p1, &p2, w);
            let d1 = pose_diff(&compose(&shift, &p1), &compose(&shift, &p2), w);
            prop_assert!((d0 - d1).abs() < 1e-12);
            // common rigid motion leaves the position term unchanged
            let e0 = pose_diff(&p1, &p2, 0.0);
            let e1 = pose_diff(&compose(&g, &p1), &compose(&g, &p2), 0.0);
            prop_assert!((e0 - e1).abs() < 1e-10);
        }

        #[test]
        fn relative_motion_round_trip(a in pose(), b in pose()) {
            let m = relative_motion(&a, &b);
            prop_assert!(close(&a.apply(&m), &b, 1e-12));
        }
    }
}
