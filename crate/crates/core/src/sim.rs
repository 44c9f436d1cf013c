//! Quasi-static single-point pushing of a rectangular object.
//!
//! The object's frictional response is modelled by an ellipsoidal limit
//! surface centred at the centre of mass, with the torque/force ratio taken
//! as the mean lever arm of a uniform pressure distribution over the
//! footprint. At every substep the pusher disk is advanced along the push
//! direction; if it penetrates the object, the contact is classified as
//! sticking or sliding with the motion-cone test and the object is displaced
//! by the corresponding twist, scaled to cancel the penetration.
//!
//! A push command starts with the pusher at `start` (in the body frame of
//! the object at push time). The pusher first travels along the push
//! direction until it touches the object, then advances by `|delta|`.
//! Commands whose ray misses the object leave it in place.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{box_closest, box_distance, mean_distance_over_box, ray_contact};
use crate::se2::{relative_motion, Point2};
use crate::{BodyPoint, Motion, Pose};

/// Radius of the spherical pusher tip (1.25 cm).
pub const PUSHER_RADIUS: f64 = 0.0125;
/// Allowed residual penetration between pusher and object.
pub const CONTACT_TOLERANCE: f64 = 1e-6;
/// Default integration step along the push.
pub const DEFAULT_SUBSTEP: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid push command: {0}")]
    InvalidCommand(String),
}

/// Physical parameters of one object instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub friction: f64,
    pub restitution: f64,
    /// Side length along the body x axis.
    pub length: f64,
    /// Side length along the body y axis.
    pub width: f64,
    pub mass: f64,
    /// Centre of mass relative to the geometric centre, body frame.
    pub com_offset: [f64; 2],
}

impl ObjectParams {
    /// Centre of every randomization range, with the centre of mass at the
    /// geometric centre.
    pub fn midpoint() -> Self {
        Self { friction: 0.6, restitution: 0.5, length: 0.12, width: 0.10, mass: 0.5, com_offset: [0.0, 0.0] }
    }

    pub fn half_extents(&self) -> [f64; 2] {
        [0.5 * self.length, 0.5 * self.width]
    }

    pub fn dims(&self) -> ObjectDims {
        ObjectDims { length: self.length, width: self.width }
    }
}

/// The part of the object description a controller is allowed to know.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDims {
    pub length: f64,
    pub width: f64,
}

impl ObjectDims {
    pub fn half_extents(&self) -> [f64; 2] {
        [0.5 * self.length, 0.5 * self.width]
    }
}

/// Uniform ranges used for domain randomization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizationRanges {
    pub friction: [f64; 2],
    pub restitution: [f64; 2],
    pub length: [f64; 2],
    pub width: [f64; 2],
    pub mass: [f64; 2],
    /// Centre-of-mass offset box as a fraction of each half extent.
    pub com_fraction: f64,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self {
            friction: [0.5, 0.7],
            restitution: [0.4, 0.6],
            length: [0.11, 0.13],
            width: [0.09, 0.11],
            mass: [0.3, 0.7],
            com_fraction: 0.1,
        }
    }
}

impl RandomizationRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ObjectParams {
        let mut uni = |r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..=r[1]) } else { r[0] };
        let friction = uni(self.friction);
        let restitution = uni(self.restitution);
        let length = uni(self.length);
        let width = uni(self.width);
        let mass = uni(self.mass);
        let fx = self.com_fraction * 0.5 * length;
        let fy = self.com_fraction * 0.5 * width;
        let com_offset = [uni([-fx, fx]), uni([-fy, fy])];
        ObjectParams { friction, restitution, length, width, mass, com_offset }
    }
}

/// Draws domain-randomized parameters from the default ranges.
pub fn sample_object_params(rng_seed: u64) -> ObjectParams {
    RandomizationRanges::default().sample(&mut ChaCha8Rng::seed_from_u64(rng_seed))
}

/// Which coefficient sets the pusher-object friction cone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionWiring {
    /// The randomized `friction` parameter is the pusher-object coefficient.
    PusherObject,
    /// `friction` is the object-surface coefficient (kinematically inert in
    /// the quasi-static model); the pusher-object coefficient is fixed.
    ObjectSurface { pusher_object: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub pusher_radius: f64,
    pub contact_tolerance: f64,
    pub substep: f64,
    pub friction_wiring: FrictionWiring,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pusher_radius: PUSHER_RADIUS,
            contact_tolerance: CONTACT_TOLERANCE,
            substep: DEFAULT_SUBSTEP,
            friction_wiring: FrictionWiring::PusherObject,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub object_pose: Pose,
    pub pusher_pos: Point2<f64>,
    pub params: ObjectParams,
}

/// A push: start point and push vector, both in the object frame at push time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushCommand {
    pub start: BodyPoint,
    pub delta: BodyPoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushOutcome {
    pub state: WorldState,
    /// Net object motion in the body frame of the pre-push pose.
    pub motion: Motion,
    /// World position where the pusher started.
    pub pusher_start: Point2<f64>,
    /// Free travel before first contact; `None` when the push missed.
    pub approach: Option<f64>,
}

/// Diagnostics for one substep in contact.
#[derive(Clone, Copy, Debug)]
pub struct ContactEvent {
    /// Inward contact normal, world frame.
    pub normal: Point2<f64>,
    /// Displacement of the centre of mass over the substep, world frame.
    pub com_displacement: Point2<f64>,
    pub sliding: bool,
}

/// `true` iff a pusher centred at `candidate` (object frame) overlaps the object.
pub fn pusher_collides(params: &ObjectParams, candidate: BodyPoint) -> bool {
    let [hx, hy] = params.half_extents();
    box_distance([candidate.u, candidate.v], hx, hy) < PUSHER_RADIUS
}

#[derive(Clone, Debug, Default)]
pub struct Simulator {
    pub cfg: SimConfig,
}

struct Body {
    hx: f64,
    hy: f64,
    com: Point2<f64>,
    c2: f64,
    mu: f64,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Self {
        Self { cfg }
    }

    fn pusher_object_friction(&self, params: &ObjectParams) -> f64 {
        match self.cfg.friction_wiring {
            FrictionWiring::PusherObject => params.friction,
            FrictionWiring::ObjectSurface { pusher_object } => pusher_object,
        }
    }

    pub fn step_push(&self, state: &WorldState, cmd: &PushCommand) -> Result<PushOutcome, SimError> {
        self.step_push_with_substep(state, cmd, self.cfg.substep)
    }

    pub fn step_push_with_substep(&self, state: &WorldState, cmd: &PushCommand, substep: f64) -> Result<PushOutcome, SimError> {
        self.run(state, cmd, substep, &mut |_| {})
    }

    /// Like [`Self::step_push_with_substep`], reporting every substep in contact.
    pub fn step_push_traced(
        &self,
        state: &WorldState,
        cmd: &PushCommand,
        substep: f64,
        on_contact: &mut dyn FnMut(&ContactEvent),
    ) -> Result<PushOutcome, SimError> {
        self.run(state, cmd, substep, on_contact)
    }

    fn run(
        &self,
        state: &WorldState,
        cmd: &PushCommand,
        substep: f64,
        on_contact: &mut dyn FnMut(&ContactEvent),
    ) -> Result<PushOutcome, SimError> {
        if !(substep > 0.0) {
            return Err(SimError::InvalidCommand(format!("substep must be positive, got {substep}")));
        }
        if !cmd.start.is_finite() || !cmd.delta.is_finite() {
            return Err(SimError::InvalidCommand("non-finite command".into()));
        }
        let params = state.params;
        let [hx, hy] = params.half_extents();
        let rp = self.cfg.pusher_radius;
        let start_gap = box_distance([cmd.start.u, cmd.start.v], hx, hy);
        if start_gap < rp - self.cfg.contact_tolerance {
            return Err(SimError::InvalidCommand(format!("pusher start penetrates the object by {:.3e} m", rp - start_gap)));
        }
        let origin = state.object_pose;
        let pusher_start = origin.transform_point(cmd.start.to_array());
        let mag = cmd.delta.norm();
        if mag == 0.0 {
            let state = WorldState { pusher_pos: pusher_start, ..*state };
            return Ok(PushOutcome { state, motion: Motion::zero(), pusher_start, approach: Some(0.0) });
        }
        let dir_body = [cmd.delta.u / mag, cmd.delta.v / mag];
        let dir = origin.rotate_vector(dir_body);

        let Some(approach) = ray_contact(cmd.start.to_array(), dir_body, hx, hy, rp) else {
            let end = [pusher_start[0] + dir[0] * mag, pusher_start[1] + dir[1] * mag];
            let state = WorldState { pusher_pos: end, ..*state };
            return Ok(PushOutcome { state, motion: Motion::zero(), pusher_start, approach: None });
        };

        let com = params.com_offset;
        let lever = mean_distance_over_box(hx, hy, com);
        let body = Body { hx, hy, com, c2: lever * lever, mu: self.pusher_object_friction(&params) };

        let n_steps = (mag / substep).ceil().max(1.0) as usize;
        let ds = mag / n_steps as f64;
        let step = [dir[0] * ds, dir[1] * ds];
        let mut pose = origin;
        let mut pusher = pusher_start;
        for i in 1..=n_steps {
            let travel = approach + mag * i as f64 / n_steps as f64;
            pusher = [pusher_start[0] + dir[0] * travel, pusher_start[1] + dir[1] * travel];
            pose = self.resolve_contact(&body, pose, pusher, step, on_contact);
        }
        let motion = relative_motion(&origin, &pose);
        let state = WorldState { object_pose: pose, pusher_pos: pusher, params };
        Ok(PushOutcome { state, motion, pusher_start, approach: Some(approach) })
    }

    /// Moves the object out of the pusher disk at `pusher` (world), given
    /// that the pusher just advanced by `step` (world).
    ///
    /// The twist direction is taken at the midpoint configuration (pusher
    /// half way through the step, object resolved by an Euler predictor),
    /// which makes the integrator second order in the substep.
    fn resolve_contact(
        &self,
        body: &Body,
        pose: Pose,
        pusher: Point2<f64>,
        step: Point2<f64>,
        on_contact: &mut dyn FnMut(&ContactEvent),
    ) -> Pose {
        let rp = self.cfg.pusher_radius;
        let q = crate::se2::to_object_frame(&pose, pusher).to_array();
        let dist = box_distance(q, body.hx, body.hy);
        if rp - dist <= 0.0 {
            return pose;
        }
        let (euler, sliding, normal) = self.twist_direction(body, &pose, pusher, step);
        let half = [pusher[0] - 0.5 * step[0], pusher[1] - 0.5 * step[1]];
        let mut twist = euler;
        let mut sliding = sliding;
        if self.penetration(body, &pose, half) > 0.0 {
            let mid = self.scale_to_contact(body, pose, half, euler);
            let (t, s, _) = self.twist_direction(body, &mid, half, step);
            // re-express the midpoint twist in the current body frame
            let (sn, cs) = (mid.yaw() - pose.yaw()).sin_cos();
            twist = [cs * t[0] - sn * t[1], sn * t[0] + cs * t[1], t[2]];
            sliding = s;
        }
        let next = self.scale_to_contact(body, pose, pusher, twist);

        let com_before = pose.transform_point(body.com);
        let com_after = next.transform_point(body.com);
        on_contact(&ContactEvent {
            normal: pose.rotate_vector(normal),
            com_displacement: [com_after[0] - com_before[0], com_after[1] - com_before[1]],
            sliding,
        });
        next
    }

    fn penetration(&self, body: &Body, pose: &Pose, pusher: Point2<f64>) -> f64 {
        let q = crate::se2::to_object_frame(pose, pusher).to_array();
        self.cfg.pusher_radius - box_distance(q, body.hx, body.hy)
    }

    /// Unscaled body twist for a pusher at `pusher` moving along `step`
    /// (world), the sliding flag and the inward contact normal (body).
    fn twist_direction(&self, body: &Body, pose: &Pose, pusher: Point2<f64>, step: Point2<f64>) -> ([f64; 3], bool, Point2<f64>) {
        let q = crate::se2::to_object_frame(pose, pusher).to_array();
        let dist = box_distance(q, body.hx, body.hy);
        let (contact, normal) = contact_geometry(q, body.hx, body.hy, dist);
        let v = pose.unrotate_vector(step);
        let r = [contact[0] - body.com[0], contact[1] - body.com[1]];
        let (twist, sliding) = motion_cone_twist(r, normal, v, body.c2, body.mu);
        if normal_contact_speed(twist, r, normal) > 1e-300 {
            (twist, sliding, normal)
        } else {
            // degenerate approach direction: frictionless normal push
            (force_twist(normal, r, body.c2), sliding, normal)
        }
    }

    /// Applies `s * twist` to `pose` with `s` chosen so that the pusher at
    /// `pusher` just touches the object.
    fn scale_to_contact(&self, body: &Body, pose: Pose, pusher: Point2<f64>, twist: [f64; 3]) -> Pose {
        let rp = self.cfg.pusher_radius;
        let tol = 0.01 * self.cfg.contact_tolerance;
        let pen0 = self.penetration(body, &pose, pusher);
        if pen0 <= 0.0 {
            return pose;
        }
        let q = crate::se2::to_object_frame(&pose, pusher).to_array();
        let dist = box_distance(q, body.hx, body.hy);
        let (contact, normal) = contact_geometry(q, body.hx, body.hy, dist);
        let r = [contact[0] - body.com[0], contact[1] - body.com[1]];
        let vn = normal_contact_speed(twist, r, normal);
        let at = |s: f64| apply_body_twist(&pose, body.com, [twist[0] * s, twist[1] * s, twist[2] * s]);
        let mut next = pose;
        if vn > 1e-300 {
            // secant iteration on the penetration as a function of the scale
            let (mut sa, mut pa) = (0.0, pen0);
            let mut sb = pen0 / vn;
            next = at(sb);
            let mut pb = self.penetration(body, &next, pusher);
            for _ in 0..8 {
                if pb.abs() <= tol || pb == pa {
                    break;
                }
                let sc = sb - pb * (sb - sa) / (pb - pa);
                if !(sc.is_finite() && sc > 0.0) {
                    break;
                }
                (sa, pa) = (sb, pb);
                sb = sc;
                next = at(sb);
                pb = self.penetration(body, &next, pusher);
            }
        }
        // fallback: translate along the normal
        for _ in 0..4 {
            let q = crate::se2::to_object_frame(&next, pusher).to_array();
            let d = box_distance(q, body.hx, body.hy);
            let residual = rp - d;
            if residual <= 0.25 * self.cfg.contact_tolerance {
                break;
            }
            let (_, n) = contact_geometry(q, body.hx, body.hy, d);
            let w = next.rotate_vector(n);
            next = Pose::new(next.x + w[0] * residual, next.y + w[1] * residual, next.yaw());
        }
        next
    }
}

/// Contact point on the box and inward unit normal for a pusher centre `q`
/// at distance `dist` from the box.
fn contact_geometry(q: Point2<f64>, hx: f64, hy: f64, dist: f64) -> (Point2<f64>, Point2<f64>) {
    if dist > 1e-12 {
        let c = box_closest(q, hx, hy);
        return (c, [(c[0] - q[0]) / dist, (c[1] - q[1]) / dist]);
    }
    // centre on or inside the boundary: use the nearest face
    let gx = hx - q[0].abs();
    let gy = hy - q[1].abs();
    if gx <= gy {
        let s = if q[0] >= 0.0 { 1.0 } else { -1.0 };
        ([s * hx, q[1]], [-s, 0.0])
    } else {
        let s = if q[1] >= 0.0 { 1.0 } else { -1.0 };
        ([q[0], s * hy], [0.0, -s])
    }
}

/// Body twist (about the centre of mass) produced by a contact force `f`
/// applied at lever `r`, under the ellipsoidal limit surface.
fn force_twist(f: Point2<f64>, r: Point2<f64>, c2: f64) -> [f64; 3] {
    let torque = r[0] * f[1] - r[1] * f[0];
    [f[0], f[1], torque / c2]
}

fn normal_contact_speed(twist: [f64; 3], r: Point2<f64>, n: Point2<f64>) -> f64 {
    let vc = [twist[0] - twist[2] * r[1], twist[1] + twist[2] * r[0]];
    vc[0] * n[0] + vc[1] * n[1]
}

/// Motion-cone classification. Returns the object twist direction and
/// whether the contact slides.
///
/// The sticking twist makes the contact point move with the pusher; its
/// force is proportional to the translational part. When that force leaves
/// the friction cone the contact slides and the force sits on the nearer
/// cone edge.
fn motion_cone_twist(r: Point2<f64>, n: Point2<f64>, v: Point2<f64>, c2: f64, mu: f64) -> ([f64; 3], bool) {
    let den = c2 + r[0] * r[0] + r[1] * r[1];
    let vx = ((c2 + r[0] * r[0]) * v[0] + r[0] * r[1] * v[1]) / den;
    let vy = (r[0] * r[1] * v[0] + (c2 + r[1] * r[1]) * v[1]) / den;
    let t = [-n[1], n[0]];
    let f_n = vx * n[0] + vy * n[1];
    let f_t = vx * t[0] + vy * t[1];
    if f_n > 0.0 && f_t.abs() <= mu * f_n {
        let w = (r[0] * vy - r[1] * vx) / c2;
        return ([vx, vy, w], false);
    }
    let side = if f_t >= 0.0 { 1.0 } else { -1.0 };
    let f = [n[0] + side * mu * t[0], n[1] + side * mu * t[1]];
    (force_twist(f, r, c2), true)
}

/// Rotates the body by `twist[2]` about `com` and translates the com by
/// `twist[0..2]`, all in body coordinates.
fn apply_body_twist(pose: &Pose, com: Point2<f64>, twist: [f64; 3]) -> Pose {
    let (s, c) = twist[2].sin_cos();
    let rc = [c * com[0] - s * com[1], s * com[0] + c * com[1]];
    let local = Pose::new(com[0] + twist[0] - rc[0], com[1] + twist[1] - rc[1], twist[2]);
    pose.compose(&local)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(params: ObjectParams) -> WorldState {
        WorldState { object_pose: Pose::identity(), pusher_pos: [0.0, 0.0], params }
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        assert_eq!(sample_object_params(7), sample_object_params(7));
        assert_ne!(sample_object_params(7), sample_object_params(8));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ranges = RandomizationRanges::default();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum_len = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let p = ranges.sample(&mut rng);
            lo = lo.min(p.mass);
            hi = hi.max(p.mass);
            sum_len += p.length;
            assert!((0.5..=0.7).contains(&p.friction));
            assert!((0.4..=0.6).contains(&p.restitution));
            assert!((0.11..=0.13).contains(&p.length));
            assert!((0.09..=0.11).contains(&p.width));
            assert!(p.com_offset[0].abs() < 0.5 * p.length && p.com_offset[1].abs() < 0.5 * p.width);
        }
        assert!(lo >= 0.3 && hi <= 0.7);
        // length ~ U[0.11, 0.13]: sd of the mean is 0.02/sqrt(12 n) ~ 5.8e-5,
        // so +-2e-3 is over 30 standard deviations
        let mean = sum_len / n as f64;
        assert!((0.118..=0.122).contains(&mean), "mean length {mean}");
    }

    #[test]
    fn zero_push_does_nothing() {
        let sim = Simulator::default();
        let cmd = PushCommand { start: BodyPoint::new(-0.1, 0.0), delta: BodyPoint::zero() };
        let out = sim.step_push(&state(ObjectParams::midpoint()), &cmd).unwrap();
        assert_eq!(out.motion, Motion::zero());
    }

    #[test]
    fn head_on_push_is_symmetric() {
        let sim = Simulator::default();
        let p = ObjectParams::midpoint();
        let cmd = PushCommand { start: BodyPoint::new(-0.06 - PUSHER_RADIUS - 0.01, 0.0), delta: BodyPoint::new(0.02, 0.0) };
        let out = sim.step_push(&state(p), &cmd).unwrap();
        assert!(out.motion.dx > 0.0199 && out.motion.dx < 0.0201, "{:?}", out.motion);
        assert_eq!(out.motion.dy, 0.0);
        assert_eq!(out.motion.dyaw(), 0.0);
        assert!((out.approach.unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn penetrating_start_is_rejected() {
        let sim = Simulator::default();
        let cmd = PushCommand { start: BodyPoint::new(-0.065, 0.0), delta: BodyPoint::new(0.01, 0.0) };
        assert!(matches!(sim.step_push(&state(ObjectParams::midpoint()), &cmd), Err(SimError::InvalidCommand(_))));
    }

    #[test]
    fn off_center_push_converges_in_substep() {
        let sim = Simulator::default();
        let p = ObjectParams::midpoint();
        let cmd = PushCommand { start: BodyPoint::new(-0.06 - PUSHER_RADIUS, 0.025), delta: BodyPoint::new(0.02, 0.0) };
        let fine = sim.step_push_with_substep(&state(p), &cmd, 1e-5).unwrap().motion;
        let prod = sim.step_push_with_substep(&state(p), &cmd, 1e-4).unwrap().motion;
        // pushing the -x face above the centre line turns the object clockwise
        assert!(fine.dyaw() < 0.0, "{fine:?}");
        assert!((fine.dx - prod.dx).hypot(fine.dy - prod.dy) < 1e-4);
        assert!((fine.dyaw() - prod.dyaw()).abs() < 5e-3);
    }

    #[test]
    fn missed_push_leaves_object() {
        let sim = Simulator::default();
        let cmd = PushCommand { start: BodyPoint::new(-0.1, 0.2), delta: BodyPoint::new(0.03, 0.0) };
        let out = sim.step_push(&state(ObjectParams::midpoint()), &cmd).unwrap();
        assert_eq!(out.motion, Motion::zero());
        assert!(out.approach.is_none());
    }

    #[test]
    fn collision_predicate() {
        let p = ObjectParams::midpoint();
        assert!(pusher_collides(&p, BodyPoint::zero()));
        assert!(!pusher_collides(&p, BodyPoint::new(1.0, 0.0)));
        // long face is the +-y face (x extent 0.12)
        assert!(!pusher_collides(&p, BodyPoint::new(0.0, 0.05 + PUSHER_RADIUS + 1e-6)));
        assert!(pusher_collides(&p, BodyPoint::new(0.0, 0.05 + PUSHER_RADIUS - 1e-6)));
    }

    #[test]
    fn sticking_twist_moves_contact_with_pusher() {
        let r = [-0.06, 0.02];
        let v = [1.0, 0.1];
        let (tw, sliding) = motion_cone_twist(r, [1.0, 0.0], v, 0.0012, 0.6);
        assert!(!sliding);
        let vc = [tw[0] - tw[2] * r[1], tw[1] + tw[2] * r[0]];
        assert!((vc[0] - v[0]).abs() < 1e-12 && (vc[1] - v[1]).abs() < 1e-12);
    }
}
