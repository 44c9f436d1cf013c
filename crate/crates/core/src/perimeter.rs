//! Candidate pusher start points on a rectangle inflated by a standoff, and
//! push directions in the inward cone of each face.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::wrap_angle;
use crate::sim::PUSHER_RADIUS;
use crate::BodyPoint;

/// Clearance between the pusher surface and the object at a sampled start.
pub const SAMPLING_MARGIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    PosX,
    PosY,
    NegX,
    NegY,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::PosX, Face::PosY, Face::NegX, Face::NegY];

    /// Unit normal pointing into the object.
    pub fn inward_normal(self) -> BodyPoint {
        match self {
            Face::PosX => BodyPoint::new(-1.0, 0.0),
            Face::PosY => BodyPoint::new(0.0, -1.0),
            Face::NegX => BodyPoint::new(1.0, 0.0),
            Face::NegY => BodyPoint::new(0.0, 1.0),
        }
    }

    fn is_x(self) -> bool {
        matches!(self, Face::PosX | Face::NegX)
    }

    fn sign(self) -> f64 {
        match self {
            Face::PosX | Face::PosY => 1.0,
            Face::NegX | Face::NegY => -1.0,
        }
    }
}

/// The sampling perimeter around an object footprint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perimeter {
    pub half_extents: [f64; 2],
    /// Distance from the footprint to the pusher centre.
    pub standoff: f64,
}

impl Perimeter {
    pub fn new(half_extents: [f64; 2]) -> Self {
        Self { half_extents, standoff: PUSHER_RADIUS + SAMPLING_MARGIN }
    }

    /// Length of the face segment that start points are drawn from.
    pub fn face_length(&self, face: Face) -> f64 {
        let [hx, hy] = self.half_extents;
        if face.is_x() {
            2.0 * hy
        } else {
            2.0 * hx
        }
    }

    /// Point on `face` at tangential coordinate `t` (clamped to the face).
    pub fn point(&self, face: Face, t: f64) -> BodyPoint {
        let [hx, hy] = self.half_extents;
        if face.is_x() {
            BodyPoint::new(face.sign() * (hx + self.standoff), t.clamp(-hy, hy))
        } else {
            BodyPoint::new(t.clamp(-hx, hx), face.sign() * (hy + self.standoff))
        }
    }

    pub fn sample_on_face<R: Rng + ?Sized>(&self, face: Face, rng: &mut R) -> BodyPoint {
        let h = 0.5 * self.face_length(face);
        self.point(face, rng.gen_range(-h..=h))
    }

    /// Uniform over the total face length.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Face, BodyPoint) {
        let total: f64 = Face::ALL.iter().map(|&f| self.face_length(f)).sum();
        let mut s = rng.gen_range(0.0..total);
        for face in Face::ALL {
            let len = self.face_length(face);
            if s < len || face == Face::NegY {
                return (face, self.point(face, s.min(len) - 0.5 * len));
            }
            s -= len;
        }
        unreachable!()
    }

    /// Face whose inflated band contains `p` (largest normalized excess).
    pub fn face_of(&self, p: BodyPoint) -> Face {
        let [hx, hy] = self.half_extents;
        let ex = p.u.abs() - hx;
        let ey = p.v.abs() - hy;
        if ex >= ey {
            if p.u >= 0.0 {
                Face::PosX
            } else {
                Face::NegX
            }
        } else if p.v >= 0.0 {
            Face::PosY
        } else {
            Face::NegY
        }
    }

    /// Moves `p` onto `face` along the face normal, clamping the tangential
    /// coordinate to the face.
    pub fn project(&self, face: Face, p: BodyPoint) -> BodyPoint {
        self.point(face, if face.is_x() { p.v } else { p.u })
    }

    /// Distance of `p` from the footprint measured along `face`'s normal.
    pub fn normal_offset(&self, face: Face, p: BodyPoint) -> f64 {
        let [hx, hy] = self.half_extents;
        if face.is_x() {
            face.sign() * p.u - hx
        } else {
            face.sign() * p.v - hy
        }
    }
}

/// Direction at `offset` radians from the inward normal of `face`.
pub fn cone_direction(face: Face, offset: f64) -> BodyPoint {
    face.inward_normal().rotated(offset)
}

/// Unsigned angle between `d` and the inward normal of `face`.
pub fn cone_deviation(face: Face, d: BodyPoint) -> f64 {
    let n = face.inward_normal();
    wrap_angle(d.angle() - n.angle()).abs()
}

/// Clamps the direction of `d` into the cone of half angle `half` about the
/// inward normal of `face`, keeping its length.
pub fn clamp_into_cone(face: Face, d: BodyPoint, half: f64) -> BodyPoint {
    let n = face.inward_normal();
    let off = wrap_angle(d.angle() - n.angle());
    if off.abs() <= half {
        return d;
    }
    n.rotated(off.clamp(-half, half)) * d.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_sit_on_the_standoff() {
        let per = Perimeter::new([0.06, 0.05]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            let (face, p) = per.sample(&mut rng);
            counts[Face::ALL.iter().position(|&f| f == face).unwrap()] += 1;
            assert!((per.normal_offset(face, p) - per.standoff).abs() < 1e-12);
            assert_eq!(per.face_of(p), face);
        }
        // x faces are 0.10 long, y faces 0.12
        assert!(counts[1] > counts[0] && counts[3] > counts[2], "{counts:?}");
    }

    #[test]
    fn cone_clamp() {
        let d = BodyPoint::new(0.0, 1.0);
        let c = clamp_into_cone(Face::NegX, d * 0.02, 0.25 * std::f64::consts::PI);
        assert!((c.norm() - 0.02).abs() < 1e-15);
        assert!((cone_deviation(Face::NegX, c) - 0.25 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(clamp_into_cone(Face::NegX, BodyPoint::new(1.0, 0.1), 0.5), BodyPoint::new(1.0, 0.1));
    }
}
