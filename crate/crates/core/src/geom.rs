//! Rectangle geometry: point and rectangle separations, ray contact against
//! a disk-inflated box, and the mean lever arm used for the limit surface.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::se2::{to_object_frame, PlanarPose, Point2};

/// Rectangle with centre/orientation `pose` and half side lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect<S: Scalar> {
    pub pose: PlanarPose<S>,
    pub half_extents: [S; 2],
}

impl<S: Scalar> OrientedRect<S> {
    pub fn new(pose: PlanarPose<S>, half_extents: [S; 2]) -> Self {
        Self { pose, half_extents }
    }

    /// Corners in world coordinates, counter-clockwise.
    pub fn corners(&self) -> [Point2<S>; 4] {
        let [hx, hy] = self.half_extents;
        [[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]].map(|c| self.pose.transform_point(c))
    }
}

/// Distance from a body-frame point to the axis-aligned box `[-hx,hx]x[-hy,hy]`.
/// Zero inside.
#[inline]
pub fn box_distance<S: Scalar>(q: Point2<S>, hx: S, hy: S) -> S {
    let dx = (q[0].abs() - hx).max(S::zero());
    let dy = (q[1].abs() - hy).max(S::zero());
    dx.hypot(dy)
}

/// Closest point of the box to `q` (q itself when inside).
#[inline]
pub fn box_closest<S: Scalar>(q: Point2<S>, hx: S, hy: S) -> Point2<S> {
    [q[0].max(-hx).min(hx), q[1].max(-hy).min(hy)]
}

/// Euclidean distance from a world point to a rectangle, 0 when inside.
pub fn point_rect_distance<S: Scalar>(p: Point2<S>, rect: &OrientedRect<S>) -> S {
    let q = to_object_frame(&rect.pose, p);
    box_distance([q.u, q.v], rect.half_extents[0], rect.half_extents[1])
}

fn separated_on_axes<S: Scalar>(a: &[Point2<S>; 4], b: &[Point2<S>; 4], axes: [Point2<S>; 2]) -> bool {
    axes.iter().any(|ax| {
        let proj = |pts: &[Point2<S>; 4]| {
            pts.iter().fold((S::infinity(), S::neg_infinity()), |(lo, hi), p| {
                let d = p[0] * ax[0] + p[1] * ax[1];
                (lo.min(d), hi.max(d))
            })
        };
        let (alo, ahi) = proj(a);
        let (blo, bhi) = proj(b);
        ahi < blo || bhi < alo
    })
}

/// Exact separation between two rectangles, 0 when they overlap.
pub fn rect_distance<S: Scalar>(a: &OrientedRect<S>, b: &OrientedRect<S>) -> S {
    let ca = a.corners();
    let cb = b.corners();
    let axes_of = |r: &OrientedRect<S>| {
        let (s, c) = r.pose.yaw().sin_cos();
        [[c, s], [-s, c]]
    };
    let separated = separated_on_axes(&ca, &cb, axes_of(a)) || separated_on_axes(&ca, &cb, axes_of(b));
    if !separated {
        return S::zero();
    }
    // disjoint convex polygons: the closest pair always involves a vertex
    let mut best = S::infinity();
    for p in ca {
        best = best.min(point_rect_distance(p, b));
    }
    for p in cb {
        best = best.min(point_rect_distance(p, a));
    }
    best
}

/// First arc length `s >= 0` at which a disk of `radius` moving from `start`
/// along unit direction `dir` touches the box, or `None` if it never does.
///
/// The distance to a convex set is convex along a line, so the first
/// crossing is bracketed by the unconstrained minimum.
pub fn ray_contact<S: Scalar>(start: Point2<S>, dir: Point2<S>, hx: S, hy: S, radius: S) -> Option<S> {
    let f = |s: S| box_distance([start[0] + dir[0] * s, start[1] + dir[1] * s], hx, hy) - radius;
    if f(S::zero()) <= S::zero() {
        return Some(S::zero());
    }
    let reach = start[0].hypot(start[1]) + hx + hy + radius;
    // golden-section search for the minimum on [0, reach]
    let g = S::lit(0.618_033_988_749_894_8);
    let (mut lo, mut hi) = (S::zero(), reach);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let s_min = (lo + hi) * S::lit(0.5);
    if f(s_min) > S::zero() {
        return None;
    }
    let (mut a, mut b) = (S::zero(), s_min);
    for _ in 0..80 {
        let m = (a + b) * S::lit(0.5);
        if f(m) > S::zero() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(b)
}

/// `int_0^a int_0^b sqrt(x^2 + y^2) dy dx`.
fn corner_moment<S: Scalar>(a: S, b: S) -> S {
    if a <= S::zero() || b <= S::zero() {
        return S::zero();
    }
    let d = a.hypot(b);
    let six = S::lit(6.0);
    (S::lit(2.0) * a * b * d + a * a * a * ((b + d) / a).ln() + b * b * b * ((a + d) / b).ln()) / six
}

/// Mean distance from `c` over the box `[-hx,hx]x[-hy,hy]` (uniform density).
/// `c` must lie inside the box.
pub fn mean_distance_over_box<S: Scalar>(hx: S, hy: S, c: Point2<S>) -> S {
    let (l, r) = (hx + c[0], hx - c[0]);
    let (d, u) = (hy + c[1], hy - c[1]);
    let total = corner_moment(l, d) + corner_moment(l, u) + corner_moment(r, d) + corner_moment(r, u);
    total / (S::lit(4.0) * hx * hy)
}
