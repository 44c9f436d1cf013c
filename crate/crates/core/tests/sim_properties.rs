use proptest::prelude::*;

use pushlab::perimeter::{cone_direction, Face, Perimeter};
use pushlab::se2::ang_diff;
use pushlab::sim::{ObjectParams, PushCommand, Simulator, WorldState};
use pushlab::Pose;

fn face() -> impl Strategy<Value = Face> {
    prop::sample::select(Face::ALL.to_vec())
}

fn params() -> impl Strategy<Value = ObjectParams> {
    (0.5f64..0.7, 0.11f64..0.13, 0.09f64..0.11, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(mu, l, w, cx, cy)| ObjectParams {
        friction: mu,
        length: l,
        width: w,
        com_offset: [0.05 * l * cx, 0.05 * w * cy],
        ..ObjectParams::midpoint()
    })
}

fn scene() -> impl Strategy<Value = (WorldState, PushCommand)> {
    (params(), face(), -0.07f64..0.07, -0.78f64..0.78, 0.001f64..0.05, -1.0f64..1.0, -1.0f64..1.0, -3.1f64..3.1).prop_map(
        |(params, face, t, offset, mag, x, y, yaw)| {
            let start = Perimeter::new(params.half_extents()).point(face, t);
            let pose = Pose::new(x, y, yaw);
            let state = WorldState { object_pose: pose, pusher_pos: pose.transform_point(start.to_array()), params };
            (state, PushCommand { start, delta: cone_direction(face, offset) * mag })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rigid_motion_of_the_scene_commutes_with_a_push(
        (state, cmd) in scene(),
        gx in -2.0f64..2.0, gy in -2.0f64..2.0, gyaw in -3.1f64..3.1,
    ) {
        let sim = Simulator::default();
        let g = Pose::new(gx, gy, gyaw);
        let moved = WorldState { object_pose: g.compose(&state.object_pose), pusher_pos: g.transform_point(state.pusher_pos), ..state };
        let a = sim.step_push(&state, &cmd).unwrap();
        let b = sim.step_push(&moved, &cmd).unwrap();
        let expect = g.compose(&a.state.object_pose);
        prop_assert!((expect.x - b.state.object_pose.x).abs() < 1e-9);
        prop_assert!((expect.y - b.state.object_pose.y).abs() < 1e-9);
        prop_assert!(ang_diff(expect.yaw(), b.state.object_pose.yaw()).abs() < 1e-9);
        // the body-frame motion is identical
        prop_assert!((a.motion.dx - b.motion.dx).abs() < 1e-9 && (a.motion.dy - b.motion.dy).abs() < 1e-9);
    }

    #[test]
    fn the_object_is_never_pulled((state, cmd) in scene()) {
        let sim = Simulator::default();
        let mut worst = f64::INFINITY;
        sim.step_push_traced(&state, &cmd, sim.cfg.substep, &mut |e| {
            worst = worst.min(e.com_displacement[0] * e.normal[0] + e.com_displacement[1] * e.normal[1]);
        }).unwrap();
        prop_assert!(worst >= 0.0, "normal displacement {worst}");
    }

    #[test]
    fn only_a_push_that_touches_moves_the_object((state, cmd) in scene()) {
        let out = Simulator::default().step_push(&state, &cmd).unwrap();
        if out.approach.is_none() {
            prop_assert_eq!(out.motion, pushlab::Motion::zero());
        } else {
            prop_assert!(out.motion.translation_norm() > 0.0);
        }
    }
}
