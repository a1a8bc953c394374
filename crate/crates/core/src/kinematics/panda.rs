//! Built-in Panda-class parameters (modified DH for the arm).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{UnitQuaternion, Vector3};

use super::{Chain, FrameRef, JointKind, JointSpec, LinkShape};
use crate::contact::{BodyTag, Shape, Side};
use crate::pose::Pose;

/// Frame transform `RotX(alpha) * TransX(a) * TransZ(d)`.
fn dh_origin(a: f64, d: f64, alpha: f64) -> Pose {
    let rot = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), alpha));
    rot.compose(&Pose::from_translation(a, 0.0, d))
}

fn revolute(a: f64, d: f64, alpha: f64, limits: [f64; 2], max_velocity: f64) -> JointSpec {
    JointSpec {
        kind: JointKind::Revolute,
        origin: dh_origin(a, d, alpha),
        axis: Vector3::z(),
        limits,
        max_velocity,
    }
}

fn capsule_between(frame: FrameRef, tag: BodyTag, radius: f64, a: Vector3<f64>, b: Vector3<f64>) -> LinkShape {
    let dir = b - a;
    let rot = UnitQuaternion::rotation_between(&Vector3::z(), &dir)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI));
    LinkShape {
        frame,
        tag,
        shape: Shape::Capsule {
            radius,
            half_length: dir.norm() * 0.5,
        },
        local: Pose::new((a + b) * 0.5, rot),
    }
}

fn cuboid(frame: FrameRef, tag: BodyTag, center: [f64; 3], half: [f64; 3]) -> LinkShape {
    LinkShape {
        frame,
        tag,
        shape: Shape::Box {
            half_extents: Vector3::from(half),
        },
        local: Pose::from_translation(center[0], center[1], center[2]),
    }
}

pub(super) fn chain() -> Chain {
    let arm = [
        revolute(0.0, 0.333, 0.0, [-2.8973, 2.8973], 2.175),
        revolute(0.0, 0.0, -FRAC_PI_2, [-1.7628, 1.7628], 2.175),
        revolute(0.0, 0.316, FRAC_PI_2, [-2.8973, 2.8973], 2.175),
        // Upper bound relaxed to 0 so the all-zero pose is admissible.
        revolute(0.0825, 0.0, FRAC_PI_2, [-3.0718, 0.0], 2.175),
        revolute(-0.0825, 0.384, -FRAC_PI_2, [-2.8973, 2.8973], 2.61),
        revolute(0.0, 0.0, FRAC_PI_2, [-0.0175, 3.7525], 2.61),
        revolute(0.088, 0.0, FRAC_PI_2, [-2.8973, 2.8973], 2.61),
    ];
    let hand_offset = Pose::new(
        Vector3::new(0.0, 0.0, 0.107),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -FRAC_PI_4),
    );
    let finger_base = 0.0584;
    let finger = |rot: f64| JointSpec {
        kind: JointKind::Prismatic,
        origin: Pose::new(
            Vector3::new(0.0, 0.0, finger_base),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rot),
        ),
        axis: Vector3::y(),
        limits: [0.0, 0.04],
        max_velocity: 0.1,
    };

    let v = Vector3::new;
    let mut shapes = vec![
        capsule_between(FrameRef::Base, BodyTag::ArmLink(0), 0.07, v(0.0, 0.0, 0.05), v(0.0, 0.0, 0.23)),
        capsule_between(FrameRef::Link(1), BodyTag::ArmLink(1), 0.06, v(0.0, 0.0, -0.07), v(0.0, 0.0, 0.0)),
        capsule_between(FrameRef::Link(2), BodyTag::ArmLink(2), 0.06, v(0.0, 0.0, 0.0), v(0.0, -0.18, 0.0)),
        capsule_between(FrameRef::Link(3), BodyTag::ArmLink(3), 0.06, v(0.0, 0.0, -0.14), v(0.0, 0.0, -0.02)),
        capsule_between(FrameRef::Link(4), BodyTag::ArmLink(4), 0.06, v(0.0, 0.0, -0.03), v(0.0, 0.0, 0.03)),
        capsule_between(FrameRef::Link(5), BodyTag::ArmLink(5), 0.05, v(0.06, 0.0, -0.3), v(0.0, 0.0, -0.05)),
        capsule_between(FrameRef::Link(6), BodyTag::ArmLink(6), 0.05, v(0.0, 0.0, 0.0), v(0.088, 0.0, 0.0)),
        capsule_between(FrameRef::Link(7), BodyTag::ArmLink(7), 0.045, v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.08)),
        cuboid(FrameRef::Hand, BodyTag::ArmLink(8), [0.0, 0.0, 0.03], [0.02, 0.1, 0.03]),
    ];
    for side in Side::BOTH {
        let frame = FrameRef::Finger(side);
        shapes.push(cuboid(frame, BodyTag::FingerGripSurface(side), [0.0, 0.002, 0.045], [0.01, 0.002, 0.016]));
        shapes.push(cuboid(frame, BodyTag::FingerOther(side), [0.0, 0.012, 0.0305], [0.01, 0.008, 0.0305]));
    }

    Chain {
        base: Pose::identity(),
        arm,
        hand_offset,
        tcp_offset: Pose::from_translation(0.0, 0.0, 0.1034),
        fingers: [finger(0.0), finger(PI)],
        fingertip_offset: Pose::from_translation(0.0, 0.0, 0.045),
        shapes,
    }
}
