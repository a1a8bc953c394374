//! Capsule-cluster proxy for the giver's hand.
//!
//! The hand frame has +x pointing from the wrist toward the fingers and +z
//! along the palm normal. Capsules are aligned with their own local z axis.

use nalgebra::{UnitQuaternion, Vector3};

use super::Handedness;
use crate::contact::Shape;
use crate::pose::Pose;

pub const HAND_CAPSULES: usize = 5;

struct CapsuleSpec {
    radius: f64,
    half_length: f64,
    center: [f64; 3],
    /// Direction of the capsule axis in the hand frame.
    axis: [f64; 3],
}

// Palm, three fingers and the thumb, for a right hand.
const RIGHT_HAND: [CapsuleSpec; HAND_CAPSULES] = [
    CapsuleSpec { radius: 0.028, half_length: 0.035, center: [0.05, 0.0, 0.0], axis: [1.0, 0.0, 0.0] },
    CapsuleSpec { radius: 0.009, half_length: 0.03, center: [0.14, 0.028, 0.004], axis: [1.0, 0.0, 0.0] },
    CapsuleSpec { radius: 0.009, half_length: 0.032, center: [0.145, 0.0, 0.004], axis: [1.0, 0.0, 0.0] },
    CapsuleSpec { radius: 0.009, half_length: 0.028, center: [0.135, -0.028, 0.004], axis: [1.0, 0.0, 0.0] },
    CapsuleSpec { radius: 0.01, half_length: 0.025, center: [0.07, 0.05, 0.012], axis: [0.8, 0.6, 0.0] },
];

pub fn capsule_shape(index: usize) -> Shape {
    let c = &RIGHT_HAND[index];
    Shape::Capsule {
        radius: c.radius,
        half_length: c.half_length,
    }
}

/// Capsule poses relative to the hand root frame.
pub fn local_capsule_poses(handedness: Handedness) -> [Pose; HAND_CAPSULES] {
    let mirror = match handedness {
        Handedness::Right => 1.0,
        Handedness::Left => -1.0,
    };
    std::array::from_fn(|i| {
        let c = &RIGHT_HAND[i];
        let axis = Vector3::new(c.axis[0], c.axis[1] * mirror, c.axis[2]).normalize();
        let rot = UnitQuaternion::rotation_between(&Vector3::z(), &axis)
            .unwrap_or_else(UnitQuaternion::identity);
        Pose::new(Vector3::new(c.center[0], c.center[1] * mirror, c.center[2]), rot)
    })
}

/// World capsule poses for a hand root pose.
pub fn capsule_poses(root: &Pose, handedness: Handedness) -> [Pose; HAND_CAPSULES] {
    local_capsule_poses(handedness).map(|local| root.compose(&local))
}
