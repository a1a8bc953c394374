//! Antipodal grasp sampling over primitive object shapes.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};

use crate::contact::Shape;
use crate::kinematics::Chain;
use crate::pose::{rotation_from_axes, Pose};

/// Widest object extent across the closing axis that the gripper accepts (m).
pub const MAX_GRASP_WIDTH: f64 = 0.075;
/// How far the grasp centre sits inside the entry face when the object
/// is deep enough (m).
pub const GRASP_DEPTH: f64 = 0.03;
/// Finger opening below the object's half width when closing (m).
pub const SQUEEZE: f64 = 0.002;
pub const DEFAULT_PREGRASP_OFFSET: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPose {
    /// Palm frame expressed in the object frame. Its z axis is the
    /// approach direction (toward the object), its y axis the closing axis.
    pub palm_in_object: Pose,
    /// Stand-off along the approach axis before moving in (m).
    pub pregrasp_offset: f64,
    /// Object extent between the fingers (m).
    pub width: f64,
}

impl GraspPose {
    pub fn approach_in_object(&self) -> Vector3<f64> {
        self.palm_in_object.axis(2)
    }

    pub fn palm(&self, object: &Pose) -> Pose {
        object.compose(&self.palm_in_object)
    }

    /// Palm pose backed off by `standoff` along the approach axis.
    pub fn palm_at(&self, object: &Pose, standoff: f64) -> Pose {
        let mut p = self.palm(object);
        p.position -= p.axis(2) * standoff;
        p
    }

    pub fn pregrasp(&self, object: &Pose) -> Pose {
        self.palm_at(object, self.pregrasp_offset)
    }

    /// Per-finger joint value that closes onto the object.
    pub fn closed_finger(&self) -> f64 {
        (0.5 * self.width - SQUEEZE).max(0.0)
    }
}

fn grasp(chain: &Chain, tcp: Vector3<f64>, approach: Vector3<f64>, closing: Vector3<f64>, width: f64) -> GraspPose {
    let x = closing.cross(&approach);
    let tcp_pose = Pose::new(tcp, rotation_from_axes(x, closing, approach));
    GraspPose {
        palm_in_object: tcp_pose.compose(&chain.tcp_offset.inverse()),
        pregrasp_offset: DEFAULT_PREGRASP_OFFSET,
        width,
    }
}

fn depth_offset(extent: f64) -> f64 {
    (extent - extent.min(GRASP_DEPTH)).max(0.0)
}

/// All antipodal grasps for `shape`, in a fixed order.
pub fn grasp_catalog(shape: &Shape, chain: &Chain) -> Vec<GraspPose> {
    let mut out = Vec::new();
    let unit = [Vector3::x(), Vector3::y(), Vector3::z()];
    match *shape {
        Shape::Box { half_extents: h } => {
            for a in 0..3 {
                let width = 2.0 * h[a];
                if width > MAX_GRASP_WIDTH {
                    continue;
                }
                for b in (0..3).filter(|&b| b != a) {
                    for s in [1.0, -1.0] {
                        let approach = unit[b] * s;
                        let tcp = -approach * depth_offset(h[b]);
                        for c in [1.0, -1.0] {
                            out.push(grasp(chain, tcp, approach, unit[a] * c, width));
                        }
                    }
                }
            }
        }
        Shape::Capsule {
            radius,
            half_length,
        } => {
            let width = 2.0 * radius;
            if width <= MAX_GRASP_WIDTH {
                for k in 0..8 {
                    let phi = k as f64 * PI / 4.0;
                    let approach = Vector3::new(phi.cos(), phi.sin(), 0.0);
                    let closing = Vector3::z().cross(&approach);
                    let tcp = -approach * depth_offset(radius);
                    for c in [1.0, -1.0] {
                        out.push(grasp(chain, tcp, approach, closing * c, width));
                    }
                }
                for s in [1.0, -1.0] {
                    let approach = Vector3::z() * s;
                    let tcp = -approach * depth_offset(half_length + radius);
                    for k in 0..4 {
                        let phi = k as f64 * PI / 4.0;
                        let closing = Vector3::new(phi.cos(), phi.sin(), 0.0);
                        for c in [1.0, -1.0] {
                            out.push(grasp(chain, tcp, approach, closing * c, width));
                        }
                    }
                }
            }
        }
        Shape::Sphere { radius } => {
            let width = 2.0 * radius;
            if width <= MAX_GRASP_WIDTH {
                for b in 0..3 {
                    for s in [1.0, -1.0] {
                        let approach = unit[b] * s;
                        let tcp = -approach * depth_offset(radius);
                        let base = unit[(b + 1) % 3];
                        for k in 0..4 {
                            let rot = UnitQuaternion::from_axis_angle(
                                &nalgebra::Unit::new_normalize(approach),
                                k as f64 * PI / 4.0,
                            );
                            out.push(grasp(chain, tcp, approach, rot * base, width));
                        }
                    }
                }
            }
        }
    }
    out
}
