//! Giver side of a handover: trajectory replay, release triggers and the
//! object's motion once the giver lets go.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::contact::{ContactSet, Shape};
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::scene::{Scene, TableGeometry, HAND_CAPSULES};

/// Sustained-contact window for both release triggers (s).
pub const RELEASE_WINDOW: f64 = 0.1;
/// Slack on timer comparisons so that a window of k·dt equal to the
/// threshold fires despite accumulated rounding.
pub const TIMER_EPS: f64 = 1e-9;
pub const GRAVITY: f64 = 9.81;

/// Giver state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GiverPose {
    pub hand_pose: Pose,
    pub hand_capsule_poses: [Pose; HAND_CAPSULES],
    /// Where the giver holds the object. Only meaningful while the object
    /// is still driven by the giver.
    pub object_pose: Pose,
}

/// Replays the giver at time `t`, holding the last frame past the end.
pub fn replay_giver(scene: &Scene, t: f64) -> Result<GiverPose> {
    if scene.frames.is_empty() {
        return Err(Error::Domain(format!("scene {} has no frames", scene.scene_id)));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("replay time {t} must be finite and >= 0")));
    }
    let frames = &scene.frames;
    let next = frames.partition_point(|f| f.time <= t);
    if next == frames.len() {
        let f = &frames[frames.len() - 1];
        return Ok(GiverPose {
            hand_pose: f.hand_pose,
            hand_capsule_poses: f.hand_capsule_poses,
            object_pose: f.object_pose,
        });
    }
    // `next >= 1` because frame 0 sits at t = 0.
    let (a, b) = (&frames[next - 1], &frames[next]);
    let alpha = (t - a.time) / (b.time - a.time);
    let mut caps = a.hand_capsule_poses;
    for (c, cb) in caps.iter_mut().zip(&b.hand_capsule_poses) {
        *c = c.interpolate(cb, alpha);
    }
    Ok(GiverPose {
        hand_pose: a.hand_pose.interpolate(&b.hand_pose, alpha),
        hand_capsule_poses: caps,
        object_pose: a.object_pose.interpolate(&b.object_pose, alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReleasePhase {
    Driven,
    ActiveReleased,
    PassiveReleased,
}

impl ReleasePhase {
    pub fn is_released(self) -> bool {
        self != ReleasePhase::Driven
    }
}

impl fmt::Display for ReleasePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReleasePhase::Driven => "driven",
            ReleasePhase::ActiveReleased => "active",
            ReleasePhase::PassiveReleased => "passive",
        })
    }
}

impl FromStr for ReleasePhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "driven" => Ok(ReleasePhase::Driven),
            "active" => Ok(ReleasePhase::ActiveReleased),
            "passive" => Ok(ReleasePhase::PassiveReleased),
            _ => Err(Error::Domain(format!("unknown release phase `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseState {
    pub phase: ReleasePhase,
    pub active_timer: f64,
    pub passive_timer: f64,
}

impl Default for ReleaseState {
    fn default() -> Self {
        Self::driven()
    }
}

impl ReleaseState {
    pub fn driven() -> Self {
        Self {
            phase: ReleasePhase::Driven,
            active_timer: 0.0,
            passive_timer: 0.0,
        }
    }

    fn released(phase: ReleasePhase) -> Self {
        Self {
            phase,
            active_timer: 0.0,
            passive_timer: 0.0,
        }
    }

    pub fn is_released(&self) -> bool {
        self.phase.is_released()
    }
}

/// Advances the release triggers by one control step of length `dt`
/// given the contacts observed at the end of that step.
///
/// Released states are returned unchanged.
pub fn update_release(state: ReleaseState, contacts: &ContactSet, dt: f64) -> ReleaseState {
    debug_assert!(dt > 0.0);
    if state.is_released() {
        return state;
    }
    let both = contacts.both_grip_contacts();
    let passive = !contacts.any_grip_contact() && contacts.object_touches_robot_non_grip();
    let active_timer = if both { state.active_timer + dt } else { 0.0 };
    let passive_timer = if passive { state.passive_timer + dt } else { 0.0 };
    if active_timer >= RELEASE_WINDOW - TIMER_EPS {
        ReleaseState::released(ReleasePhase::ActiveReleased)
    } else if passive_timer >= RELEASE_WINDOW - TIMER_EPS {
        ReleaseState::released(ReleasePhase::PassiveReleased)
    } else {
        ReleaseState {
            phase: ReleasePhase::Driven,
            active_timer,
            passive_timer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectMode {
    Driven,
    /// Rigidly held; `grip` maps the palm frame to the object frame.
    Attached { grip: Pose },
    Ballistic,
    Resting,
}

impl ObjectMode {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectMode::Driven => "driven",
            ObjectMode::Attached { .. } => "attached",
            ObjectMode::Ballistic => "ballistic",
            ObjectMode::Resting => "resting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDynamicState {
    pub mode: ObjectMode,
    pub pose: Pose,
    pub linear_velocity: Vector3<f64>,
}

impl ObjectDynamicState {
    pub fn driven(pose: Pose) -> Self {
        Self {
            mode: ObjectMode::Driven,
            pose,
            linear_velocity: Vector3::zeros(),
        }
    }

    pub fn is_attached(&self) -> bool {
        matches!(self.mode, ObjectMode::Attached { .. })
    }
}

/// The surface a falling object can come to rest on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestingSurface {
    pub height: f64,
    pub table: TableGeometry,
}

/// Moves the object through one control step according to its current
/// mode. `driven_pose` is the giver's replayed grip pose at the end of the
/// step and `palm` the palm frame at the end of the step.
pub fn propagate_object(
    obj: &ObjectDynamicState,
    shape: &Shape,
    driven_pose: &Pose,
    palm: &Pose,
    surface: &RestingSurface,
    dt: f64,
) -> ObjectDynamicState {
    debug_assert!(dt > 0.0);
    match obj.mode {
        ObjectMode::Driven => ObjectDynamicState {
            mode: ObjectMode::Driven,
            pose: *driven_pose,
            linear_velocity: (driven_pose.position - obj.pose.position) / dt,
        },
        ObjectMode::Attached { grip } => {
            let pose = palm.compose(&grip);
            ObjectDynamicState {
                mode: obj.mode,
                pose,
                linear_velocity: (pose.position - obj.pose.position) / dt,
            }
        }
        ObjectMode::Ballistic => {
            let v = obj.linear_velocity - Vector3::new(0.0, 0.0, GRAVITY * dt);
            let mut pose = obj.pose;
            pose.position += v * dt;
            let below = shape.support_extent(&pose, &-Vector3::z());
            let rest_z = surface.height + below;
            if pose.position.z <= rest_z && surface.table.contains_xy(&pose.position) {
                pose.position.z = rest_z;
                ObjectDynamicState {
                    mode: ObjectMode::Resting,
                    pose,
                    linear_velocity: Vector3::zeros(),
                }
            } else {
                ObjectDynamicState {
                    mode: ObjectMode::Ballistic,
                    pose,
                    linear_velocity: v,
                }
            }
        }
        ObjectMode::Resting => ObjectDynamicState {
            linear_velocity: Vector3::zeros(),
            ..*obj
        },
    }
}

/// Applies mode changes after the contacts and release state of a step
/// are known. The pose is left untouched.
pub fn transition_object(
    obj: &ObjectDynamicState,
    release: &ReleaseState,
    contacts: &ContactSet,
    palm: &Pose,
) -> ObjectDynamicState {
    let mut out = *obj;
    match obj.mode {
        ObjectMode::Driven if release.is_released() => {
            out.mode = if contacts.both_grip_contacts() {
                ObjectMode::Attached {
                    grip: palm.inverse().compose(&obj.pose),
                }
            } else {
                ObjectMode::Ballistic
            };
        }
        ObjectMode::Attached { .. } if !contacts.both_grip_contacts() => {
            out.mode = ObjectMode::Ballistic;
        }
        _ => {}
    }
    out
}

/// One full object update: mode transition from the last step's contacts,
/// then propagation over `dt`.
#[allow(clippy::too_many_arguments)]
pub fn step_object(
    obj: &ObjectDynamicState,
    release: &ReleaseState,
    contacts: &ContactSet,
    palm: &Pose,
    shape: &Shape,
    driven_pose: &Pose,
    next_palm: &Pose,
    surface: &RestingSurface,
    dt: f64,
) -> ObjectDynamicState {
    let o = transition_object(obj, release, contacts, palm);
    propagate_object(&o, shape, driven_pose, next_palm, surface, dt)
}
