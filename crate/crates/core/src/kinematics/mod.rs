//! Articulated 7-DoF arm plus 2-DoF parallel gripper: forward kinematics,
//! joint limits and the joint-position tracking model.

mod chain_file;
pub mod ik;
mod panda;

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use nalgebra::{Matrix6xX, UnitQuaternion, Unit, Vector3};

use crate::contact::{BodyTag, Shape, Side, WorldShape};
use crate::error::{Error, Result};
use crate::pose::Pose;

pub use chain_file::{chain_from_str, chain_to_string, read_chain, write_chain};

pub const ARM_DOF: usize = 7;
pub const GRIPPER_DOF: usize = 2;
pub const DOF: usize = ARM_DOF + GRIPPER_DOF;

/// Default proportional gain of the joint tracking model (1/s).
pub const DEFAULT_GAIN: f64 = 10.0;

/// Slack allowed when checking that a configuration respects its limits.
const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

impl fmt::Display for JointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
        })
    }
}

impl FromStr for JointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "revolute" => Ok(JointKind::Revolute),
            "prismatic" => Ok(JointKind::Prismatic),
            _ => Err(Error::Domain(format!("unknown joint kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    /// Transform from the parent frame to the joint frame at zero motion.
    pub origin: Pose,
    pub axis: Vector3<f64>,
    pub limits: [f64; 2],
    pub max_velocity: f64,
}

impl JointSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.limits[0] < self.limits[1]) {
            return Err(Error::Config(format!("joint limits {:?} are empty", self.limits)));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("joint axis must be a unit vector".into()));
        }
        if !(self.max_velocity > 0.0 && self.max_velocity.is_finite()) {
            return Err(Error::Config("joint max_velocity must be positive".into()));
        }
        Ok(())
    }

    /// Joint motion for position `q`.
    pub fn motion(&self, q: f64) -> Pose {
        match self.kind {
            JointKind::Revolute => {
                Pose::from_rotation(UnitQuaternion::from_axis_angle(&Unit::new_unchecked(self.axis), q))
            }
            JointKind::Prismatic => Pose::new(self.axis * q, UnitQuaternion::identity()),
        }
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.limits[0], self.limits[1])
    }
}

/// Joint positions: 7 arm angles (rad) followed by 2 finger offsets (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig(pub [f64; DOF]);

impl JointConfig {
    pub fn new(q: [f64; DOF]) -> Self {
        Self(q)
    }

    pub fn arm(&self) -> [f64; ARM_DOF] {
        std::array::from_fn(|i| self.0[i])
    }

    pub fn with_arm(mut self, arm: &[f64; ARM_DOF]) -> Self {
        self.0[..ARM_DOF].copy_from_slice(arm);
        self
    }

    pub fn with_fingers(mut self, width_each: f64) -> Self {
        self.0[ARM_DOF] = width_each;
        self.0[ARM_DOF + 1] = width_each;
        self
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for JointConfig {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// A frame of the robot that collision shapes can be attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameRef {
    Base,
    /// Child frame of arm joint `1..=7`.
    Link(u8),
    Hand,
    Finger(Side),
}

impl fmt::Display for FrameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameRef::Base => f.write_str("base"),
            FrameRef::Link(i) => write!(f, "link{i}"),
            FrameRef::Hand => f.write_str("hand"),
            FrameRef::Finger(Side::Left) => f.write_str("finger_left"),
            FrameRef::Finger(Side::Right) => f.write_str("finger_right"),
        }
    }
}

impl FromStr for FrameRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(FrameRef::Base),
            "hand" => Ok(FrameRef::Hand),
            "finger_left" => Ok(FrameRef::Finger(Side::Left)),
            "finger_right" => Ok(FrameRef::Finger(Side::Right)),
            _ => s
                .strip_prefix("link")
                .and_then(|i| i.parse::<u8>().ok())
                .filter(|i| (1..=ARM_DOF as u8).contains(i))
                .map(FrameRef::Link)
                .ok_or_else(|| Error::Domain(format!("unknown frame `{s}`"))),
        }
    }
}

/// Collision shape rigidly attached to one robot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkShape {
    pub frame: FrameRef,
    pub tag: BodyTag,
    pub shape: Shape,
    pub local: Pose,
}

/// Kinematic and collision description of the arm and gripper.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub base: Pose,
    pub arm: [JointSpec; ARM_DOF],
    /// Last arm link to the gripper (palm) frame.
    pub hand_offset: Pose,
    /// Palm frame to the grasp centre between the fingertips.
    pub tcp_offset: Pose,
    /// Finger joints, with origins expressed in the palm frame.
    pub fingers: [JointSpec; GRIPPER_DOF],
    /// Finger frame to the centre of its gripping surface.
    pub fingertip_offset: Pose,
    pub shapes: Vec<LinkShape>,
}

/// World poses of every frame for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFrames {
    /// Index 0 is the base, `i` the child frame of arm joint `i`.
    pub links: [Pose; ARM_DOF + 1],
    /// Gripper link; its origin is the point tested against the goal region.
    pub palm: Pose,
    pub tcp: Pose,
    pub fingers: [Pose; GRIPPER_DOF],
    pub fingertips: [Pose; GRIPPER_DOF],
}

impl LinkFrames {
    pub fn frame(&self, f: FrameRef) -> Pose {
        match f {
            FrameRef::Base => self.links[0],
            FrameRef::Link(i) => self.links[usize::from(i)],
            FrameRef::Hand => self.palm,
            FrameRef::Finger(s) => self.fingers[s.index()],
        }
    }
}

impl Chain {
    /// Panda-class arm with its parallel-jaw gripper.
    pub fn panda() -> Self {
        panda::chain()
    }

    pub fn joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.arm.iter().chain(self.fingers.iter())
    }

    pub fn joint(&self, i: usize) -> &JointSpec {
        if i < ARM_DOF {
            &self.arm[i]
        } else {
            &self.fingers[i - ARM_DOF]
        }
    }

    pub fn validate(&self) -> Result<()> {
        for j in self.joints() {
            j.validate()?;
        }
        for s in &self.shapes {
            s.shape.validated()?;
        }
        Ok(())
    }

    pub fn check_limits(&self, q: &JointConfig) -> Result<()> {
        for (i, (j, v)) in self.joints().zip(q.0.iter()).enumerate() {
            if !v.is_finite() || *v < j.limits[0] - LIMIT_SLACK || *v > j.limits[1] + LIMIT_SLACK {
                return Err(Error::Domain(format!(
                    "joint {i} value {v} outside limits {:?}",
                    j.limits
                )));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        JointConfig(std::array::from_fn(|i| self.joint(i).clamp(q.0[i])))
    }

    /// World frames for `q`; errors if `q` violates a joint limit.
    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<LinkFrames> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn fk_unchecked(&self, q: &JointConfig) -> LinkFrames {
        let mut links = [self.base; ARM_DOF + 1];
        let mut t = self.base;
        for (i, j) in self.arm.iter().enumerate() {
            t = t.compose(&j.origin).compose(&j.motion(q.0[i]));
            links[i + 1] = t;
        }
        let palm = t.compose(&self.hand_offset);
        let tcp = palm.compose(&self.tcp_offset);
        let fingers: [Pose; GRIPPER_DOF] = std::array::from_fn(|k| {
            let j = &self.fingers[k];
            palm.compose(&j.origin).compose(&j.motion(q.0[ARM_DOF + k]))
        });
        let fingertips = fingers.map(|f| f.compose(&self.fingertip_offset));
        LinkFrames {
            links,
            palm,
            tcp,
            fingers,
            fingertips,
        }
    }

    /// Collision shapes of the robot placed in the world.
    pub fn world_shapes(&self, frames: &LinkFrames) -> impl Iterator<Item = WorldShape> + '_ {
        let frames = *frames;
        self.shapes.iter().map(move |s| {
            WorldShape::new(s.shape, frames.frame(s.frame).compose(&s.local), s.tag)
        })
    }

    /// Geometric Jacobian of the TCP (rows: linear xyz, angular xyz) over
    /// the arm joints.
    pub fn tcp_jacobian(&self, frames: &LinkFrames) -> Matrix6xX<f64> {
        let mut jac = Matrix6xX::zeros(ARM_DOF);
        let p = frames.tcp.position;
        for (i, j) in self.arm.iter().enumerate() {
            let f = frames.links[i + 1];
            let axis = f.transform_vector(&j.axis);
            let (lin, ang) = match j.kind {
                JointKind::Revolute => (axis.cross(&(p - f.position)), axis),
                JointKind::Prismatic => (axis, Vector3::zeros()),
            };
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
        }
        jac
    }

    pub fn max_finger_opening(&self) -> f64 {
        self.fingers[0].limits[1]
    }
}

/// One tracking step toward `target`.
///
/// Per joint: `q' = q + clamp(gain * (target - q) * dt, ±max_velocity * dt)`,
/// with the target first clamped to the joint limits. The proportional
/// factor `gain * dt` is capped at 1 so a step never overshoots.
///
/// Convergence bound: with `f = min(gain * dt, 1)` and `v = max_velocity * dt`,
/// a joint starting `e0` from its target is within `v / f` of it after
/// `ceil(e0 / v)` steps, and `k` steps later within `(1 - f)^k * v / f`.
pub fn pd_step(chain: &Chain, q: &JointConfig, target: &JointConfig, dt: f64, gain: f64) -> Result<JointConfig> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step {dt} must be positive")));
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::Domain(format!("gain {gain} must be positive")));
    }
    if let Some(i) = target.0.iter().position(|v| v.is_nan()) {
        return Err(Error::Domain(format!("target joint {i} is NaN")));
    }
    let factor = (gain * dt).min(1.0);
    let mut out = *q;
    for i in 0..DOF {
        let j = chain.joint(i);
        let goal = j.clamp(target.0[i]);
        let err = goal - q.0[i];
        let max_step = j.max_velocity * dt;
        let step = (factor * err).clamp(-max_step, max_step);
        out.0[i] = j.clamp(q.0[i] + step);
    }
    Ok(out)
}
