//! Step/reset environment over one scene and the success/failure automaton.

mod trace;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::contact::{collide_world, BodyTag, ContactSet, Exemptions, Shape, Side, TagKind, WorldShape, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::handover::{
    propagate_object, replay_giver, transition_object, update_release, ObjectDynamicState, ReleasePhase,
    ReleaseState, RestingSurface, TIMER_EPS,
};
use crate::kinematics::{pd_step, Chain, JointConfig, LinkFrames, DEFAULT_GAIN, DOF};
use crate::pose::Pose;
use crate::scene::{hand, object_spec, Scene, TableGeometry, HAND_CAPSULES};

pub use trace::{read_trace, trace_from_str, trace_to_string, write_trace, Trace, TraceStep};

/// Panda "ready" pose with the gripper fully open.
pub const START_CONFIGURATION: [f64; DOF] = [0.0, -0.785, 0.0, -2.356, 0.0, 1.571, 0.785, 0.04, 0.04];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    /// Sphere centre in the robot base frame (m).
    pub center: [f64; 3],
    pub radius: f64,
}

impl Default for GoalRegion {
    fn default() -> Self {
        Self {
            center: [0.4, 0.0, 0.3],
            radius: 0.15,
        }
    }
}

impl GoalRegion {
    /// A radius of zero is accepted and describes an empty region.
    pub fn validate(&self) -> Result<()> {
        if self.center.iter().all(|c| c.is_finite()) && self.radius >= 0.0 && self.radius.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid goal region {self:?}")))
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    /// Strict interior test.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (p - self.center()).norm() < self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Control period (s).
    pub control_dt: f64,
    pub substeps: u32,
    pub gain: f64,
    pub goal: GoalRegion,
    pub time_limit: f64,
    /// Time both success conditions must hold without interruption (s).
    pub success_hold: f64,
    pub contact_margin: f64,
    pub start_q: [f64; DOF],
    pub table: TableGeometry,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_dt: 1.0 / 60.0,
            substeps: 4,
            gain: DEFAULT_GAIN,
            goal: GoalRegion::default(),
            time_limit: 13.0,
            success_hold: 0.1,
            contact_margin: DEFAULT_MARGIN,
            start_q: START_CONFIGURATION,
            table: TableGeometry::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} is out of range")));
        if !(self.control_dt > 0.0 && self.control_dt.is_finite()) {
            return bad("control_dt", self.control_dt);
        }
        if self.substeps == 0 {
            return bad("substeps", 0.0);
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return bad("gain", self.gain);
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return bad("time_limit", self.time_limit);
        }
        if !(self.success_hold >= 0.0 && self.success_hold.is_finite()) {
            return bad("success_hold", self.success_hold);
        }
        if !(self.contact_margin >= 0.0 && self.contact_margin.is_finite()) {
            return bad("contact_margin", self.contact_margin);
        }
        self.goal.validate()?;
        self.table.validate()?;
        Chain::panda()
            .check_limits(&JointConfig(self.start_q))
            .map_err(|e| Error::Config(format!("start_q: {e}")))
    }

    /// Maximum number of control steps before the time limit fires.
    pub fn max_steps(&self) -> u64 {
        ((self.time_limit - TIMER_EPS) / self.control_dt).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub target_q: JointConfig,
}

impl Action {
    pub fn new(target_q: [f64; DOF]) -> Self {
        Self {
            target_q: JointConfig(target_q),
        }
    }

    pub fn hold(q: &JointConfig) -> Self {
        Self { target_q: *q }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub q: JointConfig,
    pub palm: Pose,
    pub tcp: Pose,
    pub hand_pose: Pose,
    pub hand_capsule_poses: [Pose; HAND_CAPSULES],
    pub object_pose: Pose,
    pub distractor_poses: Vec<Pose>,
    pub release: ReleasePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureCause {
    Contact,
    Drop,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Running,
    Success,
    Failure(FailureCause),
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

impl fmt::Display for EpisodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Success => "success",
            EpisodeStatus::Failure(FailureCause::Contact) => "contact",
            EpisodeStatus::Failure(FailureCause::Drop) => "drop",
            EpisodeStatus::Failure(FailureCause::Timeout) => "timeout",
        })
    }
}

impl FromStr for EpisodeStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "running" => EpisodeStatus::Running,
            "success" => EpisodeStatus::Success,
            "contact" => EpisodeStatus::Failure(FailureCause::Contact),
            "drop" => EpisodeStatus::Failure(FailureCause::Drop),
            "timeout" => EpisodeStatus::Failure(FailureCause::Timeout),
            _ => return Err(Error::Domain(format!("unknown status `{s}`"))),
        })
    }
}

/// Everything the status automaton looks at after one step.
#[derive(Debug, Clone, Copy)]
pub struct StatusInput<'a> {
    pub contacts: &'a ContactSet,
    pub object: &'a ObjectDynamicState,
    pub release: &'a ReleaseState,
    /// Palm position in the robot base frame.
    pub palm_in_base: Vector3<f64>,
    pub time: f64,
    pub table_height: f64,
    pub dt: f64,
}

/// Returns the status after a step and the updated success timer.
///
/// Precedence on simultaneous events: contact, drop, timeout, success.
pub fn evaluate_status(input: &StatusInput<'_>, success_timer: f64, config: &EnvConfig) -> (EpisodeStatus, f64) {
    let c = input.contacts;
    let attached = input.object.is_attached();
    let left = attached || c.finger_contact(Side::Left);
    let right = attached || c.finger_contact(Side::Right);

    let holding = left || right;
    let in_goal = config.goal.contains(&input.palm_in_base);
    let timer = if holding && in_goal { success_timer + input.dt } else { 0.0 };

    let status = if c.robot_touches_hand() {
        EpisodeStatus::Failure(FailureCause::Contact)
    } else if input.release.is_released() && !(left && right) && object_dropped(c, input) {
        EpisodeStatus::Failure(FailureCause::Drop)
    } else if input.time >= config.time_limit - TIMER_EPS {
        EpisodeStatus::Failure(FailureCause::Timeout)
    } else if holding && in_goal && timer >= config.success_hold - TIMER_EPS {
        EpisodeStatus::Success
    } else {
        EpisodeStatus::Running
    };
    (status, timer)
}

fn object_dropped(c: &ContactSet, input: &StatusInput<'_>) -> bool {
    c.touches(BodyTag::TargetObject, |t| matches!(t.kind(), TagKind::Table | TagKind::Distractor))
        || input.object.pose.position.z < input.table_height
}

/// Tag pairs whose contacts no predicate looks at.
pub fn default_exemptions() -> Exemptions {
    Exemptions::new()
        .with_pair(BodyTag::Hand, BodyTag::TargetObject)
        .with_kinds(TagKind::Robot, TagKind::Robot)
        .with_kinds(TagKind::Robot, TagKind::Table)
        .with_kinds(TagKind::Robot, TagKind::Distractor)
        .with_kinds(TagKind::Hand, TagKind::Hand)
        .with_kinds(TagKind::Hand, TagKind::Table)
        .with_kinds(TagKind::Hand, TagKind::Distractor)
        .with_kinds(TagKind::Distractor, TagKind::Table)
        .with_kinds(TagKind::Distractor, TagKind::Distractor)
}

/// Result of one `Episode::step`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub status: EpisodeStatus,
    pub reward: f64,
}

/// A running handover episode on one scene.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    scene: &'a Scene,
    chain: &'a Chain,
    config: EnvConfig,
    object_shape: Shape,
    statics: Vec<WorldShape>,
    exemptions: Exemptions,
    steps: u64,
    moving_steps: u64,
    q: JointConfig,
    frames: LinkFrames,
    hand_pose: Pose,
    hand_capsules: [Pose; HAND_CAPSULES],
    release: ReleaseState,
    object: ObjectDynamicState,
    contacts: ContactSet,
    success_timer: f64,
    status: EpisodeStatus,
}

impl<'a> Episode<'a> {
    /// Starts an episode: robot at the start configuration, giver at its
    /// first frame, all timers zero.
    pub fn reset(scene: &'a Scene, chain: &'a Chain, config: &EnvConfig) -> Result<Self> {
        config.validate()?;
        scene.validate()?;
        let spec = scene.object()?;
        let q = JointConfig(config.start_q);
        let frames = chain.forward_kinematics(&q)?;
        let mut statics = Vec::with_capacity(scene.distractors.len() + 1);
        let t = &config.table;
        statics.push(WorldShape::new(
            Shape::cuboid(t.half_x, t.half_y, 0.5 * t.thickness)?,
            Pose::from_translation(t.center_x, t.center_y, scene.table_height - 0.5 * t.thickness),
            BodyTag::Table,
        ));
        for (i, d) in scene.distractors.iter().enumerate() {
            let ds = object_spec(&d.object_id)
                .ok_or_else(|| Error::Domain(format!("unknown distractor `{}`", d.object_id)))?;
            statics.push(WorldShape::new(ds.shape, d.pose, BodyTag::Distractor(i as u8)));
        }
        let giver = replay_giver(scene, 0.0)?;
        Ok(Self {
            scene,
            chain,
            config: config.clone(),
            object_shape: spec.shape,
            statics,
            exemptions: default_exemptions(),
            steps: 0,
            moving_steps: 0,
            q,
            frames,
            hand_pose: giver.hand_pose,
            hand_capsules: giver.hand_capsule_poses,
            release: ReleaseState::driven(),
            object: ObjectDynamicState::driven(giver.object_pose),
            contacts: ContactSet::empty(),
            success_timer: 0.0,
            status: EpisodeStatus::Running,
        })
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.control_dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Control steps during which at least one joint moved.
    pub fn moving_steps(&self) -> u64 {
        self.moving_steps
    }

    pub fn q(&self) -> &JointConfig {
        &self.q
    }

    pub fn frames(&self) -> &LinkFrames {
        &self.frames
    }

    pub fn contacts(&self) -> &ContactSet {
        &self.contacts
    }

    pub fn release(&self) -> &ReleaseState {
        &self.release
    }

    pub fn object_state(&self) -> &ObjectDynamicState {
        &self.object
    }

    pub fn success_timer(&self) -> f64 {
        self.success_timer
    }

    pub fn observation(&self) -> Observation {
        Observation {
            time: self.time(),
            q: self.q,
            palm: self.frames.palm,
            tcp: self.frames.tcp,
            hand_pose: self.hand_pose,
            hand_capsule_poses: self.hand_capsules,
            object_pose: self.object.pose,
            distractor_poses: self.scene.distractors.iter().map(|d| d.pose).collect(),
            release: self.release.phase,
        }
    }

    /// Reward hook; no shaping is defined.
    pub fn reward(&self) -> f64 {
        0.0
    }

    /// Advances one control period.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.status.is_terminal() {
            return Err(Error::Protocol(format!(
                "episode on scene {} already ended with {}",
                self.scene.scene_id, self.status
            )));
        }
        if let Some(i) = action.target_q.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("action joint {i} is not finite")));
        }
        let cfg = &self.config;
        let dt = cfg.control_dt;
        let target = self.chain.clamp(&action.target_q);
        let sub_dt = dt / f64::from(cfg.substeps);
        let mut q = self.q;
        for _ in 0..cfg.substeps {
            q = pd_step(self.chain, &q, &target, sub_dt, cfg.gain)?;
        }
        if q != self.q {
            self.moving_steps += 1;
        }
        self.q = q;
        self.steps += 1;
        let t = self.time();
        self.frames = self.chain.forward_kinematics(&q)?;

        let giver = replay_giver(self.scene, t)?;
        self.hand_pose = giver.hand_pose;
        self.hand_capsules = giver.hand_capsule_poses;
        let surface = RestingSurface {
            height: self.scene.table_height,
            table: cfg.table,
        };
        self.object = propagate_object(
            &self.object,
            &self.object_shape,
            &giver.object_pose,
            &self.frames.palm,
            &surface,
            dt,
        );

        self.contacts = collide_world(&self.world(), &self.exemptions, cfg.contact_margin);
        self.release = update_release(self.release, &self.contacts, dt);
        self.object = transition_object(&self.object, &self.release, &self.contacts, &self.frames.palm);

        let input = StatusInput {
            contacts: &self.contacts,
            object: &self.object,
            release: &self.release,
            palm_in_base: self.chain.base.inverse_transform_point(&self.frames.palm.position),
            time: t,
            table_height: self.scene.table_height,
            dt,
        };
        let (status, timer) = evaluate_status(&input, self.success_timer, cfg);
        self.status = status;
        self.success_timer = timer;
        Ok(StepOutcome {
            observation: self.observation(),
            status,
            reward: self.reward(),
        })
    }

    /// All collision shapes at the current instant.
    pub fn world(&self) -> Vec<WorldShape> {
        let mut world: Vec<WorldShape> = self.chain.world_shapes(&self.frames).collect();
        for (i, pose) in self.hand_capsules.iter().enumerate() {
            world.push(WorldShape::new(hand::capsule_shape(i), *pose, BodyTag::Hand));
        }
        world.push(WorldShape::new(self.object_shape, self.object.pose, BodyTag::TargetObject));
        world.extend(self.statics.iter().copied());
        world
    }
}
