//! Closed-loop baseline that re-targets a front-side grasp every step.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grasp::{grasp_catalog, GraspPose};
use super::{goal_world, positive, step_toward, tcp_of, track_palm, EpisodeInfo, Policy};
use crate::episode::{Action, Observation};
use crate::error::{Error, Result};
use crate::handover::ReleasePhase;
use crate::kinematics::ik::IkOptions;
use crate::kinematics::{Chain, JointConfig, ARM_DOF};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReactiveParams {
    pub pregrasp_offset: f64,
    /// Rate at which the stand-off shrinks once moving in (m/s).
    pub approach_speed: f64,
    /// Object speed below which the approach may start (m/s).
    pub settle_speed: f64,
    /// TCP distance to the pregrasp that counts as aligned (m).
    pub align_tolerance: f64,
    /// TCP distance to the grasp at which the gripper closes (m).
    pub close_distance: f64,
    pub close_time: f64,
    pub servo_speed: f64,
    /// DLS iterations per control step.
    pub ik_iterations: usize,
}

impl Default for ReactiveParams {
    fn default() -> Self {
        Self {
            pregrasp_offset: 0.1,
            approach_speed: 0.25,
            settle_speed: 0.08,
            align_tolerance: 0.02,
            close_distance: 0.006,
            close_time: 0.6,
            servo_speed: 0.3,
            ik_iterations: 8,
        }
    }
}

impl ReactiveParams {
    pub fn validate(&self) -> Result<()> {
        positive("reactive_front_approach.pregrasp_offset", self.pregrasp_offset)?;
        positive("reactive_front_approach.approach_speed", self.approach_speed)?;
        positive("reactive_front_approach.settle_speed", self.settle_speed)?;
        positive("reactive_front_approach.align_tolerance", self.align_tolerance)?;
        positive("reactive_front_approach.close_distance", self.close_distance)?;
        positive("reactive_front_approach.close_time", self.close_time)?;
        positive("reactive_front_approach.servo_speed", self.servo_speed)?;
        if self.ik_iterations == 0 {
            return Err(Error::Config("reactive_front_approach.ik_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Track,
    MoveIn { standoff: f64 },
    Close { since: f64 },
    Carry { palm: Pose },
}

#[derive(Debug, Clone)]
struct Context {
    chain: Chain,
    grasps: Vec<GraspPose>,
    dt: f64,
    goal: Vector3<f64>,
    phase: Phase,
    cmd: JointConfig,
    last_object: Option<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct ReactiveFrontApproach {
    params: ReactiveParams,
    ctx: Option<Context>,
}

impl ReactiveFrontApproach {
    pub fn new(params: ReactiveParams) -> Self {
        Self { params, ctx: None }
    }
}

/// Grasp whose approach best faces away from the robot base, preferring
/// the closing direction closest to the current one.
fn front_grasp<'g>(grasps: &'g [GraspPose], base: &Vector3<f64>, object: &Pose, palm: &Pose) -> &'g GraspPose {
    let d = object.position - base;
    let front = Vector3::new(d.x, d.y, 0.0).try_normalize(1e-9).unwrap_or_else(Vector3::x);
    let y = palm.axis(1);
    let score = |g: &GraspPose| {
        let p = g.palm(object);
        p.axis(2).dot(&front) + 0.1 * p.axis(1).dot(&y)
    };
    grasps
        .iter()
        .fold(None::<(&GraspPose, f64)>, |best, g| {
            let s = score(g);
            match best {
                Some((_, b)) if b >= s => best,
                _ => Some((g, s)),
            }
        })
        .expect("non-empty grasp list")
        .0
}

impl Policy for ReactiveFrontApproach {
    fn name(&self) -> &'static str {
        "reactive_front_approach"
    }

    fn reset(&mut self, info: &EpisodeInfo<'_>) -> Result<()> {
        self.params.validate()?;
        let mut grasps = grasp_catalog(&info.scene.object()?.shape, info.chain);
        for g in &mut grasps {
            g.pregrasp_offset = self.params.pregrasp_offset;
        }
        self.ctx = Some(Context {
            chain: info.chain.clone(),
            grasps,
            dt: info.config.control_dt,
            goal: goal_world(info),
            phase: Phase::Track,
            cmd: JointConfig(info.config.start_q),
            last_object: None,
        });
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<Action> {
        let p = &self.params;
        let ctx = self.ctx.as_mut().ok_or_else(|| Error::Protocol("policy used before reset".into()))?;
        if ctx.grasps.is_empty() {
            return Ok(Action::hold(&obs.q));
        }
        let object = obs.object_pose;
        let speed = ctx
            .last_object
            .map_or(f64::INFINITY, |prev| (object.position - prev).norm() / ctx.dt);
        ctx.last_object = Some(object.position);
        let opts = IkOptions::default();
        let open = ctx.chain.max_finger_opening();

        let g = *front_grasp(&ctx.grasps, &ctx.chain.base.position, &object, &obs.palm);
        let tcp_gap = |palm: &Pose| (tcp_of(&ctx.chain, palm).position - obs.tcp.position).norm();

        let (palm, finger) = match ctx.phase {
            Phase::Track => {
                let target = g.pregrasp(&object);
                if tcp_gap(&target) < p.align_tolerance && speed < p.settle_speed {
                    ctx.phase = Phase::MoveIn {
                        standoff: g.pregrasp_offset,
                    };
                }
                (target, open)
            }
            Phase::MoveIn { standoff } => {
                let standoff = (standoff - p.approach_speed * ctx.dt).max(0.0);
                let target = g.palm_at(&object, standoff);
                ctx.phase = if standoff == 0.0 && tcp_gap(&target) < p.close_distance {
                    Phase::Close { since: obs.time }
                } else {
                    Phase::MoveIn { standoff }
                };
                (target, open)
            }
            Phase::Close { since } => {
                if obs.release != ReleasePhase::Driven || obs.time - since >= p.close_time {
                    ctx.phase = Phase::Carry { palm: obs.palm };
                }
                (g.palm(&object), g.closed_finger())
            }
            Phase::Carry { palm } => {
                let next = step_toward(&palm, &ctx.goal, p.servo_speed * ctx.dt);
                ctx.phase = Phase::Carry { palm: next };
                (next, ctx.cmd[ARM_DOF])
            }
        };
        let (q, _) = track_palm(&ctx.chain, &ctx.cmd, &palm, &opts, p.ik_iterations);
        let cmd = q.with_fingers(finger);
        ctx.cmd = cmd;
        Ok(Action::hold(&cmd))
    }
}
