//! Open-loop baseline: wait for the giver to stop, plan once, execute.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grasp::{grasp_catalog, GraspPose};
use super::{arm_error, goal_world, positive, solve_palm, step_toward, tcp_of, track_palm, EpisodeInfo, Policy};
use crate::episode::{Action, Observation};
use crate::error::Result;
use crate::handover::ReleasePhase;
use crate::kinematics::ik::IkOptions;
use crate::kinematics::{Chain, JointConfig};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldThenPlanParams {
    pub pregrasp_offset: f64,
    /// Peak joint speed of the interpolated transfer to the pregrasp (rad/s).
    pub joint_speed: f64,
    /// Duration of the pregrasp to grasp segment (s).
    pub approach_time: f64,
    /// Longest wait for the release after closing (s).
    pub close_time: f64,
    /// Palm speed while carrying to the goal (m/s).
    pub servo_speed: f64,
    /// Cost of a fully misaligned approach, in metres of travel.
    pub alignment_weight: f64,
}

impl Default for HoldThenPlanParams {
    fn default() -> Self {
        Self {
            pregrasp_offset: 0.1,
            joint_speed: 0.8,
            approach_time: 0.6,
            close_time: 0.6,
            servo_speed: 0.3,
            alignment_weight: 0.2,
        }
    }
}

impl HoldThenPlanParams {
    pub fn validate(&self) -> Result<()> {
        positive("hold_then_plan.pregrasp_offset", self.pregrasp_offset)?;
        positive("hold_then_plan.joint_speed", self.joint_speed)?;
        positive("hold_then_plan.approach_time", self.approach_time)?;
        positive("hold_then_plan.close_time", self.close_time)?;
        positive("hold_then_plan.servo_speed", self.servo_speed)?;
        positive("hold_then_plan.alignment_weight", self.alignment_weight)
    }
}

#[derive(Debug, Clone)]
struct Segment {
    from: JointConfig,
    to: JointConfig,
    start: f64,
    duration: f64,
}

#[derive(Debug, Clone)]
enum Phase {
    Hold,
    Transfer { segments: Vec<Segment>, grasp: GraspPose },
    Close { q: JointConfig, since: f64, finger: f64 },
    Carry { palm: Pose, finger: f64 },
    /// No reachable grasp: keep still.
    Stuck,
}

#[derive(Debug, Clone)]
struct Context {
    chain: Chain,
    shape: crate::contact::Shape,
    presentation: f64,
    dt: f64,
    goal: Vector3<f64>,
    phase: Phase,
    cmd: JointConfig,
}

#[derive(Debug, Clone)]
pub struct HoldThenPlan {
    params: HoldThenPlanParams,
    ctx: Option<Context>,
}

impl HoldThenPlan {
    pub fn new(params: HoldThenPlanParams) -> Self {
        Self { params, ctx: None }
    }

    fn plan(&self, ctx: &Context, obs: &Observation) -> Phase {
        let p = &self.params;
        let opts = IkOptions::default();
        let object = obs.object_pose;
        let front = {
            let d = object.position - ctx.chain.base.position;
            Vector3::new(d.x, d.y, 0.0).try_normalize(1e-9).unwrap_or_else(Vector3::x)
        };
        let mut grasps: Vec<(f64, GraspPose)> = grasp_catalog(&ctx.shape, &ctx.chain)
            .into_iter()
            .map(|mut g| {
                g.pregrasp_offset = p.pregrasp_offset;
                let tcp = tcp_of(&ctx.chain, &g.palm(&object)).position;
                let approach = g.palm(&object).axis(2);
                let cost = (tcp - obs.tcp.position).norm() + p.alignment_weight * (1.0 - approach.dot(&front));
                (cost, g)
            })
            .collect();
        grasps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let open = ctx.chain.max_finger_opening();
        for (_, g) in grasps {
            let Some(pre) = solve_palm(&ctx.chain, &obs.q, &g.pregrasp(&object), &opts) else {
                continue;
            };
            let Some(grasp) = solve_palm(&ctx.chain, &pre, &g.palm(&object), &opts) else {
                continue;
            };
            let pre = pre.with_fingers(open);
            let grasp_q = grasp.with_fingers(open);
            let transfer = (arm_error(&obs.q, &pre) / p.joint_speed).max(ctx.dt);
            let segments = vec![
                Segment {
                    from: obs.q,
                    to: pre,
                    start: obs.time,
                    duration: transfer,
                },
                Segment {
                    from: pre,
                    to: grasp_q,
                    start: obs.time + transfer,
                    duration: p.approach_time,
                },
            ];
            return Phase::Transfer { segments, grasp: g };
        }
        Phase::Stuck
    }
}

/// Smooth 0..1 profile with zero end velocities.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn lerp(a: &JointConfig, b: &JointConfig, s: f64) -> JointConfig {
    JointConfig(std::array::from_fn(|i| a[i] + (b[i] - a[i]) * s))
}

impl Policy for HoldThenPlan {
    fn name(&self) -> &'static str {
        "hold_then_plan"
    }

    fn reset(&mut self, info: &EpisodeInfo<'_>) -> Result<()> {
        self.params.validate()?;
        self.ctx = Some(Context {
            chain: info.chain.clone(),
            shape: info.scene.object()?.shape,
            presentation: info.scene.presentation_time(),
            dt: info.config.control_dt,
            goal: goal_world(info),
            phase: Phase::Hold,
            cmd: JointConfig(info.config.start_q),
        });
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<Action> {
        let ctx = self.ctx.as_ref().ok_or_else(|| crate::Error::Protocol("policy used before reset".into()))?;
        if let Phase::Hold = ctx.phase {
            if obs.time < ctx.presentation {
                return Ok(Action::hold(&obs.q));
            }
            let phase = self.plan(ctx, obs);
            self.ctx.as_mut().expect("context present").phase = phase;
        }
        let p = self.params.clone();
        let ctx = self.ctx.as_mut().expect("context present");
        let cmd = match &mut ctx.phase {
            Phase::Hold => unreachable!("planned above"),
            Phase::Stuck => obs.q,
            Phase::Transfer { segments, grasp } => {
                let last = segments.last().expect("two segments");
                let end = last.start + last.duration;
                if obs.time >= end && arm_error(&obs.q, &last.to) < 0.01 {
                    let q = last.to;
                    let finger = grasp.closed_finger();
                    ctx.phase = Phase::Close {
                        q,
                        since: obs.time,
                        finger,
                    };
                    q.with_fingers(finger)
                } else {
                    let seg = segments
                        .iter()
                        .find(|s| obs.time < s.start + s.duration)
                        .unwrap_or(last);
                    lerp(&seg.from, &seg.to, smoothstep((obs.time - seg.start) / seg.duration))
                }
            }
            Phase::Close { q, since, finger } => {
                let out = q.with_fingers(*finger);
                if obs.release != ReleasePhase::Driven || obs.time - *since >= p.close_time {
                    ctx.phase = Phase::Carry {
                        palm: obs.palm,
                        finger: *finger,
                    };
                }
                out
            }
            Phase::Carry { palm, finger } => {
                *palm = step_toward(palm, &ctx.goal, p.servo_speed * ctx.dt);
                let (q, _) = track_palm(&ctx.chain, &ctx.cmd, palm, &IkOptions::default(), 10);
                q.with_fingers(*finger)
            }
        };
        ctx.cmd = cmd;
        Ok(Action::hold(&cmd))
    }
}
