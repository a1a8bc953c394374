//! Privileged scripted receiver used as a test fixture.
//!
//! The whole giver trajectory is known up front, so the grasp and a
//! collision-checked joint path are planned at reset: a joint-space transfer
//! to the pregrasp, then straight palm lines in and out.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grasp::{grasp_catalog, GraspPose};
use super::{arm_error, positive, solve_palm, EpisodeInfo, Policy};
use crate::contact::{query_pair_with_margin, BodyTag, Shape, WorldShape};
use crate::episode::{Action, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::handover::ReleasePhase;
use crate::kinematics::ik::IkOptions;
use crate::kinematics::{Chain, FrameRef, JointConfig};
use crate::pose::Pose;
use crate::scene::{hand, Catalog, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedOracleParams {
    pub pregrasp_offset: f64,
    /// Palm path resolution (m).
    pub waypoint_spacing: f64,
    /// Joint-space path resolution (rad).
    pub joint_step: f64,
    /// Required robot-to-hand clearance along the path (m).
    pub hand_clearance: f64,
    pub close_time: f64,
    /// Joint error at which an intermediate waypoint counts as reached (rad).
    pub pass_tolerance: f64,
    /// Joint error required at segment ends (rad).
    pub settle_tolerance: f64,
}

impl Default for ScriptedOracleParams {
    fn default() -> Self {
        Self {
            pregrasp_offset: 0.1,
            waypoint_spacing: 0.01,
            joint_step: 0.05,
            hand_clearance: 0.015,
            close_time: 1.0,
            pass_tolerance: 0.03,
            settle_tolerance: 0.002,
        }
    }
}

impl ScriptedOracleParams {
    pub fn validate(&self) -> Result<()> {
        positive("scripted_oracle.pregrasp_offset", self.pregrasp_offset)?;
        positive("scripted_oracle.waypoint_spacing", self.waypoint_spacing)?;
        positive("scripted_oracle.joint_step", self.joint_step)?;
        positive("scripted_oracle.hand_clearance", self.hand_clearance)?;
        positive("scripted_oracle.close_time", self.close_time)?;
        positive("scripted_oracle.pass_tolerance", self.pass_tolerance)?;
        positive("scripted_oracle.settle_tolerance", self.settle_tolerance)
    }
}

fn ik_options() -> IkOptions {
    IkOptions {
        position_tolerance: 5e-4,
        orientation_tolerance: 5e-3,
        ..IkOptions::default()
    }
}

/// Joint-space path for the whole handover.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlan {
    pub grasp: GraspPose,
    pub approach: Vec<JointConfig>,
    pub retreat: Vec<JointConfig>,
}

/// Giver end state the plan is made against.
struct Presented {
    object: Pose,
    shape: Shape,
    hand: Vec<WorldShape>,
}

impl Presented {
    fn of(scene: &Scene) -> Result<Self> {
        let last = scene
            .frames
            .last()
            .ok_or_else(|| Error::Domain(format!("scene {} has no frames", scene.scene_id)))?;
        Ok(Self {
            object: last.object_pose,
            shape: scene.object()?.shape,
            hand: last
                .hand_capsule_poses
                .iter()
                .enumerate()
                .map(|(i, p)| WorldShape::new(hand::capsule_shape(i), *p, BodyTag::Hand))
                .collect(),
        })
    }

    fn hand_clear(&self, robot: &[WorldShape], clearance: f64) -> bool {
        robot.iter().all(|r| {
            self.hand
                .iter()
                .all(|h| query_pair_with_margin(&r.shape, &r.pose, &h.shape, &h.pose, clearance).is_none())
        })
    }

    /// Only the gripping pads may come near the object.
    fn object_clear(&self, robot: &[WorldShape], clearance: f64) -> bool {
        robot
            .iter()
            .filter(|r| !r.tag.is_grip_surface())
            .all(|r| query_pair_with_margin(&r.shape, &r.pose, &self.shape, &self.object, clearance).is_none())
    }
}

fn robot_shapes(chain: &Chain, q: &JointConfig) -> Vec<WorldShape> {
    chain.world_shapes(&chain.fk_unchecked(q)).collect()
}

/// IK along the straight palm line from `from` to `to`, seeded
/// sequentially; the returned list excludes the start configuration.
fn line_path(chain: &Chain, seed: &JointConfig, from: &Pose, to: &Pose, spacing: f64) -> Option<Vec<JointConfig>> {
    let dist = (to.position - from.position).norm();
    let angle = from.orientation.angle_to(&to.orientation);
    let n = ((dist / spacing).max(angle / 0.05).ceil() as usize).max(1);
    let opts = ik_options();
    let mut q = *seed;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let palm = from.interpolate(to, k as f64 / n as f64);
        let next = solve_palm(chain, &q, &palm, &opts)?;
        // A large jump between neighbours means the solver switched branch.
        if arm_error(&next, &q) > 0.35 {
            return None;
        }
        q = next;
        out.push(q);
    }
    Some(out)
}

/// Joint-space straight line from `a` to `b`, excluding `a`.
fn joint_path(a: &JointConfig, b: &JointConfig, max_step: f64) -> Vec<JointConfig> {
    let n = ((arm_error(a, b) / max_step).ceil() as usize).max(1);
    (1..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            JointConfig(std::array::from_fn(|i| a[i] + (b[i] - a[i]) * s))
        })
        .collect()
}

/// IK from a spread of seeds around `seed`; picks the solution closest to it.
fn solve_near(chain: &Chain, seed: &JointConfig, palm: &Pose) -> Option<JointConfig> {
    let opts = ik_options();
    let local = chain.base.inverse_transform_point(&palm.position);
    let yaw = local.y.atan2(local.x);
    let mut seeds = vec![*seed];
    let mut aimed = *seed;
    aimed[0] = chain.arm[0].clamp(yaw);
    seeds.push(aimed);
    for base in [*seed, aimed] {
        for d7 in [-FRAC_PI_2, FRAC_PI_2] {
            let mut s = base;
            s[6] = chain.arm[6].clamp(s[6] + d7);
            seeds.push(s);
        }
        for (d2, d4) in [(0.5, 0.8), (0.3, -0.4), (-0.3, -0.6), (0.6, 0.2)] {
            let mut s = base;
            s[1] = chain.arm[1].clamp(s[1] + d2);
            s[3] = chain.arm[3].clamp(s[3] + d4);
            seeds.push(s);
        }
        for d6 in [-0.8, 0.8] {
            let mut s = base;
            s[5] = chain.arm[5].clamp(s[5] + d6);
            seeds.push(s);
        }
    }
    seeds
        .iter()
        .filter_map(|s| solve_palm(chain, s, palm, &opts))
        .min_by(|a, b| arm_error(a, seed).total_cmp(&arm_error(b, seed)))
}

/// Plans grasp, approach and retreat against the scene's final giver pose.
pub fn plan_oracle(scene: &Scene, chain: &Chain, config: &EnvConfig, params: &ScriptedOracleParams) -> Result<Option<OraclePlan>> {
    let presented = Presented::of(scene)?;
    let start = JointConfig(config.start_q);
    let start_palm = chain.forward_kinematics(&start)?.palm;
    let goal = chain.base.transform_point(&config.goal.center());
    let open = chain.max_finger_opening();

    let mut grasps: Vec<(f64, GraspPose)> = grasp_catalog(&presented.shape, chain)
        .into_iter()
        .map(|mut g| {
            g.pregrasp_offset = params.pregrasp_offset;
            let pre = g.pregrasp(&presented.object);
            let cost = (pre.position - start_palm.position).norm()
                + 0.1 * pre.orientation.angle_to(&start_palm.orientation);
            (cost, g)
        })
        .collect();
    grasps.sort_by(|a, b| a.0.total_cmp(&b.0));

    for (_, g) in grasps {
        let pre = g.pregrasp(&presented.object);
        let grasp_palm = g.palm(&presented.object);
        // Cheap rejection with the gripper alone before any IK.
        if !presented.hand_clear(&gripper_shapes(chain, &grasp_palm, open), params.hand_clearance)
            || !presented.hand_clear(&gripper_shapes(chain, &grasp_palm, g.closed_finger()), params.hand_clearance)
        {
            continue;
        }
        let Some(q_pre) = solve_near(chain, &start, &pre) else {
            continue;
        };
        let Some(inward) = line_path(chain, &q_pre, &pre, &grasp_palm, params.waypoint_spacing) else {
            continue;
        };
        let mut approach = joint_path(&start, &q_pre, params.joint_step);
        approach.extend(inward);
        for q in &mut approach {
            *q = q.with_fingers(open);
        }
        let clear = approach.iter().all(|q| {
            let shapes = robot_shapes(chain, q);
            presented.hand_clear(&shapes, params.hand_clearance) && presented.object_clear(&shapes, 0.002)
        });
        if !clear {
            continue;
        }

        let grasp_q = *approach.last().expect("non-empty");
        let lift = Pose::new(pre.position, grasp_palm.orientation);
        let Some(lifted) = line_path(chain, &grasp_q, &grasp_palm, &lift, params.waypoint_spacing) else {
            continue;
        };
        let Some(retreat) = plan_retreat(chain, &presented, lifted, &lift, &goal, &start_palm, g.closed_finger(), params)
        else {
            continue;
        };
        return Ok(Some(OraclePlan {
            grasp: g,
            approach,
            retreat,
        }));
    }
    Ok(None)
}

/// Lift followed by a carry to the goal that keeps clear of the hand.
/// Tries a straight palm line first, then joint-space moves to a few goal
/// orientations, each optionally after backing off toward the base.
#[allow(clippy::too_many_arguments)]
fn plan_retreat(
    chain: &Chain,
    presented: &Presented,
    lifted: Vec<JointConfig>,
    lift: &Pose,
    goal: &Vector3<f64>,
    start_palm: &Pose,
    finger: f64,
    params: &ScriptedOracleParams,
) -> Option<Vec<JointConfig>> {
    let clear = |path: &[JointConfig]| {
        path.iter()
            .all(|q| presented.hand_clear(&robot_shapes(chain, &q.with_fingers(finger)), params.hand_clearance))
    };
    if !clear(&lifted) {
        return None;
    }
    let top = *lifted.last().expect("non-empty");
    let goal_poses = [Pose::new(*goal, lift.orientation), Pose::new(*goal, start_palm.orientation)];
    let toward_base = {
        let d = chain.base.position - lift.position;
        Vector3::new(d.x, d.y, 0.0).try_normalize(1e-9).unwrap_or_else(Vector3::zeros) * 0.15
    };
    let back_off = Pose::new(lift.position + toward_base + Vector3::new(0.0, 0.0, 0.05), lift.orientation);

    let mut candidates: Vec<Vec<JointConfig>> = Vec::new();
    if let Some(p) = line_path(chain, &top, lift, &goal_poses[0], params.waypoint_spacing) {
        candidates.push(p);
    }
    for gp in &goal_poses {
        if let Some(q_goal) = solve_near(chain, &top, gp) {
            candidates.push(joint_path(&top, &q_goal, params.joint_step));
        }
    }
    if let Some(mid) = line_path(chain, &top, lift, &back_off, params.waypoint_spacing) {
        let q_mid = *mid.last().expect("non-empty");
        for gp in &goal_poses {
            if let Some(q_goal) = solve_near(chain, &q_mid, gp) {
                let mut p = mid.clone();
                p.extend(joint_path(&q_mid, &q_goal, params.joint_step));
                candidates.push(p);
            }
        }
    }
    candidates.into_iter().find(|c| clear(c)).map(|tail| {
        lifted
            .into_iter()
            .chain(tail)
            .map(|q| q.with_fingers(finger))
            .collect()
    })
}

/// Shapes carried by the hand and finger frames, placed for a palm pose.
fn gripper_shapes(chain: &Chain, palm: &Pose, finger: f64) -> Vec<WorldShape> {
    chain
        .shapes
        .iter()
        .filter_map(|s| {
            let frame = match s.frame {
                FrameRef::Hand => *palm,
                FrameRef::Finger(side) => {
                    let j = &chain.fingers[side.index()];
                    palm.compose(&j.origin).compose(&j.motion(finger))
                }
                _ => return None,
            };
            Some(WorldShape::new(s.shape, frame.compose(&s.local), s.tag))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Wait,
    Approach(usize),
    Close,
    Retreat(usize),
    Hold,
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    params: ScriptedOracleParams,
    plan: Option<OraclePlan>,
    presentation: f64,
    stage: Stage,
    close_since: f64,
}

impl ScriptedOracle {
    pub fn new(params: ScriptedOracleParams) -> Self {
        Self {
            params,
            plan: None,
            presentation: 0.0,
            stage: Stage::Wait,
            close_since: 0.0,
        }
    }

    pub fn plan(&self) -> Option<&OraclePlan> {
        self.plan.as_ref()
    }

    fn follow(&self, obs: &Observation, path: &[JointConfig], i: usize) -> (usize, bool) {
        let last = path.len() - 1;
        let mut i = i;
        while i < last && arm_error(&obs.q, &path[i]) < self.params.pass_tolerance {
            i += 1;
        }
        let done = i == last && obs.q.max_abs_diff(&path[last]) < self.params.settle_tolerance;
        (i, done)
    }
}

impl Policy for ScriptedOracle {
    fn name(&self) -> &'static str {
        "scripted_oracle"
    }

    fn reset(&mut self, info: &EpisodeInfo<'_>) -> Result<()> {
        self.params.validate()?;
        self.plan = plan_oracle(info.scene, info.chain, info.config, &self.params)?;
        self.presentation = info.scene.presentation_time();
        self.stage = Stage::Wait;
        self.close_since = 0.0;
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<Action> {
        let Some(plan) = self.plan.as_ref() else {
            return Ok(Action::hold(&obs.q));
        };
        let target = match self.stage {
            Stage::Wait => {
                if obs.time < self.presentation {
                    return Ok(Action::hold(&obs.q));
                }
                self.stage = Stage::Approach(0);
                return self.act(obs);
            }
            Stage::Approach(i) => {
                let (i, done) = self.follow(obs, &plan.approach, i);
                self.stage = if done {
                    self.close_since = obs.time;
                    Stage::Close
                } else {
                    Stage::Approach(i)
                };
                plan.approach[i]
            }
            Stage::Close => {
                let q = plan.approach.last().expect("non-empty").with_fingers(plan.grasp.closed_finger());
                if obs.release != ReleasePhase::Driven || obs.time - self.close_since >= self.params.close_time {
                    self.stage = Stage::Retreat(0);
                }
                q
            }
            Stage::Retreat(i) => {
                let (i, done) = self.follow(obs, &plan.retreat, i);
                self.stage = if done { Stage::Hold } else { Stage::Retreat(i) };
                plan.retreat[i]
            }
            Stage::Hold => *plan.retreat.last().expect("non-empty"),
        };
        Ok(Action::hold(&target))
    }
}

/// Scene ids (in id order, at most `n`) presented with the hand fully
/// below the object and a vertical grasp whose gripper clears the hand.
pub fn curated_easy_subset(catalog: &Catalog, chain: &Chain, n: usize) -> Vec<u32> {
    let mut scenes: Vec<&Scene> = catalog.evaluation_scenes().collect();
    scenes.sort_by_key(|s| s.scene_id);
    scenes
        .into_iter()
        .filter(|s| is_easy(s, chain))
        .take(n)
        .map(|s| s.scene_id)
        .collect()
}

fn is_easy(scene: &Scene, chain: &Chain) -> bool {
    let Ok(p) = Presented::of(scene) else {
        return false;
    };
    let bottom = p.object.position.z - p.shape.support_extent(&p.object, &-Vector3::z());
    let hand_top = p
        .hand
        .iter()
        .map(|h| h.pose.position.z + h.shape.support_extent(&h.pose, &Vector3::z()))
        .fold(f64::NEG_INFINITY, f64::max);
    if hand_top + 0.002 > bottom {
        return false;
    }
    grasp_catalog(&p.shape, chain).iter().any(|g| {
        let palm = g.palm(&p.object);
        palm.axis(2).z < -0.9
            && p.hand_clear(&gripper_shapes(chain, &palm, chain.max_finger_opening()), 0.02)
    })
}
