//! Receiver policies driving the episode kernel.

pub mod grasp;
mod hold_then_plan;
mod oracle;
mod reactive;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::episode::{Action, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::kinematics::ik::{self, IkOptions};
use crate::kinematics::{Chain, JointConfig, ARM_DOF};
use crate::pose::Pose;
use crate::scene::Scene;

pub use grasp::{grasp_catalog, GraspPose};
pub use hold_then_plan::{HoldThenPlan, HoldThenPlanParams};
pub use oracle::{curated_easy_subset, plan_oracle, OraclePlan, ScriptedOracle, ScriptedOracleParams};
pub use reactive::{ReactiveFrontApproach, ReactiveParams};

/// What a policy may know about an episode before it starts.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeInfo<'a> {
    pub scene: &'a Scene,
    pub chain: &'a Chain,
    pub config: &'a EnvConfig,
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Clears all per-episode state.
    fn reset(&mut self, info: &EpisodeInfo<'_>) -> Result<()>;

    fn act(&mut self, obs: &Observation) -> Result<Action>;
}

/// Never moves.
#[derive(Debug, Clone, Default)]
pub struct ZeroMotion;

impl Policy for ZeroMotion {
    fn name(&self) -> &'static str {
        "zero_motion"
    }

    fn reset(&mut self, _: &EpisodeInfo<'_>) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<Action> {
        Ok(Action::hold(&obs.q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    HoldThenPlan,
    ReactiveFrontApproach,
    ScriptedOracle,
    ZeroMotion,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::HoldThenPlan,
        PolicyKind::ReactiveFrontApproach,
        PolicyKind::ScriptedOracle,
        PolicyKind::ZeroMotion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::HoldThenPlan => "hold_then_plan",
            PolicyKind::ReactiveFrontApproach => "reactive_front_approach",
            PolicyKind::ScriptedOracle => "scripted_oracle",
            PolicyKind::ZeroMotion => "zero_motion",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown policy `{s}` (available: {})", names.join(", ")))
        })
    }
}

/// Tunables for every built-in policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    pub hold_then_plan: HoldThenPlanParams,
    pub reactive_front_approach: ReactiveParams,
    pub scripted_oracle: ScriptedOracleParams,
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        self.hold_then_plan.validate()?;
        self.reactive_front_approach.validate()?;
        self.scripted_oracle.validate()
    }
}

pub fn build_policy(kind: PolicyKind, params: &PolicyParams) -> Box<dyn Policy> {
    match kind {
        PolicyKind::HoldThenPlan => Box::new(HoldThenPlan::new(params.hold_then_plan.clone())),
        PolicyKind::ReactiveFrontApproach => Box::new(ReactiveFrontApproach::new(params.reactive_front_approach.clone())),
        PolicyKind::ScriptedOracle => Box::new(ScriptedOracle::new(params.scripted_oracle.clone())),
        PolicyKind::ZeroMotion => Box::new(ZeroMotion),
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be positive")))
    }
}

/// TCP target for a palm pose.
pub(crate) fn tcp_of(chain: &Chain, palm: &Pose) -> Pose {
    palm.compose(&chain.tcp_offset)
}

/// Runs at most `iterations` DLS updates toward the palm pose `palm`,
/// keeping the finger joints of `seed`. Returns the last iterate and
/// whether it reached tolerance.
pub(crate) fn track_palm(
    chain: &Chain,
    seed: &JointConfig,
    palm: &Pose,
    opts: &IkOptions,
    iterations: usize,
) -> (JointConfig, bool) {
    let target = tcp_of(chain, palm);
    let mut q = *seed;
    for _ in 0..iterations {
        let frames = chain.fk_unchecked(&q);
        let err = ik::pose_error(&frames.tcp, &target);
        if ik::within_tolerance(&err, opts) {
            return (q, true);
        }
        match ik::dls_update(chain, &q, &frames, &err, opts) {
            Some(next) => q = next,
            None => return (q, false),
        }
    }
    let err = ik::pose_error(&chain.fk_unchecked(&q).tcp, &target);
    (q, ik::within_tolerance(&err, opts))
}

pub(crate) fn solve_palm(chain: &Chain, seed: &JointConfig, palm: &Pose, opts: &IkOptions) -> Option<JointConfig> {
    ik::solve(chain, seed, &tcp_of(chain, palm), opts)
}

/// Palm pose moved toward `goal` by at most `max_move`, orientation kept.
pub(crate) fn step_toward(palm: &Pose, goal: &Vector3<f64>, max_move: f64) -> Pose {
    let d = goal - palm.position;
    let n = d.norm();
    let mut out = *palm;
    out.position += if n > max_move { d * (max_move / n) } else { d };
    out
}

/// Goal centre in world coordinates.
pub(crate) fn goal_world(info: &EpisodeInfo<'_>) -> Vector3<f64> {
    info.chain.base.transform_point(&info.config.goal.center())
}

/// Largest arm joint difference.
pub(crate) fn arm_error(a: &JointConfig, b: &JointConfig) -> f64 {
    (0..ARM_DOF).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        let err = "dance".parse::<PolicyKind>().unwrap_err().to_string();
        assert!(err.contains("hold_then_plan"));
    }
}
