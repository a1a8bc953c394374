//! Damped-least-squares inverse kinematics for the grasp centre (TCP).
//!
//! A policy utility, not part of the stepping kernel.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use super::{Chain, JointConfig, ARM_DOF};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    /// Largest joint-space step norm per iteration (rad).
    pub max_step: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Weight of the orientation error relative to position (m/rad).
    pub orientation_weight: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_step: 0.2,
            max_iterations: 300,
            position_tolerance: 2e-3,
            orientation_tolerance: 2e-2,
            orientation_weight: 0.3,
        }
    }
}

/// Pose error `[position; rotation vector]` from `current` to `target`.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// One damped-least-squares update of the arm joints toward `target`.
/// Returns `None` if the normal equations are singular.
pub fn dls_step(chain: &Chain, q: &JointConfig, target: &Pose, opts: &IkOptions) -> Option<JointConfig> {
    let frames = chain.fk_unchecked(q);
    let err = pose_error(&frames.tcp, target);
    dls_update(chain, q, &frames, &err, opts)
}

/// DLS update for an arbitrary TCP twist error.
pub fn dls_update(
    chain: &Chain,
    q: &JointConfig,
    frames: &super::LinkFrames,
    err: &Vector6<f64>,
    opts: &IkOptions,
) -> Option<JointConfig> {
    let mut jac = DMatrix::from_iterator(6, ARM_DOF, chain.tcp_jacobian(frames).iter().copied());
    let w = opts.orientation_weight;
    let mut e = DVector::from_iterator(6, err.iter().copied());
    for r in 3..6 {
        jac.row_mut(r).scale_mut(w);
        e[r] *= w;
    }
    let jjt = &jac * jac.transpose() + DMatrix::identity(6, 6) * (opts.damping * opts.damping);
    let solved = jjt.cholesky()?.solve(&e);
    let mut dq = jac.transpose() * solved;
    let norm = dq.norm();
    if !norm.is_finite() {
        return None;
    }
    if norm > opts.max_step {
        dq *= opts.max_step / norm;
    }
    let mut out = *q;
    for i in 0..ARM_DOF {
        out[i] = chain.arm[i].clamp(q[i] + dq[i]);
    }
    Some(out)
}

pub fn within_tolerance(err: &Vector6<f64>, opts: &IkOptions) -> bool {
    let p = Vector3::new(err[0], err[1], err[2]).norm();
    let r = Vector3::new(err[3], err[4], err[5]).norm();
    p <= opts.position_tolerance && r <= opts.orientation_tolerance
}

/// Iterates DLS from `seed` until the TCP reaches `target` within tolerance.
pub fn solve(chain: &Chain, seed: &JointConfig, target: &Pose, opts: &IkOptions) -> Option<JointConfig> {
    let mut q = *seed;
    for _ in 0..opts.max_iterations {
        let frames = chain.fk_unchecked(&q);
        let err = pose_error(&frames.tcp, target);
        if within_tolerance(&err, opts) {
            return Some(q);
        }
        q = dls_update(chain, &q, &frames, &err, opts)?;
    }
    let err = pose_error(&chain.fk_unchecked(&q).tcp, target);
    within_tolerance(&err, opts).then_some(q)
}
