//! Deterministic simulation kernel and benchmark harness for
//! human-to-robot object handovers.
//!
//! The giver's motion is replayed from recorded (here: procedurally
//! generated) trajectories, a 7-DoF arm with a parallel-jaw gripper is
//! stepped with a velocity-clamped joint tracking model, and contacts
//! between primitive proxies drive the release triggers and the
//! success/failure automaton.

// `!(x < y)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod container;
pub mod contact;
pub mod kinematics;
pub mod episode;
pub mod error;
pub mod handover;
pub mod policies;
pub mod pose;
pub mod scene;

pub use error::{Error, Result};
pub use pose::Pose;
