//! Scene and trajectory data model, scene files, the procedural catalog
//! generator and the evaluation splits.

mod format;
mod generate;
pub mod hand;
pub mod objects;
mod splits;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pose::Pose;

pub use format::{read_manifest, read_scene, scene_from_str, scene_to_string, write_catalog, write_scene, ManifestEntry};
pub use generate::{generate_catalog, GeneratorConfig, TableGeometry};
pub use hand::HAND_CAPSULES;
pub use objects::{object_spec, ObjectSpec, EXCLUDED_OBJECTS, OBJECTS};
pub use splits::{assign_splits, assign_splits_with, Setup, Split, SplitAssignment, SplitConfig};

pub const SUBJECTS: u8 = 10;
pub const TRIALS: u8 = 5;
/// Every presented trajectory is shorter than this.
pub const MAX_SCENE_DURATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Handedness {
    Right,
    Left,
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Handedness::Right => "right",
            Handedness::Left => "left",
        })
    }
}

impl FromStr for Handedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Handedness::Right),
            "left" => Ok(Handedness::Left),
            _ => Err(Error::Domain(format!("unknown handedness `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame {
    pub time: f64,
    pub hand_pose: Pose,
    pub hand_capsule_poses: [Pose; HAND_CAPSULES],
    pub object_pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distractor {
    pub object_id: String,
    pub pose: Pose,
}

/// One handover trial: the giver's recorded motion plus the table layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: u32,
    pub subject_id: u8,
    pub object_id: String,
    pub trial_index: u8,
    pub handedness: Handedness,
    pub frame_rate: f64,
    pub table_height: f64,
    pub distractors: Vec<Distractor>,
    pub frames: Vec<TrajectoryFrame>,
}

impl Scene {
    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.time)
    }

    /// Time at which the giver reaches its final pose and starts waiting.
    pub fn presentation_time(&self) -> f64 {
        self.duration()
    }

    pub fn object(&self) -> Result<&'static ObjectSpec> {
        object_spec(&self.object_id)
            .ok_or_else(|| Error::Domain(format!("unknown object `{}`", self.object_id)))
    }

    /// Checks the structural invariants a simulated episode relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Domain(format!("scene {}: {m}", self.scene_id)));
        if self.frames.is_empty() {
            return fail("no frames".into());
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return fail(format!("invalid frame rate {}", self.frame_rate));
        }
        self.object()?;
        for d in &self.distractors {
            if object_spec(&d.object_id).is_none() {
                return fail(format!("unknown distractor `{}`", d.object_id));
            }
        }
        if !(1..=SUBJECTS).contains(&self.subject_id) {
            return fail(format!("subject {} out of range", self.subject_id));
        }
        if !(1..=TRIALS).contains(&self.trial_index) {
            return fail(format!("trial {} out of range", self.trial_index));
        }
        check_frame_times(&self.frames, self.frame_rate).map_err(|(i, m)| {
            Error::Domain(format!("scene {}: frame {i}: {m}", self.scene_id))
        })
    }
}

/// Frame times must start at zero, increase strictly and be uniformly spaced.
pub(crate) fn check_frame_times(frames: &[TrajectoryFrame], rate: f64) -> std::result::Result<(), (usize, String)> {
    let step = 1.0 / rate;
    for (i, f) in frames.iter().enumerate() {
        if i == 0 {
            if f.time.abs() > 1e-9 {
                return Err((0, format!("first frame time {} is not 0", f.time)));
            }
            continue;
        }
        let dt = f.time - frames[i - 1].time;
        if dt <= 0.0 {
            return Err((i, format!("time {} does not increase", f.time)));
        }
        if (dt - step).abs() > 1e-9 {
            return Err((i, format!("spacing {dt} differs from 1/frame_rate")));
        }
    }
    Ok(())
}

/// The full scene collection plus the objects excluded from evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub scenes: Vec<Scene>,
    pub excluded_object_ids: BTreeSet<String>,
}

impl Catalog {
    /// Scenes whose target object is graspable, i.e. the evaluation pool.
    pub fn evaluation_scenes(&self) -> impl Iterator<Item = &Scene> {
        self.scenes
            .iter()
            .filter(|s| !self.excluded_object_ids.contains(&s.object_id))
    }

    pub fn without_excluded(&self) -> Catalog {
        Catalog {
            scenes: self.evaluation_scenes().cloned().collect(),
            excluded_object_ids: self.excluded_object_ids.clone(),
        }
    }

    pub fn scene(&self, scene_id: u32) -> Option<&Scene> {
        self.scenes
            .binary_search_by_key(&scene_id, |s| s.scene_id)
            .ok()
            .map(|i| &self.scenes[i])
            .or_else(|| self.scenes.iter().find(|s| s.scene_id == scene_id))
    }
}
