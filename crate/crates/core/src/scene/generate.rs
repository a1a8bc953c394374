//! Procedural stand-in for motion-capture handover trials.
//!
//! Each scene picks an object up from the table, carries it along a smooth
//! arc and holds it at a presentation pose in front of the robot.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hand::capsule_poses;
use super::objects::{ObjectSpec, EXCLUDED_OBJECTS, OBJECTS};
use super::{Catalog, Distractor, Handedness, Scene, TrajectoryFrame, MAX_SCENE_DURATION, SUBJECTS, TRIALS};
use crate::error::{Error, Result};
use crate::pose::{rotation_from_axes, yaw_rotation, Pose};

/// Table footprint in the world frame; its top sits at the scene's table height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGeometry {
    pub center_x: f64,
    pub center_y: f64,
    pub half_x: f64,
    pub half_y: f64,
    pub thickness: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        Self {
            center_x: 0.85,
            center_y: 0.0,
            half_x: 0.4,
            half_y: 0.6,
            thickness: 0.05,
        }
    }
}

impl TableGeometry {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.half_x, self.half_y, self.thickness];
        if dims.iter().all(|d| *d > 0.0 && d.is_finite())
            && self.center_x.is_finite()
            && self.center_y.is_finite()
        {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid table geometry {self:?}")))
        }
    }

    pub fn contains_xy(&self, p: &Vector3<f64>) -> bool {
        (p.x - self.center_x).abs() <= self.half_x && (p.y - self.center_y).abs() <= self.half_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub frame_rate: f64,
    pub table_height: f64,
    pub table: TableGeometry,
    /// World x range of the presented object position (m).
    pub presentation_x: [f64; 2],
    pub presentation_y: [f64; 2],
    /// Presentation height above the table top (m).
    pub presentation_height: [f64; 2],
    /// Per-subject offset applied to the presentation centre (m).
    pub subject_spread: f64,
    /// Trajectory duration range (s).
    pub duration: [f64; 2],
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            frame_rate: 30.0,
            table_height: 0.0,
            table: TableGeometry::default(),
            presentation_x: [0.6, 0.7],
            presentation_y: [-0.15, 0.15],
            presentation_height: [0.24, 0.36],
            subject_spread: 0.02,
            duration: [2.6, 2.95],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive");
        }
        if !self.table_height.is_finite() {
            return bad("table_height must be finite");
        }
        self.table.validate()?;
        for (name, r) in [
            ("presentation_x", self.presentation_x),
            ("presentation_y", self.presentation_y),
            ("presentation_height", self.presentation_height),
            ("duration", self.duration),
        ] {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(Error::Config(format!("{name} range is empty")));
            }
        }
        if self.presentation_height[0] <= 0.0 {
            return bad("presentation_height must be above the table");
        }
        if self.duration[0] < 1.5 || self.duration[1] >= MAX_SCENE_DURATION {
            return bad("duration must lie in [1.5, 3.0) s");
        }
        if !(self.subject_spread >= 0.0) {
            return bad("subject_spread must be non-negative");
        }
        if self.table.half_x < 0.2 || self.table.half_y < 0.3 {
            return bad("table is too small to place objects");
        }
        Ok(())
    }
}

/// How the giver holds the object relative to the robot's viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HoldStyle {
    Below,
    Back,
    Top,
    Side,
    Front,
}

const STYLE_WEIGHTS: [(HoldStyle, f64); 5] = [
    (HoldStyle::Below, 0.3),
    (HoldStyle::Back, 0.25),
    (HoldStyle::Top, 0.15),
    (HoldStyle::Side, 0.15),
    (HoldStyle::Front, 0.15),
];

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed) ^ mix(stream.wrapping_mul(0x1000_0000_01B3)) ^ index))
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Scene id for a (subject, object, trial) triple, all 1-based except object.
pub(crate) fn scene_id_for(subject: u8, object_index: usize, trial: u8) -> u32 {
    ((u32::from(subject) - 1) * OBJECTS.len() as u32 + object_index as u32) * u32::from(TRIALS)
        + (u32::from(trial) - 1)
}

/// Generates the full 10 subjects x 20 objects x 5 trials catalog.
pub fn generate_catalog(seed: u64, config: &GeneratorConfig) -> Result<Catalog> {
    config.validate()?;
    let mut scenes = Vec::with_capacity(usize::from(SUBJECTS) * OBJECTS.len() * usize::from(TRIALS));
    for subject in 1..=SUBJECTS {
        let mut srng = rng_for(seed, 1, u64::from(subject));
        let spread = config.subject_spread;
        let offset = Vector3::new(
            uniform(&mut srng, [-spread, spread]),
            uniform(&mut srng, [-spread, spread]),
            uniform(&mut srng, [-spread, spread]),
        );
        for (object_index, object) in OBJECTS.iter().enumerate() {
            for trial in 1..=TRIALS {
                let scene_id = scene_id_for(subject, object_index, trial);
                let mut rng = rng_for(seed, 2, u64::from(scene_id));
                let handedness = match trial {
                    1 | 2 => Handedness::Right,
                    3 | 4 => Handedness::Left,
                    _ => {
                        if rng.random_bool(0.5) {
                            Handedness::Right
                        } else {
                            Handedness::Left
                        }
                    }
                };
                scenes.push(generate_scene(
                    &mut rng,
                    config,
                    SceneKey {
                        scene_id,
                        subject,
                        trial,
                        handedness,
                        object,
                        subject_offset: offset,
                    },
                ));
            }
        }
    }
    Ok(Catalog {
        scenes,
        excluded_object_ids: EXCLUDED_OBJECTS.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
    })
}

struct SceneKey<'a> {
    scene_id: u32,
    subject: u8,
    trial: u8,
    handedness: Handedness,
    object: &'a ObjectSpec,
    subject_offset: Vector3<f64>,
}

fn pick_style(rng: &mut ChaCha8Rng) -> HoldStyle {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (style, w) in STYLE_WEIGHTS {
        acc += w;
        if u < acc {
            return style;
        }
    }
    HoldStyle::Below
}

/// Hand root pose in the object frame for a holding style.
fn hand_in_object(style: HoldStyle, object: &ObjectSpec, handedness: Handedness) -> Pose {
    let h = object.half_extents();
    let gap = 0.032;
    let (x, z, origin) = match style {
        HoldStyle::Below => (-Vector3::x(), Vector3::z(), Vector3::new(0.06, 0.0, -(h.z + gap))),
        HoldStyle::Top => (-Vector3::x(), -Vector3::z(), Vector3::new(0.06, 0.0, h.z + gap)),
        HoldStyle::Back => (Vector3::z(), -Vector3::x(), Vector3::new(h.x + gap, 0.0, -0.05)),
        HoldStyle::Front => (Vector3::z(), Vector3::x(), Vector3::new(-(h.x + gap), 0.0, -0.05)),
        HoldStyle::Side => {
            let s = match handedness {
                Handedness::Right => 1.0,
                Handedness::Left => -1.0,
            };
            (
                Vector3::z(),
                Vector3::new(0.0, -s, 0.0),
                Vector3::new(0.0, s * (h.y + gap), -0.05),
            )
        }
    };
    let y = z.cross(&x);
    Pose::new(origin, rotation_from_axes(x, y, z))
}

fn place_on_table(
    rng: &mut ChaCha8Rng,
    config: &GeneratorConfig,
    radius: f64,
    placed: &[(Vector3<f64>, f64)],
) -> Vector3<f64> {
    let t = &config.table;
    let xr = [t.center_x - t.half_x + 0.25, t.center_x + t.half_x - 0.1];
    let yr = [t.center_y - t.half_y + 0.15, t.center_y + t.half_y - 0.15];
    let mut candidate = Vector3::new(xr[0], yr[0], 0.0);
    let mut best_clearance = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let p = Vector3::new(uniform(rng, xr), uniform(rng, yr), 0.0);
        let clearance = placed
            .iter()
            .map(|(q, r)| (p - q).norm() - r - radius)
            .fold(f64::INFINITY, f64::min);
        if clearance > 0.01 {
            return p;
        }
        if clearance > best_clearance {
            best_clearance = clearance;
            candidate = p;
        }
    }
    candidate
}

fn generate_scene(rng: &mut ChaCha8Rng, config: &GeneratorConfig, key: SceneKey<'_>) -> Scene {
    let table_h = config.table_height;
    let object = key.object;
    let style = pick_style(rng);

    // Table layout: the target first, then 2 to 4 distractors.
    let mut placed: Vec<(Vector3<f64>, f64)> = Vec::new();
    let target_xy = place_on_table(rng, config, object.footprint_radius(), &placed);
    placed.push((target_xy, object.footprint_radius()));
    let n_distractors = rng.random_range(2..=4usize);
    let mut pool: Vec<&ObjectSpec> = OBJECTS.iter().filter(|o| o.id != object.id).collect();
    let mut distractors = Vec::with_capacity(n_distractors);
    for _ in 0..n_distractors {
        let spec = pool.remove(rng.random_range(0..pool.len()));
        let xy = place_on_table(rng, config, spec.footprint_radius(), &placed);
        placed.push((xy, spec.footprint_radius()));
        let yaw = rng.random_range(-PI..PI);
        distractors.push(Distractor {
            object_id: spec.id.to_string(),
            pose: Pose::new(
                Vector3::new(xy.x, xy.y, table_h + spec.half_height()),
                yaw_rotation(yaw),
            ),
        });
    }

    let start = Pose::new(
        Vector3::new(target_xy.x, target_xy.y, table_h + object.half_height()),
        yaw_rotation(rng.random_range(-PI..PI)),
    );
    let side = match key.handedness {
        Handedness::Right => 1.0,
        Handedness::Left => -1.0,
    };
    let center = Vector3::new(
        uniform(rng, config.presentation_x),
        uniform(rng, config.presentation_y) + 0.03 * side,
        table_h + uniform(rng, config.presentation_height),
    ) + key.subject_offset;
    let present = Pose::new(center, yaw_rotation(rng.random_range(-0.3..0.3)));

    let duration = uniform(rng, config.duration);
    let n_frames = (duration * config.frame_rate).floor() as usize + 1;
    let total = (n_frames - 1) as f64 / config.frame_rate;
    let t_pick = rng.random_range(0.7..0.95);
    let hold = rng.random_range(0.2..0.35);
    let t_arrive = (total - hold).max(t_pick + 0.8);
    let lift = rng.random_range(0.04..0.1);

    let grip = hand_in_object(style, object, key.handedness);
    let hand_at_pick = start.compose(&grip);
    let hand_start = Pose::new(
        Vector3::new(
            config.table.center_x + config.table.half_x + 0.1,
            hand_at_pick.position.y + 0.15 * side,
            table_h + 0.15,
        ),
        hand_at_pick.orientation * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.3 * side),
    );

    let frames = (0..n_frames)
        .map(|k| {
            let time = k as f64 / config.frame_rate;
            let object_pose = if time <= t_pick {
                start
            } else if time >= t_arrive {
                present
            } else {
                let s = min_jerk((time - t_pick) / (t_arrive - t_pick));
                let mut p = start.interpolate(&present, s);
                p.position.z += lift * (PI * s).sin();
                p
            };
            let hand_pose = if time < t_pick {
                hand_start.interpolate(&hand_at_pick, min_jerk(time / t_pick))
            } else {
                object_pose.compose(&grip)
            };
            TrajectoryFrame {
                time,
                hand_pose,
                hand_capsule_poses: capsule_poses(&hand_pose, key.handedness),
                object_pose,
            }
        })
        .collect();

    Scene {
        scene_id: key.scene_id,
        subject_id: key.subject,
        object_id: object.id.to_string(),
        trial_index: key.trial,
        handedness: key.handedness,
        frame_rate: config.frame_rate,
        table_height: table_h,
        distractors,
        frames,
    }
}
