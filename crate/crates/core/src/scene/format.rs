//! Scene files and the catalog manifest.
//!
//! Scene file layout (one record per line, after the `#handover-scene v1`
//! magic line):
//!
//! ```text
//! scene_id <u32>
//! subject <1..10>
//! object <catalog id>
//! trial <1..5>
//! handedness right|left
//! frame_rate <f64>
//! table_height <f64>
//! distractors <count>
//! distractor <object id> <px py pz qw qx qy qz>      (count times)
//! frames <count>
//! f <time> <hand root: 7> <5 capsules: 5 x 7> <object: 7>   (count times)
//! ```
//!
//! Poses are `px py pz qw qx qy qz`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{check_frame_times, Catalog, Distractor, Handedness, Scene, TrajectoryFrame, HAND_CAPSULES};
use crate::container::{Reader, Writer};
use crate::error::{Error, Result};
use crate::pose::Pose;

const SCENE_KIND: &str = "scene";
const MANIFEST_KIND: &str = "manifest";
const FRAME_FIELDS: usize = 1 + 7 + 7 * HAND_CAPSULES + 7;

pub fn scene_to_string(scene: &Scene) -> String {
    let mut w = Writer::new(SCENE_KIND);
    w.record("scene_id").field(scene.scene_id).end();
    w.record("subject").field(scene.subject_id).end();
    w.record("object").field(&scene.object_id).end();
    w.record("trial").field(scene.trial_index).end();
    w.record("handedness").field(scene.handedness).end();
    w.record("frame_rate").field(scene.frame_rate).end();
    w.record("table_height").field(scene.table_height).end();
    w.record("distractors").field(scene.distractors.len()).end();
    for d in &scene.distractors {
        w.record("distractor").field(&d.object_id).pose(&d.pose).end();
    }
    w.record("frames").field(scene.frames.len()).end();
    for f in &scene.frames {
        let mut r = w.record("f").field(f.time).pose(&f.hand_pose);
        for c in &f.hand_capsule_poses {
            r = r.pose(c);
        }
        r.pose(&f.object_pose).end();
    }
    w.finish()
}

pub fn scene_from_str(text: &str) -> Result<Scene> {
    let mut r = Reader::new(text, SCENE_KIND)?;
    fn header<'a>(r: &mut Reader<'a>, key: &str) -> Result<crate::container::Record<'a>> {
        let rec = r.expect(key)?;
        rec.expect_len(1)?;
        Ok(rec)
    }
    let scene_id = header(&mut r, "scene_id")?.parse(0)?;
    let subject_id = header(&mut r, "subject")?.parse(0)?;
    let object_id = header(&mut r, "object")?.str(0)?.to_string();
    let trial_index = header(&mut r, "trial")?.parse(0)?;
    let rec = header(&mut r, "handedness")?;
    let handedness: Handedness = rec
        .str(0)?
        .parse()
        .map_err(|e: Error| Error::format(rec.field_offset(0), e.to_string()))?;
    let rec = header(&mut r, "frame_rate")?;
    let frame_rate = rec.f64(0)?;
    if frame_rate <= 0.0 {
        return Err(Error::format(rec.field_offset(0), "frame_rate must be positive"));
    }
    let table_height = header(&mut r, "table_height")?.f64(0)?;
    let n_distractors: usize = header(&mut r, "distractors")?.parse(0)?;
    let mut distractors = Vec::with_capacity(n_distractors);
    for _ in 0..n_distractors {
        let rec = r.expect("distractor")?;
        rec.expect_len(8)?;
        distractors.push(Distractor {
            object_id: rec.str(0)?.to_string(),
            pose: rec.pose(1)?,
        });
    }
    let n_frames: usize = header(&mut r, "frames")?.parse(0)?;
    let mut frames: Vec<TrajectoryFrame> = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let rec = r.expect("f")?;
        rec.expect_len(FRAME_FIELDS)?;
        let time = rec.f64(0)?;
        let mut capsules = [Pose::identity(); HAND_CAPSULES];
        for (i, c) in capsules.iter_mut().enumerate() {
            *c = rec.pose(8 + 7 * i)?;
        }
        let frame = TrajectoryFrame {
            time,
            hand_pose: rec.pose(1)?,
            hand_capsule_poses: capsules,
            object_pose: rec.pose(8 + 7 * HAND_CAPSULES)?,
        };
        frames.push(frame);
        if let Err((_, msg)) = check_frame_times(&frames, frame_rate) {
            return Err(Error::format(rec.offset, msg));
        }
    }
    r.expect_end()?;
    Ok(Scene {
        scene_id,
        subject_id,
        object_id,
        trial_index,
        handedness,
        frame_rate,
        table_height,
        distractors,
        frames,
    })
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene_from_str(&text)
}

pub fn write_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene_to_string(scene)).map_err(|e| Error::io(path, e))
}

/// One manifest line: where a scene lives plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub scene_id: u32,
    pub path: PathBuf,
    pub subject_id: u8,
    pub object_id: String,
    pub trial_index: u8,
    pub handedness: Handedness,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn scene_file_name(scene_id: u32) -> String {
    format!("scene_{scene_id:04}.txt")
}

/// Writes every scene plus `manifest.txt` under `dir`.
pub fn write_catalog(catalog: &Catalog, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer::new(MANIFEST_KIND);
    let excluded: Vec<&str> = catalog.excluded_object_ids.iter().map(String::as_str).collect();
    let mut rec = w.record("excluded").field(excluded.len());
    for id in excluded {
        rec = rec.field(id);
    }
    rec.end();
    for scene in &catalog.scenes {
        let name = scene_file_name(scene.scene_id);
        write_scene(scene, dir.join(&name))?;
        w.record("scene")
            .field(scene.scene_id)
            .field(&name)
            .field(scene.subject_id)
            .field(&scene.object_id)
            .field(scene.trial_index)
            .field(scene.handedness)
            .end();
    }
    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, w.finish()).map_err(|e| Error::io(&manifest, e))
}

/// Reads the manifest under `dir` without loading the scenes.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<(Vec<ManifestEntry>, Vec<String>)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut r = Reader::new(&text, MANIFEST_KIND)?;
    let rec = r.expect("excluded")?;
    let n: usize = rec.parse(0)?;
    rec.expect_len(n + 1)?;
    let excluded = (0..n)
        .map(|i| rec.str(i + 1).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    while let Some(rec) = r.next_record() {
        if rec.key != "scene" {
            return Err(Error::format(rec.offset, format!("unexpected record `{}`", rec.key)));
        }
        rec.expect_len(6)?;
        entries.push(ManifestEntry {
            scene_id: rec.parse(0)?,
            path: dir.join(rec.str(1)?),
            subject_id: rec.parse(2)?,
            object_id: rec.str(3)?.to_string(),
            trial_index: rec.parse(4)?,
            handedness: rec
                .str(5)?
                .parse()
                .map_err(|e: Error| Error::format(rec.field_offset(5), e.to_string()))?,
        });
    }
    Ok((entries, excluded))
}

impl Catalog {
    /// Loads a catalog written by [`write_catalog`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Catalog> {
        let (entries, excluded) = read_manifest(&dir)?;
        let mut scenes = entries
            .iter()
            .map(|e| read_scene(&e.path))
            .collect::<Result<Vec<_>>>()?;
        scenes.sort_by_key(|s| s.scene_id);
        Ok(Catalog {
            scenes,
            excluded_object_ids: excluded.into_iter().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_catalog, GeneratorConfig};

    fn sample() -> Scene {
        let cat = generate_catalog(7, &GeneratorConfig::default()).unwrap();
        cat.scenes[123].clone()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = sample();
        let text = scene_to_string(&s);
        let back = scene_from_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(scene_to_string(&back), text);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = scene_to_string(&sample());
        let cut = &text[..text.len() * 2 / 3];
        let cut = &cut[..cut.rfind('\n').unwrap() + 1];
        match scene_from_str(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_frame_time_is_rejected() {
        let text = scene_to_string(&sample());
        let mut lines: Vec<&str> = text.lines().collect();
        let first = lines.iter().position(|l| l.starts_with("f ")).unwrap();
        // Replace frame 2 by a copy of frame 1.
        let dup = lines[first + 1];
        lines[first + 2] = dup;
        let broken = lines.join("\n") + "\n";
        let expected_offset: usize = lines[..first + 2].iter().map(|l| l.len() + 1).sum();
        match scene_from_str(&broken) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, expected_offset);
                assert!(message.contains("does not increase"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn frame_count_mismatch_is_rejected() {
        let text = scene_to_string(&sample());
        let n = sample().frames.len();
        let broken = text.replace(&format!("frames {n}\n"), &format!("frames {}\n", n - 1));
        assert!(matches!(scene_from_str(&broken), Err(Error::Format { .. })));
    }

    #[test]
    fn malformed_header_is_rejected() {
        let text = scene_to_string(&sample()).replace("handedness ", "handed ");
        assert!(matches!(scene_from_str(&text), Err(Error::Format { .. })));
        assert!(matches!(scene_from_str("scene_id 1\n"), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn catalog_round_trips_through_directory() {
        let mut cat = generate_catalog(3, &GeneratorConfig::default()).unwrap();
        cat.scenes.truncate(12);
        let dir = tempfile::tempdir().unwrap();
        write_catalog(&cat, dir.path()).unwrap();
        let back = Catalog::load(dir.path()).unwrap();
        assert_eq!(cat, back);
        let (entries, _) = read_manifest(dir.path()).unwrap();
        assert_eq!(entries.len(), 12);
        assert_eq!(entries[5].scene_id, cat.scenes[5].scene_id);
    }
}
