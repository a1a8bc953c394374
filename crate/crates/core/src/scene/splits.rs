//! Train/val/test partitions of the 900-scene evaluation pool.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Catalog, Handedness, Scene};
use crate::error::{Error, Result};

/// Size of the evaluation pool once ungraspable objects are removed.
pub const EVALUATION_SCENES: usize = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    /// Default: all subjects, objects and hands in every split.
    S0,
    /// Held-out subjects.
    S1,
    /// Held-out handedness.
    S2,
    /// Held-out grasped objects.
    S3,
}

impl Setup {
    pub const ALL: [Setup; 4] = [Setup::S0, Setup::S1, Setup::S2, Setup::S3];
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Setup::S0 => "s0",
            Setup::S1 => "s1",
            Setup::S2 => "s2",
            Setup::S3 => "s3",
        };
        f.write_str(s)
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s0" => Ok(Setup::S0),
            "s1" => Ok(Setup::S1),
            "s2" => Ok(Setup::S2),
            "s3" => Ok(Setup::S3),
            _ => Err(Error::Config(format!("unknown setup `{s}` (expected s0..s3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (expected train, val, test)"))),
        }
    }
}

/// Which subjects and objects are held out by the structured setups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// S0 split sizes (train, val, test).
    pub s0_counts: [usize; 3],
    pub s1_val_subjects: Vec<u8>,
    pub s1_test_subjects: Vec<u8>,
    /// Subjects whose left-hand scenes form the S2 validation split.
    pub s2_val_subjects: Vec<u8>,
    pub s3_val_objects: Vec<String>,
    pub s3_test_objects: Vec<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            s0_counts: [720, 36, 144],
            s1_val_subjects: vec![8],
            s1_test_subjects: vec![9, 10],
            s2_val_subjects: vec![9, 10],
            s3_val_objects: vec!["037_scissors".into(), "040_large_marker".into()],
            s3_test_objects: vec!["052_extra_large_clamp".into(), "061_foam_brick".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub setup: Setup,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_of(&self, scene_id: u32) -> Option<Split> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|s| self.ids(*s).binary_search(&scene_id).is_ok())
    }
}

pub fn assign_splits(catalog: &Catalog, setup: Setup, seed: u64) -> Result<SplitAssignment> {
    assign_splits_with(catalog, setup, seed, &SplitConfig::default())
}

fn hash_rank(seed: u64, id: u32) -> u64 {
    let mut z = seed ^ u64::from(id).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Partitions the evaluation pool of `catalog` for `setup`.
///
/// Accepts either the full catalog or one already filtered; in both cases
/// the pool must hold exactly 900 scenes.
pub fn assign_splits_with(
    catalog: &Catalog,
    setup: Setup,
    seed: u64,
    config: &SplitConfig,
) -> Result<SplitAssignment> {
    let pool: Vec<&Scene> = catalog.evaluation_scenes().collect();
    if pool.len() != EVALUATION_SCENES {
        return Err(Error::Protocol(format!(
            "split assignment needs {EVALUATION_SCENES} evaluation scenes, catalog has {}",
            pool.len()
        )));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    match setup {
        Setup::S0 => {
            let [n_train, n_val, n_test] = config.s0_counts;
            if n_train + n_val + n_test != EVALUATION_SCENES {
                return Err(Error::Config("s0_counts must sum to 900".into()));
            }
            let mut ranked: Vec<(u64, u32)> =
                pool.iter().map(|s| (hash_rank(seed, s.scene_id), s.scene_id)).collect();
            ranked.sort_unstable();
            for (i, (_, id)) in ranked.into_iter().enumerate() {
                if i < n_train {
                    train.push(id);
                } else if i < n_train + n_val {
                    val.push(id);
                } else {
                    test.push(id);
                }
            }
        }
        Setup::S1 => {
            for s in &pool {
                if config.s1_val_subjects.contains(&s.subject_id) {
                    val.push(s.scene_id);
                } else if config.s1_test_subjects.contains(&s.subject_id) {
                    test.push(s.scene_id);
                } else {
                    train.push(s.scene_id);
                }
            }
        }
        Setup::S2 => {
            for s in &pool {
                match s.handedness {
                    Handedness::Right => train.push(s.scene_id),
                    Handedness::Left if config.s2_val_subjects.contains(&s.subject_id) => {
                        val.push(s.scene_id)
                    }
                    Handedness::Left => test.push(s.scene_id),
                }
            }
        }
        Setup::S3 => {
            let val_objs: BTreeSet<&str> = config.s3_val_objects.iter().map(String::as_str).collect();
            let test_objs: BTreeSet<&str> = config.s3_test_objects.iter().map(String::as_str).collect();
            for s in &pool {
                if val_objs.contains(s.object_id.as_str()) {
                    val.push(s.scene_id);
                } else if test_objs.contains(s.object_id.as_str()) {
                    test.push(s.scene_id);
                } else {
                    train.push(s.scene_id);
                }
            }
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment {
        setup,
        train,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_catalog, GeneratorConfig};

    #[test]
    fn wrong_pool_size_is_a_protocol_error() {
        let mut cat = generate_catalog(1, &GeneratorConfig::default()).unwrap();
        cat.scenes.pop();
        assert!(matches!(assign_splits(&cat, Setup::S0, 0), Err(Error::Protocol(_))));
    }

    #[test]
    fn setup_names_parse() {
        assert_eq!("S2".parse::<Setup>().unwrap(), Setup::S2);
        assert!("s9".parse::<Setup>().is_err());
        assert_eq!("test".parse::<Split>().unwrap(), Split::Test);
    }
}
