//! Per-episode results file.
//!
//! ```text
//! #handover-results v1
//! run <policy> <setup> <split> <count>
//! episode <scene_id> <status> <steps> <exec_time> <exec_time_moving> <plan_time> <error...>
//! ```
//!
//! The error is `-` when the policy ran cleanly, otherwise the message
//! with whitespace collapsed; it takes the rest of the line.

use std::fs;
use std::path::Path;

use super::EpisodeResult;
use crate::container::{Reader, Writer};
use crate::error::{Error, Result};
use crate::scene::{Setup, Split};

const KIND: &str = "results";

/// Header of a results file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunInfo {
    pub policy: String,
    pub setup: Setup,
    pub split: Split,
}

pub fn results_to_string(info: &RunInfo, results: &[EpisodeResult]) -> String {
    let mut w = Writer::new(KIND);
    w.record("run")
        .field(&info.policy)
        .field(info.setup)
        .field(info.split)
        .field(results.len())
        .end();
    for r in results {
        let error = r
            .error
            .as_deref()
            .map(|e| e.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|e| !e.is_empty())
            .unwrap_or_else(|| "-".to_string());
        w.record("episode")
            .field(r.scene_id)
            .field(r.status)
            .field(r.steps)
            .field(r.exec_time)
            .field(r.exec_time_moving)
            .field(r.plan_time)
            .field(error)
            .end();
    }
    w.finish()
}

pub fn results_from_str(text: &str) -> Result<(RunInfo, Vec<EpisodeResult>)> {
    let mut r = Reader::new(text, KIND)?;
    let run = r.expect("run")?;
    run.expect_len(4)?;
    let bad = |i: usize, e: Error| Error::format(run.field_offset(i), e.to_string());
    let info = RunInfo {
        policy: run.str(0)?.to_string(),
        setup: run.str(1)?.parse().map_err(|e| bad(1, e))?,
        split: run.str(2)?.parse().map_err(|e| bad(2, e))?,
    };
    let n: usize = run.parse(3)?;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let rec = r.expect("episode")?;
        if rec.len() < 7 {
            rec.expect_len(7)?;
        }
        let error = (6..rec.len()).map(|i| rec.str(i)).collect::<Result<Vec<_>>>()?.join(" ");
        out.push(EpisodeResult {
            scene_id: rec.parse(0)?,
            status: rec
                .str(1)?
                .parse()
                .map_err(|e: Error| Error::format(rec.field_offset(1), e.to_string()))?,
            steps: rec.parse(2)?,
            exec_time: rec.f64(3)?,
            exec_time_moving: rec.f64(4)?,
            plan_time: rec.f64(5)?,
            error: (error != "-").then_some(error),
        });
    }
    r.expect_end()?;
    Ok((info, out))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<(RunInfo, Vec<EpisodeResult>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    results_from_str(&text)
}

pub fn write_results(path: impl AsRef<Path>, info: &RunInfo, results: &[EpisodeResult]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, results_to_string(info, results)).map_err(|e| Error::io(path, e))
}
