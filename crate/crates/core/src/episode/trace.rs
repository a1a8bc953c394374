//! Per-step episode log.
//!
//! ```text
//! #handover-trace v1
//! episode <scene_id> <policy>
//! config <dt> <substeps> <gain> <goal x y z> <goal radius> <time_limit>
//!        <success_hold> <margin> <start q x9> <table cx cy hx hy thickness>
//! steps <n>
//! step <t> <q x9> <action x9> <object pose x7> <release> <status>
//! ```

use std::fs;
use std::path::Path;

use super::{EnvConfig, EpisodeStatus};
use crate::container::{Reader, Writer};
use crate::error::{Error, Result};
use crate::handover::ReleasePhase;
use crate::kinematics::{JointConfig, DOF};
use crate::pose::Pose;
use crate::scene::TableGeometry;

const KIND: &str = "trace";
const CONFIG_FIELDS: usize = 24;
const STEP_FIELDS: usize = 1 + 2 * DOF + 7 + 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub time: f64,
    pub q: JointConfig,
    pub action: JointConfig,
    pub object_pose: Pose,
    pub release: ReleasePhase,
    pub status: EpisodeStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scene_id: u32,
    pub policy: String,
    pub config: EnvConfig,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new(scene_id: u32, policy: impl Into<String>, config: EnvConfig) -> Self {
        Self {
            scene_id,
            policy: policy.into(),
            config,
            steps: Vec::new(),
        }
    }

    pub fn final_status(&self) -> EpisodeStatus {
        self.steps.last().map_or(EpisodeStatus::Running, |s| s.status)
    }

    pub fn final_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.time)
    }
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut w = Writer::new(KIND);
    w.record("episode").field(trace.scene_id).field(&trace.policy).end();
    let c = &trace.config;
    let t = &c.table;
    w.record("config")
        .field(c.control_dt)
        .field(c.substeps)
        .field(c.gain)
        .floats(&c.goal.center)
        .field(c.goal.radius)
        .field(c.time_limit)
        .field(c.success_hold)
        .field(c.contact_margin)
        .floats(&c.start_q)
        .floats(&[t.center_x, t.center_y, t.half_x, t.half_y, t.thickness])
        .end();
    w.record("steps").field(trace.steps.len()).end();
    for s in &trace.steps {
        w.record("step")
            .field(s.time)
            .floats(&s.q.0)
            .floats(&s.action.0)
            .pose(&s.object_pose)
            .field(s.release)
            .field(s.status)
            .end();
    }
    w.finish()
}

pub fn trace_from_str(text: &str) -> Result<Trace> {
    let mut r = Reader::new(text, KIND)?;
    let ep = r.expect("episode")?;
    ep.expect_len(2)?;
    let scene_id = ep.parse(0)?;
    let policy = ep.str(1)?.to_string();

    let rec = r.expect("config")?;
    rec.expect_len(CONFIG_FIELDS)?;
    let t = rec.floats::<5>(19)?;
    let config = EnvConfig {
        control_dt: rec.f64(0)?,
        substeps: rec.parse(1)?,
        gain: rec.f64(2)?,
        goal: super::GoalRegion {
            center: rec.floats::<3>(3)?,
            radius: rec.f64(6)?,
        },
        time_limit: rec.f64(7)?,
        success_hold: rec.f64(8)?,
        contact_margin: rec.f64(9)?,
        start_q: rec.floats::<DOF>(10)?,
        table: TableGeometry {
            center_x: t[0],
            center_y: t[1],
            half_x: t[2],
            half_y: t[3],
            thickness: t[4],
        },
    };
    config
        .validate()
        .map_err(|e| Error::format(rec.field_offset(0), e.to_string()))?;

    let n: usize = r.expect("steps")?.parse(0)?;
    let mut steps = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let rec = r.expect("step")?;
        rec.expect_len(STEP_FIELDS)?;
        let parse_tail = |i: usize| -> Result<&str> { rec.str(i) };
        let release: ReleasePhase = parse_tail(STEP_FIELDS - 2)?
            .parse()
            .map_err(|e: Error| Error::format(rec.field_offset(STEP_FIELDS - 2), e.to_string()))?;
        let status: EpisodeStatus = parse_tail(STEP_FIELDS - 1)?
            .parse()
            .map_err(|e: Error| Error::format(rec.field_offset(STEP_FIELDS - 1), e.to_string()))?;
        let time = rec.f64(0)?;
        if let Some(prev) = steps.last() {
            let prev: &TraceStep = prev;
            if !(time > prev.time) {
                return Err(Error::format(rec.field_offset(0), "step times must increase"));
            }
            if prev.status.is_terminal() {
                return Err(Error::format(rec.offset, "step after terminal status"));
            }
        }
        steps.push(TraceStep {
            time,
            q: JointConfig(rec.floats::<DOF>(1)?),
            action: JointConfig(rec.floats::<DOF>(1 + DOF)?),
            object_pose: rec.pose(1 + 2 * DOF)?,
            release,
            status,
        });
    }
    r.expect_end()?;
    Ok(Trace {
        scene_id,
        policy,
        config,
        steps,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trace_from_str(&text)
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trace_to_string(trace)).map_err(|e| Error::io(path, e))
}
