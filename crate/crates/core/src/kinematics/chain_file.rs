//! Text description of a robot chain, using the shared container syntax.
//!
//! ```text
//! #handover-chain v1
//! base <pose>
//! arm_joint <kind> <origin pose> <ax ay az> <lo> <hi> <max_velocity>   (7 times)
//! hand_offset <pose>
//! tcp_offset <pose>
//! finger_joint <kind> <origin pose> <ax ay az> <lo> <hi> <max_velocity> (2 times)
//! fingertip_offset <pose>
//! shapes <count>
//! shape <frame> <tag> sphere <r> <pose>
//! shape <frame> <tag> capsule <r> <half_length> <pose>
//! shape <frame> <tag> box <hx> <hy> <hz> <pose>
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::{Chain, JointKind, JointSpec, LinkShape, ARM_DOF, GRIPPER_DOF};
use crate::container::{Reader, Record, Writer};
use crate::contact::{BodyTag, Shape};
use crate::error::{Error, Result};
use crate::kinematics::FrameRef;

const KIND: &str = "chain";

fn write_joint(w: &mut Writer, key: &str, j: &JointSpec) {
    w.record(key)
        .field(j.kind)
        .pose(&j.origin)
        .floats(j.axis.as_slice())
        .floats(&j.limits)
        .field(j.max_velocity)
        .end();
}

fn map_err<T>(rec: &Record<'_>, i: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::format(rec.field_offset(i), e.to_string()))
}

fn read_joint(r: &mut Reader<'_>, key: &str) -> Result<JointSpec> {
    let rec = r.expect(key)?;
    rec.expect_len(14)?;
    let kind: JointKind = map_err(&rec, 0, rec.str(0)?.parse())?;
    let a = rec.floats::<3>(8)?;
    let j = JointSpec {
        kind,
        origin: rec.pose(1)?,
        axis: Vector3::from(a),
        limits: [rec.f64(11)?, rec.f64(12)?],
        max_velocity: rec.f64(13)?,
    };
    map_err(&rec, 0, j.validate())?;
    Ok(j)
}

pub fn chain_to_string(chain: &Chain) -> String {
    let mut w = Writer::new(KIND);
    w.record("base").pose(&chain.base).end();
    for j in &chain.arm {
        write_joint(&mut w, "arm_joint", j);
    }
    w.record("hand_offset").pose(&chain.hand_offset).end();
    w.record("tcp_offset").pose(&chain.tcp_offset).end();
    for j in &chain.fingers {
        write_joint(&mut w, "finger_joint", j);
    }
    w.record("fingertip_offset").pose(&chain.fingertip_offset).end();
    w.record("shapes").field(chain.shapes.len()).end();
    for s in &chain.shapes {
        let r = w.record("shape").field(s.frame).field(s.tag);
        let r = match s.shape {
            Shape::Sphere { radius } => r.field("sphere").field(radius),
            Shape::Capsule {
                radius,
                half_length,
            } => r.field("capsule").field(radius).field(half_length),
            Shape::Box { half_extents } => r.field("box").floats(half_extents.as_slice()),
        };
        r.pose(&s.local).end();
    }
    w.finish()
}

pub fn chain_from_str(text: &str) -> Result<Chain> {
    let mut r = Reader::new(text, KIND)?;
    let base = r.expect("base")?.pose(0)?;
    let mut arm = Vec::with_capacity(ARM_DOF);
    for _ in 0..ARM_DOF {
        arm.push(read_joint(&mut r, "arm_joint")?);
    }
    let hand_offset = r.expect("hand_offset")?.pose(0)?;
    let tcp_offset = r.expect("tcp_offset")?.pose(0)?;
    let mut fingers = Vec::with_capacity(GRIPPER_DOF);
    for _ in 0..GRIPPER_DOF {
        fingers.push(read_joint(&mut r, "finger_joint")?);
    }
    let fingertip_offset = r.expect("fingertip_offset")?.pose(0)?;
    let n: usize = r.expect("shapes")?.parse(0)?;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let rec = r.expect("shape")?;
        let frame: FrameRef = map_err(&rec, 0, rec.str(0)?.parse())?;
        let tag: BodyTag = map_err(&rec, 1, rec.str(1)?.parse())?;
        let (shape, pose_at) = match rec.str(2)? {
            "sphere" => (Shape::Sphere { radius: rec.f64(3)? }, 4),
            "capsule" => (
                Shape::Capsule {
                    radius: rec.f64(3)?,
                    half_length: rec.f64(4)?,
                },
                5,
            ),
            "box" => (
                Shape::Box {
                    half_extents: Vector3::from(rec.floats::<3>(3)?),
                },
                6,
            ),
            other => {
                return Err(Error::format(
                    rec.field_offset(2),
                    format!("unknown shape `{other}`"),
                ))
            }
        };
        rec.expect_len(pose_at + 7)?;
        let shape = map_err(&rec, 2, shape.validated())?;
        shapes.push(LinkShape {
            frame,
            tag,
            shape,
            local: rec.pose(pose_at)?,
        });
    }
    r.expect_end()?;
    Ok(Chain {
        base,
        arm: arm.try_into().expect("seven arm joints"),
        hand_offset,
        tcp_offset,
        fingers: fingers.try_into().expect("two finger joints"),
        fingertip_offset,
        shapes,
    })
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<Chain> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    chain_from_str(&text)
}

pub fn write_chain(chain: &Chain, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, chain_to_string(chain)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panda_round_trips() {
        let chain = Chain::panda();
        let text = chain_to_string(&chain);
        assert_eq!(chain_from_str(&text).unwrap(), chain);
    }

    #[test]
    fn bad_joint_limits_are_reported() {
        let text = chain_to_string(&Chain::panda());
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let idx = lines.iter().position(|l| l.starts_with("arm_joint")).unwrap();
        let mut fields: Vec<String> = lines[idx].split(' ').map(str::to_string).collect();
        fields.swap(12, 13);
        lines[idx] = fields.join(" ");
        let broken = lines.join("\n");
        assert!(matches!(chain_from_str(&broken), Err(Error::Format { .. })));
    }
}
