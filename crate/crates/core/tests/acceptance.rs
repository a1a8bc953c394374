//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line; the process exits non-zero on any failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use handover_core::benchmark::{render_report, run_benchmark, run_episode, run_episodes, summarize, EpisodeResult};
use handover_core::contact::{penetration, query_pair, BodyTag, Contact, ContactSet, Shape, Side};
use handover_core::episode::{Action, Episode, EnvConfig, EpisodeStatus, FailureCause};
use handover_core::handover::{
    propagate_object, transition_object, update_release, ObjectDynamicState, ObjectMode, ReleasePhase, ReleaseState,
    RestingSurface, GRAVITY,
};
use handover_core::kinematics::{Chain, JointConfig, JointKind, JointSpec, DOF};
use handover_core::policies::{
    build_policy, curated_easy_subset, EpisodeInfo, HoldThenPlan, HoldThenPlanParams, Policy, PolicyKind,
    PolicyParams, ZeroMotion,
};
use handover_core::scene::{assign_splits, generate_catalog, Catalog, GeneratorConfig, Handedness, Scene, Setup, Split};
use handover_core::{Error, Pose};

const CATALOG_SEED: u64 = 42;
const SPLIT_SEED: u64 = 0;
const CATALOG_BUDGET_S: f64 = 60.0;
const THROUGHPUT_BUDGET_S: f64 = 300.0;
const FK_POSITION_TOL: f64 = 1e-9;
const FK_ROTATION_TOL: f64 = 1e-9;
const CONTACT_DEPTH_TOL: f64 = 1e-3;
const SYMMETRY_TOL: f64 = 1e-12;
const RIGID_TOL: f64 = 1e-9;
const ORACLE_SUCCESS_MIN: f64 = 95.0;
const EASY_SUBSET_SIZE: usize = 50;
const RATE_SUM_TOL: f64 = 1e-9;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

struct Fixture {
    full: Catalog,
    pool: Catalog,
    chain: Chain,
    config: EnvConfig,
    catalog_secs: f64,
}

type Criterion = fn(&Fixture) -> Outcome;

fn main() {
    let started = Instant::now();
    let full = generate_catalog(CATALOG_SEED, &GeneratorConfig::default()).expect("catalog generates");
    let pool = full.without_excluded();
    let fx = Fixture {
        full,
        pool,
        chain: Chain::panda(),
        config: EnvConfig::default(),
        catalog_secs: started.elapsed().as_secs_f64(),
    };

    let criteria: [(&str, Criterion); 10] = [
        ("catalog and splits", catalog_and_splits),
        ("determinism across parallelism", determinism),
        ("release timer semantics", timer_semantics),
        ("zero-motion termination", termination),
        ("forward kinematics oracle", kinematics_oracle),
        ("contact oracle", contact_oracle),
        ("ballistic free fall", ballistics),
        ("policy sanity", policy_sanity),
        ("metrics arithmetic", metrics_arithmetic),
        ("single-thread throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| f(&fx))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn scenes<'c>(catalog: &'c Catalog, ids: &[u32]) -> Vec<&'c Scene> {
    ids.iter().map(|id| catalog.scene(*id).expect("id in catalog")).collect()
}

// 1 ------------------------------------------------------------------------

fn catalog_and_splits(fx: &Fixture) -> Outcome {
    let t = Instant::now();
    let full = generate_catalog(CATALOG_SEED, &GeneratorConfig::default()).map_err(|e| e.to_string())?;
    ensure!(full.scenes.len() == 1000, "catalog has {} scenes", full.scenes.len());
    let pool = full.without_excluded();
    ensure!(pool.scenes.len() == 900, "pool has {} scenes", pool.scenes.len());

    for (setup, want) in [
        (Setup::S0, [720, 36, 144]),
        (Setup::S1, [630, 90, 180]),
        (Setup::S3, [700, 100, 100]),
    ] {
        let a = assign_splits(&full, setup, SPLIT_SEED).map_err(|e| e.to_string())?;
        let got = [a.train.len(), a.val.len(), a.test.len()];
        ensure!(got == want, "{setup} sizes {got:?}, want {want:?}");
        let mut all: Vec<u32> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        ensure!(all.len() == 900, "{setup} splits overlap or miss scenes");
    }

    let s2 = assign_splits(&full, Setup::S2, SPLIT_SEED).map_err(|e| e.to_string())?;
    let ids_with = |h: Handedness| -> Vec<u32> {
        pool.scenes.iter().filter(|s| s.handedness == h).map(|s| s.scene_id).collect()
    };
    ensure!(s2.train == ids_with(Handedness::Right), "S2 train is not the right-hand scenes");
    let mut left: Vec<u32> = s2.val.iter().chain(&s2.test).copied().collect();
    left.sort_unstable();
    ensure!(left == ids_with(Handedness::Left), "S2 val+test is not the left-hand scenes");
    let mut val_subjects: Vec<u8> = scenes(&pool, &s2.val).iter().map(|s| s.subject_id).collect();
    val_subjects.sort_unstable();
    val_subjects.dedup();
    ensure!(val_subjects.len() == 2, "S2 val spans subjects {val_subjects:?}");
    let val_expected: Vec<u32> = pool
        .scenes
        .iter()
        .filter(|s| s.handedness == Handedness::Left && val_subjects.contains(&s.subject_id))
        .map(|s| s.scene_id)
        .collect();
    ensure!(s2.val == val_expected, "S2 val misses some left scenes of its subjects");

    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < CATALOG_BUDGET_S, "took {secs:.1}s");
    Ok(format!(
        "1000/900 scenes, S0/S1/S3 counts exact, S2 {}/{}/{}, {secs:.2}s (fixture build {:.2}s)",
        s2.train.len(),
        s2.val.len(),
        s2.test.len(),
        fx.catalog_secs
    ))
}

// 2 ------------------------------------------------------------------------

fn s0_test(fx: &Fixture) -> Vec<&Scene> {
    let a = assign_splits(&fx.pool, Setup::S0, SPLIT_SEED).expect("S0 split");
    scenes(&fx.pool, &a.test)
}

fn determinism(fx: &Fixture) -> Outcome {
    let test = s0_test(fx);
    let params = PolicyParams::default();
    let mut notes = Vec::new();
    for kind in [PolicyKind::HoldThenPlan, PolicyKind::ReactiveFrontApproach] {
        let run = |par: usize| {
            run_episodes(&test, &fx.chain, &fx.config, || build_policy(kind, &params), par).map_err(|e| e.to_string())
        };
        let a = run(1)?;
        let b = run(8)?;
        ensure!(a.len() == test.len() && b.len() == test.len(), "{}: missing episodes", kind.name());
        for (x, y) in a.iter().zip(&b) {
            ensure!(
                x.scene_id == y.scene_id
                    && x.status == y.status
                    && x.steps == y.steps
                    && x.exec_time.to_bits() == y.exec_time.to_bits()
                    && x.exec_time_moving.to_bits() == y.exec_time_moving.to_bits(),
                "{}: scene {} differs: {x:?} vs {y:?}",
                kind.name(),
                x.scene_id
            );
            ensure!(
                (x.exec_time - x.steps as f64 * fx.config.control_dt).abs() < 1e-9 && x.plan_time >= 0.0,
                "scene {}: exec_time inconsistent with steps",
                x.scene_id
            );
        }
        notes.push(format!("{} {} episodes bit-identical", kind.name(), a.len()));
    }
    Ok(notes.join(", "))
}

// 3 ------------------------------------------------------------------------

/// Per-step contact pattern drawn by the property test.
#[derive(Debug, Clone, Copy)]
enum Pattern {
    Nothing,
    BothGrips,
    LeftGrip,
    NonGrip,
    BothGripsAndNonGrip,
    RightGripAndNonGrip,
}

fn contact(a: BodyTag, b: BodyTag) -> Contact {
    Contact {
        tag_a: a,
        tag_b: b,
        point: Vector3::zeros(),
        normal: Vector3::z(),
        depth: 1e-3,
    }
}

fn contacts_for(p: Pattern) -> ContactSet {
    let grip = |s| contact(BodyTag::FingerGripSurface(s), BodyTag::TargetObject);
    let other = contact(BodyTag::TargetObject, BodyTag::ArmLink(8));
    ContactSet::from_contacts(match p {
        Pattern::Nothing => vec![],
        Pattern::BothGrips => vec![grip(Side::Left), grip(Side::Right)],
        Pattern::LeftGrip => vec![grip(Side::Left)],
        Pattern::NonGrip => vec![other],
        Pattern::BothGripsAndNonGrip => vec![other, grip(Side::Right), grip(Side::Left)],
        Pattern::RightGripAndNonGrip => vec![grip(Side::Right), other],
    })
}

fn pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![
        Just(Pattern::Nothing),
        Just(Pattern::BothGrips),
        Just(Pattern::LeftGrip),
        Just(Pattern::NonGrip),
        Just(Pattern::BothGripsAndNonGrip),
        Just(Pattern::RightGripAndNonGrip),
    ]
}

fn timer_semantics(_: &Fixture) -> Outcome {
    let window = 0.1;
    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        prop_oneof![Just(1.0 / 60.0), Just(1.0 / 30.0), Just(1.0 / 120.0), Just(0.0125)],
        prop::collection::vec(
            prop_oneof![
                3 => pattern().prop_map(|p| vec![p]),
                2 => (pattern(), 1usize..12).prop_map(|(p, n)| vec![p; n]),
            ],
            1..40,
        )
        .prop_map(|chunks| chunks.concat()),
    );
    let mut fired = [0usize; 2];
    let result = runner.run(&strategy, |(dt, seq)| {
        // Independent model: run lengths counted in whole steps.
        let need = (1..).find(|n| *n as f64 * dt >= window - 1e-12).unwrap();
        let mut state = ReleaseState::driven();
        let (mut run_active, mut run_passive) = (0usize, 0usize);
        let mut expected = ReleasePhase::Driven;
        let mut fired_at: Option<usize> = None;
        for (k, p) in seq.iter().enumerate() {
            let set = contacts_for(*p);
            let before = state;
            state = update_release(state, &set, dt);
            if expected == ReleasePhase::Driven {
                let both = matches!(p, Pattern::BothGrips | Pattern::BothGripsAndNonGrip);
                let passive = matches!(p, Pattern::NonGrip);
                run_active = if both { run_active + 1 } else { 0 };
                run_passive = if passive { run_passive + 1 } else { 0 };
                if run_active >= need {
                    expected = ReleasePhase::ActiveReleased;
                    fired_at = Some(k);
                } else if run_passive >= need {
                    expected = ReleasePhase::PassiveReleased;
                    fired_at = Some(k);
                }
                if expected == ReleasePhase::Driven {
                    prop_assert!((state.active_timer - run_active as f64 * dt).abs() < 1e-9);
                    prop_assert!((state.passive_timer - run_passive as f64 * dt).abs() < 1e-9);
                }
            } else {
                prop_assert_eq!(state, before, "released state changed at step {}", k);
            }
            prop_assert_eq!(state.phase, expected, "step {} pattern {:?}", k, p);
            if Some(k) == fired_at {
                // The window closes at this step, not one later.
                let held = need as f64 * dt;
                prop_assert!(held >= window - 1e-9 && held - window < dt + 1e-12);
                prop_assert_eq!(state.active_timer, 0.0);
                prop_assert_eq!(state.passive_timer, 0.0);
            }
        }
        Ok(())
    });
    // Count how often each trigger was exercised with the default step.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let mut s = ReleaseState::driven();
        for _ in 0..30 {
            let p = [Pattern::BothGrips, Pattern::NonGrip, Pattern::Nothing][rng.random_range(0..3)];
            let p = if rng.random_bool(0.8) { p } else { Pattern::LeftGrip };
            s = update_release(s, &contacts_for(p), 1.0 / 60.0);
        }
        match s.phase {
            ReleasePhase::ActiveReleased => fired[0] += 1,
            ReleasePhase::PassiveReleased => fired[1] += 1,
            ReleasePhase::Driven => {}
        }
    }
    result.map_err(|e| e.to_string())?;
    ensure!(fired[0] > 0 && fired[1] > 0, "random walks never fired both triggers: {fired:?}");
    Ok(format!("2000 cases, exact step of firing, gap reset, absorbing; triggers seen {fired:?}"))
}

// 4 ------------------------------------------------------------------------

fn termination(fx: &Fixture) -> Outcome {
    let dt = fx.config.control_dt;
    let scenes: Vec<&Scene> = fx.full.scenes.iter().collect();
    let chunks: Vec<&[&Scene]> = scenes.chunks(scenes.len().div_ceil(8)).collect();
    let checked: Vec<std::result::Result<usize, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                s.spawn(|| -> std::result::Result<usize, String> {
                    for scene in chunk.iter() {
                        let mut policy = ZeroMotion;
                        let (res, trace) = run_episode(scene, &fx.chain, &fx.config, &mut policy, true)
                            .map_err(|e| format!("scene {}: {e}", scene.scene_id))?;
                        let trace = trace.expect("trace requested");
                        let id = scene.scene_id;
                        ensure!(
                            res.status == EpisodeStatus::Failure(FailureCause::Timeout),
                            "scene {id}: {}",
                            res.status
                        );
                        ensure!((trace.final_time() - 13.0).abs() <= dt + 1e-9, "scene {id}: ended at {}", trace.final_time());
                        ensure!(trace.steps.len() as u64 == res.steps, "scene {id}: trace length");
                        let terminal = trace.steps.iter().filter(|s| s.status.is_terminal()).count();
                        ensure!(terminal == 1, "scene {id}: {terminal} terminal steps");
                        ensure!(trace.final_status().is_terminal(), "scene {id}: last step not terminal");
                        let start = trace.steps[0].q;
                        ensure!(
                            trace.steps.iter().all(|s| s.q == start),
                            "scene {id}: robot moved under zero motion"
                        );
                    }
                    Ok(chunk.len())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    });
    let mut n = 0;
    for c in checked {
        n += c?;
    }

    let scene = &fx.full.scenes[0];
    let mut ep = Episode::reset(scene, &fx.chain, &fx.config).map_err(|e| e.to_string())?;
    let hold = Action::hold(ep.q());
    while !ep.status().is_terminal() {
        ep.step(&hold).map_err(|e| e.to_string())?;
    }
    ensure!(
        matches!(ep.step(&hold), Err(Error::Protocol(_))),
        "stepping a finished episode was accepted"
    );
    ensure!(ep.status() == EpisodeStatus::Failure(FailureCause::Timeout), "status changed after rejection");
    Ok(format!("{n} scenes time out at 13.0s with one terminal step each; post-terminal step rejected"))
}

// 5 ------------------------------------------------------------------------

type Mat4 = [[f64; 4]; 4];

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn rot_to_mat(r: [[f64; 3]; 3], t: [f64; 3]) -> Mat4 {
    [
        [r[0][0], r[0][1], r[0][2], t[0]],
        [r[1][0], r[1][1], r[1][2], t[1]],
        [r[2][0], r[2][1], r[2][2], t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn quat_rot(w: f64, x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn pose_mat(p: &Pose) -> Mat4 {
    let [px, py, pz, w, x, y, z] = p.to_array();
    let n = (w * w + x * x + y * y + z * z).sqrt();
    rot_to_mat(quat_rot(w / n, x / n, y / n, z / n), [px, py, pz])
}

/// Rodrigues rotation about a unit axis.
fn axis_angle(a: &Vector3<f64>, th: f64) -> [[f64; 3]; 3] {
    let (s, c) = th.sin_cos();
    let v = 1.0 - c;
    let (x, y, z) = (a.x, a.y, a.z);
    [
        [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
        [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
        [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
    ]
}

fn joint_mat(j: &JointSpec, q: f64) -> Mat4 {
    let motion = match j.kind {
        JointKind::Revolute => rot_to_mat(axis_angle(&j.axis, q), [0.0; 3]),
        JointKind::Prismatic => rot_to_mat(axis_angle(&j.axis, 0.0), [j.axis.x * q, j.axis.y * q, j.axis.z * q]),
    };
    mat_mul(&pose_mat(&j.origin), &motion)
}

/// Shepperd's method.
fn mat_quat(m: &Mat4) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s]
    };
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

fn frame_error(pose: &Pose, m: &Mat4) -> (f64, f64) {
    let a = pose.to_array();
    let dp = ((a[0] - m[0][3]).powi(2) + (a[1] - m[1][3]).powi(2) + (a[2] - m[2][3]).powi(2)).sqrt();
    let q = mat_quat(m);
    let dot = (a[3] * q[0] + a[4] * q[1] + a[5] * q[2] + a[6] * q[3]).abs();
    (dp, 1.0 - dot)
}

fn kinematics_oracle(fx: &Fixture) -> Outcome {
    let chain = &fx.chain;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_p, mut worst_r) = (0.0_f64, 0.0_f64);
    for _ in 0..1000 {
        let q: [f64; DOF] = std::array::from_fn(|i| {
            let l = chain.joint(i).limits;
            rng.random_range(l[0]..=l[1])
        });
        let frames = chain.forward_kinematics(&JointConfig(q)).map_err(|e| e.to_string())?;
        let mut t = pose_mat(&chain.base);
        let mut check = |pose: &Pose, m: &Mat4| {
            let (p, r) = frame_error(pose, m);
            worst_p = worst_p.max(p);
            worst_r = worst_r.max(r);
        };
        check(&frames.links[0], &t);
        for (i, j) in chain.arm.iter().enumerate() {
            t = mat_mul(&t, &joint_mat(j, q[i]));
            check(&frames.links[i + 1], &t);
        }
        let palm = mat_mul(&t, &pose_mat(&chain.hand_offset));
        check(&frames.palm, &palm);
        check(&frames.tcp, &mat_mul(&palm, &pose_mat(&chain.tcp_offset)));
        for k in 0..2 {
            let finger = mat_mul(&palm, &joint_mat(&chain.fingers[k], q[7 + k]));
            check(&frames.fingers[k], &finger);
            check(&frames.fingertips[k], &mat_mul(&finger, &pose_mat(&chain.fingertip_offset)));
        }
    }
    ensure!(worst_p <= FK_POSITION_TOL, "position error {worst_p:e}");
    ensure!(worst_r <= FK_ROTATION_TOL, "rotation error {worst_r:e}");
    Ok(format!("1000 configurations, max position error {worst_p:.1e} m, max 1-|q.q'| {worst_r:.1e}"))
}

// 6 ------------------------------------------------------------------------

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
        }
    }
}

fn random_shape(rng: &mut ChaCha8Rng, kind: usize) -> Shape {
    match kind {
        0 => Shape::sphere(rng.random_range(0.02..0.1)),
        1 => Shape::capsule(rng.random_range(0.01..0.06), rng.random_range(0.02..0.12)),
        _ => Shape::cuboid(
            rng.random_range(0.01..0.1),
            rng.random_range(0.01..0.1),
            rng.random_range(0.01..0.1),
        ),
    }
    .expect("valid dims")
}

/// Support of the shape about its own centre along unit `n`.
fn support(shape: &Shape, pose: &Pose, n: &Vector3<f64>) -> f64 {
    let [_, _, _, w, x, y, z] = pose.to_array();
    let r = quat_rot(w, x, y, z);
    let col = |i: usize| Vector3::new(r[0][i], r[1][i], r[2][i]);
    match *shape {
        Shape::Sphere { radius } => radius,
        Shape::Capsule { radius, half_length } => half_length * col(2).dot(n).abs() + radius,
        Shape::Box { half_extents } => (0..3).map(|i| half_extents[i] * col(i).dot(n).abs()).sum(),
    }
}

/// Signed penetration depth as the distance from the origin to the
/// boundary of the Minkowski difference, found by dense direction sampling
/// and local refinement.
fn sampled_depth(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> f64 {
    let d = pa.position - pb.position;
    let f = |n: &Vector3<f64>| d.dot(n) + support(a, pa, n) + support(b, pb, n);
    let count = 6000;
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let mut dirs: Vec<(f64, Vector3<f64>)> = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            let n = Vector3::new(r * th.cos(), r * th.sin(), z);
            (f(&n), n)
        })
        .collect();
    dirs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = f64::INFINITY;
    for (mut v, mut n) in dirs.into_iter().take(16) {
        let mut step = 0.05;
        while step > 1e-10 {
            let t1 = n.cross(&Vector3::x()).try_normalize(1e-6).unwrap_or_else(|| n.cross(&Vector3::y()).normalize());
            let t2 = n.cross(&t1);
            let mut improved = false;
            for k in 0..16 {
                let ang = k as f64 * PI / 8.0;
                let cand = (n + (t1 * ang.cos() + t2 * ang.sin()) * step).normalize();
                let fv = f(&cand);
                if fv < v {
                    v = fv;
                    n = cand;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(v);
    }
    best
}

fn contact_oracle(_: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let kinds = [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)];
    let (mut worst, mut worst_sym, mut worst_rigid) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut overlapping = 0;
    for i in 0..200 {
        let (ka, kb) = kinds[i % kinds.len()];
        let a = random_shape(&mut rng, ka);
        let b = random_shape(&mut rng, kb);
        let pa = Pose::new(
            Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
            random_rotation(&mut rng),
        );
        let reach = 0.8 * (a.bounding_radius() + b.bounding_radius());
        let offset = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(0.0..reach);
        let pb = Pose::new(pa.position + offset, random_rotation(&mut rng));

        let got = penetration(&a, &pa, &b, &pb).depth;
        let want = sampled_depth(&a, &pa, &b, &pb);
        let boxes = ka == 2 && kb == 2;
        if want > 0.0 || got > 0.0 || !boxes {
            ensure!(
                (got - want).abs() <= CONTACT_DEPTH_TOL,
                "pair {i} {a:?} vs {b:?}: depth {got} vs sampled {want}"
            );
            worst = worst.max((got - want).abs());
        } else {
            // Separated boxes report a lower bound on the gap.
            ensure!(got <= 0.0 && got >= want - CONTACT_DEPTH_TOL, "pair {i}: separation {got} vs {want}");
        }
        if want > 0.0 {
            overlapping += 1;
        }

        let ab = query_pair(&a, &pa, &b, &pb);
        let ba = query_pair(&b, &pb, &a, &pa);
        ensure!(ab.is_some() == ba.is_some(), "pair {i}: asymmetric contact");
        if let (Some(x), Some(y)) = (ab, ba) {
            worst_sym = worst_sym.max((x.depth - y.depth).abs());
            ensure!((x.normal + y.normal).norm() < 1e-9, "pair {i}: normals not opposite");
            ensure!((x.normal.norm() - 1.0).abs() < 1e-9, "pair {i}: normal not unit");
        }

        let g = Pose::new(Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)), random_rotation(&mut rng));
        let moved = penetration(&a, &g.compose(&pa), &b, &g.compose(&pb)).depth;
        worst_rigid = worst_rigid.max((moved - got).abs());
    }
    ensure!(worst_sym <= SYMMETRY_TOL, "symmetry error {worst_sym:e}");
    ensure!(worst_rigid <= RIGID_TOL, "rigid invariance error {worst_rigid:e}");
    ensure!(overlapping >= 100, "only {overlapping} overlapping pairs sampled");
    Ok(format!(
        "200 pairs ({overlapping} overlapping), max depth error {worst:.1e} m, symmetry {worst_sym:.1e}, rigid {worst_rigid:.1e}"
    ))
}

// 7 ------------------------------------------------------------------------

fn ballistics(fx: &Fixture) -> Outcome {
    let dt = fx.config.control_dt;
    let shape = Shape::capsule(0.03, 0.05).expect("valid");
    let surface = RestingSurface {
        height: 0.0,
        table: fx.config.table,
    };
    let palm = Pose::from_translation(0.3, 0.0, 0.5);
    let mut worst_ratio = 0.0_f64;
    for (vx, vz) in [(0.0, 0.0), (0.2, 0.3), (-0.1, -0.4)] {
        let p0 = Pose::new(Vector3::new(0.2, -1.5, 2.0), UnitQuaternion::from_euler_angles(0.3, 0.1, -0.2));
        let mut p1 = p0;
        p1.position += Vector3::new(vx, 0.0, vz) * dt;
        // One driven step establishes the release velocity.
        let mut obj = propagate_object(&ObjectDynamicState::driven(p0), &shape, &p1, &palm, &surface, dt);
        let released = update_release(
            ReleaseState {
                passive_timer: 0.1,
                ..ReleaseState::driven()
            },
            &contacts_for(Pattern::NonGrip),
            dt,
        );
        ensure!(released.phase == ReleasePhase::PassiveReleased, "release did not fire");
        obj = transition_object(&obj, &released, &ContactSet::empty(), &palm);
        ensure!(obj.mode == ObjectMode::Ballistic, "object not ballistic after release");
        let (z0, x0) = (obj.pose.position.z, obj.pose.position.x);
        let v0 = (p1.position - p0.position) / dt;
        let mut k = 0;
        loop {
            k += 1;
            let tau = k as f64 * dt;
            if tau > 0.5 + 1e-12 {
                break;
            }
            obj = propagate_object(&obj, &shape, &p1, &palm, &surface, dt);
            let z_closed = z0 + v0.z * tau - 0.5 * GRAVITY * tau * tau;
            let err = (obj.pose.position.z - z_closed).abs();
            let bound = GRAVITY * dt * tau;
            ensure!(err <= bound, "tau {tau}: drop error {err} > {bound}");
            ensure!((obj.pose.position.x - (x0 + v0.x * tau)).abs() < 1e-12, "horizontal drift at tau {tau}");
            ensure!(obj.pose.orientation == p1.orientation, "orientation changed in flight");
            worst_ratio = worst_ratio.max(err / bound);
        }
    }
    Ok(format!("3 throws over 0.5s, worst error {:.2} of g*dt*tau", worst_ratio))
}

// 8 ------------------------------------------------------------------------

fn policy_sanity(fx: &Fixture) -> Outcome {
    let params = PolicyParams::default();
    let easy = curated_easy_subset(&fx.pool, &fx.chain, EASY_SUBSET_SIZE);
    ensure!(easy.len() == EASY_SUBSET_SIZE, "curated subset has {} scenes", easy.len());
    let easy_scenes = scenes(&fx.pool, &easy);
    let res = run_episodes(&easy_scenes, &fx.chain, &fx.config, || build_policy(PolicyKind::ScriptedOracle, &params), 8)
        .map_err(|e| e.to_string())?;
    let oracle = summarize("scripted_oracle", Setup::S0, Split::Test, &res).map_err(|e| e.to_string())?;
    let failed: Vec<String> = res
        .iter()
        .filter(|r| r.status != EpisodeStatus::Success)
        .map(|r| format!("{}:{}", r.scene_id, r.status))
        .collect();
    ensure!(
        oracle.success_rate >= ORACLE_SUCCESS_MIN,
        "oracle success {:.2}% on curated subset, failures {failed:?}",
        oracle.success_rate
    );

    for scene in &fx.pool.scenes {
        let mut ep = Episode::reset(scene, &fx.chain, &fx.config).map_err(|e| e.to_string())?;
        let start = *ep.q();
        let mut policy = HoldThenPlan::new(HoldThenPlanParams::default());
        policy
            .reset(&EpisodeInfo { scene, chain: &fx.chain, config: &fx.config })
            .map_err(|e| e.to_string())?;
        let mut obs = ep.observation();
        while obs.time < scene.presentation_time() && !ep.status().is_terminal() {
            let a = policy.act(&obs).map_err(|e| e.to_string())?;
            ensure!(
                a.target_q == obs.q,
                "scene {}: commanded motion at t={:.3}",
                scene.scene_id,
                obs.time
            );
            obs = ep.step(&a).map_err(|e| e.to_string())?.observation;
            ensure!(*ep.q() == start, "scene {}: robot moved before presentation", scene.scene_id);
        }
    }

    let mean_exec = |kind: PolicyKind| -> std::result::Result<f64, String> {
        let (rep, _) = run_benchmark(
            &fx.pool,
            Setup::S0,
            Split::Test,
            SPLIT_SEED,
            &fx.chain,
            &fx.config,
            || build_policy(kind, &params),
            8,
        )
        .map_err(|e| e.to_string())?;
        rep.mean_exec.ok_or_else(|| format!("{} had no successes", kind.name()))
    };
    let open_loop = mean_exec(PolicyKind::HoldThenPlan)?;
    let reactive = mean_exec(PolicyKind::ReactiveFrontApproach)?;
    ensure!(
        reactive < open_loop,
        "reactive mean exec {reactive:.3}s not below hold_then_plan {open_loop:.3}s"
    );
    Ok(format!(
        "oracle {:.1}% on {} easy scenes, hold_then_plan still on 900 scenes before presentation, mean exec reactive {reactive:.2}s < hold_then_plan {open_loop:.2}s",
        oracle.success_rate,
        easy.len()
    ))
}

// 9 ------------------------------------------------------------------------

fn result(id: u32, status: EpisodeStatus, steps: u64, plan: f64) -> EpisodeResult {
    EpisodeResult {
        scene_id: id,
        status,
        exec_time: steps as f64 / 60.0,
        exec_time_moving: steps as f64 / 120.0,
        plan_time: plan,
        steps,
        error: None,
    }
}

fn metrics_arithmetic(_: &Fixture) -> Outcome {
    use EpisodeStatus::{Failure, Success};
    let set = [
        result(1, Success, 240, 0.5),
        result(2, Success, 360, 1.5),
        result(3, Failure(FailureCause::Contact), 100, 7.0),
        result(4, Failure(FailureCause::Drop), 50, 3.0),
    ];
    let r = summarize("p", Setup::S0, Split::Test, &set).map_err(|e| e.to_string())?;
    ensure!(
        r.success_rate == 50.0 && r.failure_contact == 25.0 && r.failure_drop == 25.0 && r.failure_timeout == 0.0,
        "rates {r:?}"
    );
    ensure!(r.mean_exec == Some(5.0), "mean exec {:?}", r.mean_exec);
    ensure!(r.mean_exec_moving == Some(2.5), "mean exec moving {:?}", r.mean_exec_moving);
    ensure!(r.mean_plan == Some(1.0), "mean plan {:?}", r.mean_plan);
    ensure!(r.mean_total == Some(6.0), "mean total {:?}", r.mean_total);

    let set = [
        result(1, Success, 120, 0.25),
        result(2, Failure(FailureCause::Timeout), 780, 0.0),
        result(3, Failure(FailureCause::Timeout), 780, 0.0),
    ];
    let r = summarize("p", Setup::S1, Split::Val, &set).map_err(|e| e.to_string())?;
    ensure!(r.success_rate == 1.0 / 3.0 * 100.0 && r.failure_timeout == 2.0 / 3.0 * 100.0, "thirds {r:?}");
    ensure!(r.mean_exec == Some(2.0) && r.mean_total == Some(2.25), "single success means {r:?}");

    let all = [result(1, Success, 60, 0.0), result(2, Success, 120, 0.0)];
    let text = render_report(&summarize("p", Setup::S0, Split::Test, &all).map_err(|e| e.to_string())?);
    let cols: Vec<&str> = text.lines().nth(2).unwrap_or_default().split_whitespace().collect();
    ensure!(
        cols == ["100.00", "1.50", "0.00", "1.50", "0.00", "0.00", "0.00"],
        "all-success row {cols:?}"
    );
    let none = [result(1, Failure(FailureCause::Drop), 60, 0.0)];
    let r = summarize("p", Setup::S0, Split::Test, &none).map_err(|e| e.to_string())?;
    ensure!(r.mean_exec.is_none() && r.mean_total.is_none(), "means without successes");
    ensure!(
        summarize("p", Setup::S0, Split::Test, &[]).is_err_and(|e| e.to_string().contains("no episodes")),
        "empty set accepted"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let statuses = [
        Success,
        Failure(FailureCause::Contact),
        Failure(FailureCause::Drop),
        Failure(FailureCause::Timeout),
    ];
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let n = rng.random_range(1..300);
        let set: Vec<EpisodeResult> = (0..n)
            .map(|i| result(i, statuses[rng.random_range(0..4)], rng.random_range(1..780), rng.random_range(0.0..2.0)))
            .collect();
        let r = summarize("p", Setup::S0, Split::Test, &set).map_err(|e| e.to_string())?;
        let sum = r.success_rate + r.failure_contact + r.failure_drop + r.failure_timeout;
        worst = worst.max((sum - 100.0).abs());
        let successes: Vec<&EpisodeResult> = set.iter().filter(|e| e.status == Success).collect();
        if let Some(m) = r.mean_exec {
            let hand = successes.iter().map(|e| e.exec_time).sum::<f64>() / successes.len() as f64;
            ensure!(m == hand, "mean exec {m} vs {hand}");
        }
    }
    ensure!(worst <= RATE_SUM_TOL, "rates sum off by {worst:e}");
    Ok(format!("hand-built sets exact, 500 random sets sum to 100% within {worst:.1e}"))
}

// 10 -----------------------------------------------------------------------

fn throughput(fx: &Fixture) -> Outcome {
    let params = PolicyParams::default();
    let t = Instant::now();
    let (report, results) = run_benchmark(
        &fx.pool,
        Setup::S0,
        Split::Test,
        SPLIT_SEED,
        &fx.chain,
        &fx.config,
        || build_policy(PolicyKind::HoldThenPlan, &params),
        1,
    )
    .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(results.len() == 144, "{} episodes", results.len());
    ensure!(secs < THROUGHPUT_BUDGET_S, "took {secs:.1}s");
    Ok(format!(
        "144 episodes on one thread in {secs:.1}s, success {:.2}%",
        report.success_rate
    ))
}
