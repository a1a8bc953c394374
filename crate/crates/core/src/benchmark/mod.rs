//! Batch evaluation over a split and metric reduction.

mod results;

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{Episode, EnvConfig, EpisodeStatus, FailureCause, Trace, TraceStep};
use crate::error::{Error, Result};
use crate::kinematics::Chain;
use crate::policies::{EpisodeInfo, Policy};
use crate::scene::{Scene, Setup, Split};

pub use results::{read_results, results_from_str, results_to_string, write_results, RunInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene_id: u32,
    pub status: EpisodeStatus,
    /// Simulated episode length, `steps * dt` (s).
    pub exec_time: f64,
    /// Simulated time during which some joint moved (s).
    pub exec_time_moving: f64,
    /// Wall-clock time spent inside policy calls (s).
    pub plan_time: f64,
    pub steps: u64,
    /// Set when the policy failed; the episode then counts as a timeout.
    pub error: Option<String>,
}

impl EpisodeResult {
    pub fn total_time(&self) -> f64 {
        self.exec_time + self.plan_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub policy: String,
    pub setup: Setup,
    pub split: Split,
    pub n_episodes: usize,
    pub success_rate: f64,
    pub failure_contact: f64,
    pub failure_drop: f64,
    pub failure_timeout: f64,
    /// Means over successful episodes; `None` without successes.
    pub mean_exec: Option<f64>,
    pub mean_exec_moving: Option<f64>,
    pub mean_plan: Option<f64>,
    pub mean_total: Option<f64>,
    /// Episodes whose policy raised an error.
    pub n_errors: usize,
}

/// Rates and success-only means over `results`.
pub fn summarize(policy: &str, setup: Setup, split: Split, results: &[EpisodeResult]) -> Result<BenchmarkReport> {
    if results.is_empty() {
        return Err(Error::Domain("no episodes".into()));
    }
    let n = results.len();
    let pct = |k: usize| k as f64 / n as f64 * 100.0;
    let count = |s: EpisodeStatus| results.iter().filter(|r| r.status == s).count();
    let success: Vec<&EpisodeResult> = results.iter().filter(|r| r.status == EpisodeStatus::Success).collect();
    if let Some(r) = results.iter().find(|r| !r.status.is_terminal()) {
        return Err(Error::Domain(format!("episode on scene {} never terminated", r.scene_id)));
    }
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
        (!success.is_empty()).then(|| success.iter().map(|r| f(r)).sum::<f64>() / success.len() as f64)
    };
    Ok(BenchmarkReport {
        policy: policy.to_string(),
        setup,
        split,
        n_episodes: n,
        success_rate: pct(success.len()),
        failure_contact: pct(count(EpisodeStatus::Failure(FailureCause::Contact))),
        failure_drop: pct(count(EpisodeStatus::Failure(FailureCause::Drop))),
        failure_timeout: pct(count(EpisodeStatus::Failure(FailureCause::Timeout))),
        mean_exec: mean(&|r| r.exec_time),
        mean_exec_moving: mean(&|r| r.exec_time_moving),
        mean_plan: mean(&|r| r.plan_time),
        mean_total: mean(&|r| r.total_time()),
        n_errors: results.iter().filter(|r| r.error.is_some()).count(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// Plain-text table: success, exec/plan/total means, then failure rates.
pub fn render_report(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "policy: {}  setup: {}  split: {}  episodes: {}",
        report.policy, report.setup, report.split, report.n_episodes
    );
    let _ = writeln!(
        out,
        "{:>10} {:>8} {:>8} {:>8} {:>10} {:>8} {:>10}",
        "success%", "exec", "plan", "total", "contact%", "drop%", "timeout%"
    );
    let _ = writeln!(
        out,
        "{:>10.2} {:>8} {:>8} {:>8} {:>10.2} {:>8.2} {:>10.2}",
        report.success_rate,
        cell(report.mean_exec),
        cell(report.mean_plan),
        cell(report.mean_total),
        report.failure_contact,
        report.failure_drop,
        report.failure_timeout
    );
    if report.n_errors > 0 {
        let _ = writeln!(out, "policy errors: {} (counted as timeout)", report.n_errors);
    }
    out
}

pub fn report_to_json(report: &BenchmarkReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Runs one episode to termination. A policy error ends the episode as a
/// timeout carrying the error message.
pub fn run_episode(
    scene: &Scene,
    chain: &Chain,
    config: &EnvConfig,
    policy: &mut dyn Policy,
    record: bool,
) -> Result<(EpisodeResult, Option<Trace>)> {
    let mut episode = Episode::reset(scene, chain, config)?;
    let mut trace = record.then(|| Trace::new(scene.scene_id, policy.name(), config.clone()));
    let mut plan_time = 0.0;
    let info = EpisodeInfo { scene, chain, config };
    let started = Instant::now();
    let reset = policy.reset(&info);
    plan_time += started.elapsed().as_secs_f64();
    let mut error = reset.err().map(|e| e.to_string());
    let mut obs = episode.observation();
    let mut status = EpisodeStatus::Running;
    while error.is_none() && !status.is_terminal() {
        let started = Instant::now();
        let action = policy.act(&obs);
        plan_time += started.elapsed().as_secs_f64();
        let action = match action {
            Ok(a) => a,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let out = match episode.step(&action) {
            Ok(out) => out,
            Err(e @ Error::Domain(_)) => {
                error = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        status = out.status;
        if let Some(t) = trace.as_mut() {
            t.steps.push(TraceStep {
                time: out.observation.time,
                q: out.observation.q,
                action: action.target_q,
                object_pose: out.observation.object_pose,
                release: out.observation.release,
                status,
            });
        }
        obs = out.observation;
    }
    if error.is_some() {
        status = EpisodeStatus::Failure(FailureCause::Timeout);
    }
    let dt = config.control_dt;
    Ok((
        EpisodeResult {
            scene_id: scene.scene_id,
            status,
            exec_time: episode.steps() as f64 * dt,
            exec_time_moving: episode.moving_steps() as f64 * dt,
            plan_time,
            steps: episode.steps(),
            error,
        },
        trace,
    ))
}

/// One episode per scene on a pool of `parallelism` threads; results are
/// sorted by scene id. `make_policy` is called once per episode.
pub fn run_episodes<F>(
    scenes: &[&Scene],
    chain: &Chain,
    config: &EnvConfig,
    make_policy: F,
    parallelism: usize,
) -> Result<Vec<EpisodeResult>>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    let out = run_pool(scenes, chain, config, make_policy, parallelism, false)?;
    Ok(out.into_iter().map(|(r, _)| r).collect())
}

/// As [`run_episodes`], also returning the per-step trace of each episode.
pub fn run_episodes_recorded<F>(
    scenes: &[&Scene],
    chain: &Chain,
    config: &EnvConfig,
    make_policy: F,
    parallelism: usize,
) -> Result<Vec<(EpisodeResult, Trace)>>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    let out = run_pool(scenes, chain, config, make_policy, parallelism, true)?;
    Ok(out
        .into_iter()
        .map(|(r, t)| (r, t.expect("recording requested")))
        .collect())
}

fn run_pool<F>(
    scenes: &[&Scene],
    chain: &Chain,
    config: &EnvConfig,
    make_policy: F,
    parallelism: usize,
    record: bool,
) -> Result<Vec<(EpisodeResult, Option<Trace>)>>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    config.validate()?;
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out: Vec<(EpisodeResult, Option<Trace>)> = pool.install(|| {
        scenes
            .par_iter()
            .map(|s| {
                let mut policy = make_policy();
                run_episode(s, chain, config, policy.as_mut(), record)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    out.sort_by_key(|(r, _)| r.scene_id);
    Ok(out)
}

/// Runs every scene of `split` under `setup` and summarizes.
#[allow(clippy::too_many_arguments)]
pub fn run_benchmark<F>(
    catalog: &crate::scene::Catalog,
    setup: Setup,
    split: Split,
    split_seed: u64,
    chain: &Chain,
    config: &EnvConfig,
    make_policy: F,
    parallelism: usize,
) -> Result<(BenchmarkReport, Vec<EpisodeResult>)>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    let assignment = crate::scene::assign_splits(catalog, setup, split_seed)?;
    let scenes: Vec<&Scene> = assignment
        .ids(split)
        .iter()
        .map(|id| {
            catalog
                .scene(*id)
                .ok_or_else(|| Error::Domain(format!("scene {id} missing from catalog")))
        })
        .collect::<Result<_>>()?;
    let name = make_policy().name();
    let results = run_episodes(&scenes, chain, config, make_policy, parallelism)?;
    let report = summarize(name, setup, split, &results)?;
    Ok((report, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(id: u32, status: EpisodeStatus, exec: f64, plan: f64) -> EpisodeResult {
        EpisodeResult {
            scene_id: id,
            status,
            exec_time: exec,
            exec_time_moving: exec / 2.0,
            plan_time: plan,
            steps: (exec * 60.0).round() as u64,
            error: None,
        }
    }

    #[test]
    fn rates_and_success_means() {
        let res = [
            r(0, EpisodeStatus::Success, 4.0, 0.5),
            r(1, EpisodeStatus::Success, 6.0, 1.5),
            r(2, EpisodeStatus::Failure(FailureCause::Contact), 3.0, 9.0),
            r(3, EpisodeStatus::Failure(FailureCause::Drop), 2.0, 9.0),
        ];
        let rep = summarize("p", Setup::S0, Split::Test, &res).unwrap();
        assert_eq!(rep.success_rate, 50.0);
        assert_eq!(rep.failure_contact, 25.0);
        assert_eq!(rep.failure_drop, 25.0);
        assert_eq!(rep.failure_timeout, 0.0);
        assert_eq!(rep.mean_exec, Some(5.0));
        assert_eq!(rep.mean_plan, Some(1.0));
        assert_eq!(rep.mean_total, Some(6.0));
    }

    #[test]
    fn empty_is_an_error() {
        let e = summarize("p", Setup::S0, Split::Test, &[]).unwrap_err();
        assert!(e.to_string().contains("no episodes"));
    }

    #[test]
    fn table_layout() {
        let res = [r(0, EpisodeStatus::Success, 4.0, 0.5)];
        let text = render_report(&summarize("p", Setup::S1, Split::Val, &res).unwrap());
        let last = text.lines().nth(2).unwrap();
        let cols: Vec<&str> = last.split_whitespace().collect();
        assert_eq!(cols, ["100.00", "4.00", "0.50", "4.50", "0.00", "0.00", "0.00"]);
    }
}
