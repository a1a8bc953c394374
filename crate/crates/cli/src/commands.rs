use std::fs;
use std::path::Path;

use handover_core::benchmark::{
    read_results, render_report, report_to_json, run_episodes, run_episodes_recorded, summarize, write_results,
    EpisodeResult, RunInfo,
};
use handover_core::episode::{read_trace, write_trace, Action, Episode, EpisodeStatus, Trace};
use handover_core::kinematics::{read_chain, Chain};
use handover_core::policies::build_policy;
use handover_core::scene::{assign_splits, generate_catalog, write_catalog, Catalog, Scene};

use crate::config::RunConfig;
use crate::CliError;

fn load_chain(cfg: &RunConfig) -> Result<Chain, CliError> {
    let chain = match &cfg.chain {
        Some(p) => read_chain(p)?,
        None => Chain::panda(),
    };
    chain.validate()?;
    Ok(chain)
}

fn load_catalog(cfg: &RunConfig) -> Result<Catalog, CliError> {
    Catalog::load(&cfg.data_dir).map_err(|e| {
        CliError::Data(format!(
            "{e} (generate a catalog with `handover generate --out {}`)",
            cfg.data_dir.display()
        ))
    })
}

/// The output's parent directory must already exist, so a typo fails
/// before any episode runs.
fn check_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(p) if !p.is_dir() => Err(CliError::Data(format!("directory {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn generate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    cfg.generator.validate()?;
    let dir = out.unwrap_or(&cfg.data_dir);
    let catalog = generate_catalog(cfg.seed, &cfg.generator)?;
    write_catalog(&catalog, dir)?;
    println!(
        "wrote {} scenes ({} for evaluation) to {}",
        catalog.scenes.len(),
        catalog.evaluation_scenes().count(),
        dir.display()
    );
    Ok(())
}

pub fn bench(cfg: &RunConfig, json: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let chain = load_chain(cfg)?;
    let catalog = load_catalog(cfg)?;
    let assignment = assign_splits(&catalog, cfg.setup, cfg.split_seed)?;
    let scenes: Vec<&Scene> = assignment
        .ids(cfg.split)
        .iter()
        .map(|id| catalog.scene(*id).expect("assigned ids come from the catalog"))
        .collect();
    let results_path = cfg.results_path();
    if cfg.results.is_some() {
        check_parent(&results_path)?;
    }
    if let Some(p) = json {
        check_parent(p)?;
    }
    if let Some(d) = &cfg.trace_dir {
        check_parent(d)?;
    }

    let make = || build_policy(cfg.policy, &cfg.policies);
    let threads = cfg.threads();
    let (results, traces): (Vec<EpisodeResult>, Vec<Trace>) = if cfg.trace_dir.is_some() {
        run_episodes_recorded(&scenes, &chain, &cfg.env, make, threads)?.into_iter().unzip()
    } else {
        (run_episodes(&scenes, &chain, &cfg.env, make, threads)?, Vec::new())
    };
    let report = summarize(cfg.policy.name(), cfg.setup, cfg.split, &results)?;

    let info = RunInfo {
        policy: cfg.policy.name().to_string(),
        setup: cfg.setup,
        split: cfg.split,
    };
    if let Some(dir) = results_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_results(&results_path, &info, &results)?;
    if let Some(d) = &cfg.trace_dir {
        create_dir(d)?;
        for t in &traces {
            write_trace(t, d.join(format!("trace_{:04}.txt", t.scene_id)))?;
        }
    }
    if let Some(p) = json {
        write_file(p, &report_to_json(&report))?;
    }
    print!("{}", render_report(&report));
    println!("results: {}", results_path.display());
    Ok(())
}

pub fn report(path: &Path, json: bool) -> Result<(), CliError> {
    let (info, results) = read_results(path)?;
    let report = summarize(&info.policy, info.setup, info.split, &results)?;
    if json {
        println!("{}", report_to_json(&report));
    } else {
        print!("{}", render_report(&report));
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
}

pub fn replay(cfg: &RunConfig, path: &Path, verify: bool) -> Result<(), CliError> {
    let trace = read_trace(path)?;
    if verify {
        let chain = load_chain(cfg)?;
        let catalog = load_catalog(cfg)?;
        let scene = catalog
            .scene(trace.scene_id)
            .ok_or_else(|| CliError::Data(format!("scene {} is not in the catalog", trace.scene_id)))?;
        resimulate(&trace, scene, &chain)?;
    }
    println!("scene {} policy {} ({} steps)", trace.scene_id, trace.policy, trace.steps.len());
    for s in &trace.steps {
        let p = s.object_pose.position;
        println!(
            "t={:.4} status={} release={} object=({:.4},{:.4},{:.4}) q=[{}]",
            s.time,
            s.status,
            s.release,
            p.x,
            p.y,
            p.z,
            fmt_vec(s.q.as_slice())
        );
    }
    println!("final: {} at {:.4} s", trace.final_status(), trace.final_time());
    if verify {
        println!("verified: kernel re-simulation matches every step");
    }
    Ok(())
}

/// Feeds the recorded actions back through a fresh episode; every step
/// must reproduce the recorded state bit for bit.
fn resimulate(trace: &Trace, scene: &Scene, chain: &Chain) -> Result<(), CliError> {
    let mut ep = Episode::reset(scene, chain, &trace.config)?;
    for (k, s) in trace.steps.iter().enumerate() {
        let out = ep
            .step(&Action { target_q: s.action })
            .map_err(|e| CliError::Invariant(format!("step {k}: {e}")))?;
        let o = &out.observation;
        let same = o.time.to_bits() == s.time.to_bits()
            && o.q == s.q
            && o.object_pose == s.object_pose
            && o.release == s.release
            && out.status == s.status;
        if !same {
            return Err(CliError::Invariant(format!(
                "step {k}: re-simulation diverges (recorded {} at t={}, got {} at t={})",
                s.status, s.time, out.status, o.time
            )));
        }
    }
    if !trace.final_status().is_terminal() && trace.steps.len() as u64 >= trace.config.max_steps() {
        return Err(CliError::Invariant("trace ran past the time limit without terminating".into()));
    }
    if trace.final_status() == EpisodeStatus::Running {
        eprintln!("note: trace ends before the episode terminated");
    }
    Ok(())
}
