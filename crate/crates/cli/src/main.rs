//! `handover`: generate scene catalogs, run benchmarks, inspect results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use handover_core::policies::PolicyKind;
use handover_core::scene::{Setup, Split};

use config::RunConfig;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unreadable, unwritable or malformed files (exit 2).
    Data(String),
    /// A kernel invariant did not hold (exit 3).
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Invariant(m) => f.write_str(m),
        }
    }
}

impl From<handover_core::Error> for CliError {
    fn from(e: handover_core::Error) -> Self {
        use handover_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Usage(msg),
            E::Io { .. } | E::Format { .. } | E::Domain(_) => CliError::Data(msg),
            E::Protocol(_) => CliError::Invariant(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "handover", version, about = "Simulated human-to-robot handover benchmark")]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Catalog directory.
    #[arg(long, global = true, env = "HANDOVER_DATA_DIR", value_name = "DIR")]
    data_dir: Option<PathBuf>,

    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the scene catalog and write it to disk.
    Generate(GenerateArgs),
    /// Run a policy on one split and report the metrics.
    Bench(BenchArgs),
    /// Print a recorded episode trace, optionally re-simulating it.
    Replay(ReplayArgs),
    /// Summarize a results file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the data directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_setup)]
    setup: Option<Setup>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j')]
    parallelism: Option<usize>,
    /// Per-episode results file.
    #[arg(long, value_name = "FILE")]
    results: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Record one trace file per episode into this directory.
    #[arg(long, value_name = "DIR")]
    trace_dir: Option<PathBuf>,
    /// Chain description file replacing the built-in arm.
    #[arg(long, value_name = "FILE")]
    chain: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
}

/// Episode kernel overrides.
#[derive(Debug, Args, Default)]
struct KernelArgs {
    /// Control period (s).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    substeps: Option<u32>,
    /// Joint tracking gain (1/s).
    #[arg(long)]
    gain: Option<f64>,
    /// Goal centre in the robot base frame, `x,y,z` (m).
    #[arg(long, value_parser = parse_vec3, value_name = "X,Y,Z")]
    goal_center: Option<[f64; 3]>,
    #[arg(long)]
    goal_radius: Option<f64>,
    /// Contact detection margin (m).
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    trace: PathBuf,
    /// Re-run the recorded actions through the kernel against the catalog
    /// and require identical states.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_name = "FILE")]
    chain: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    results: PathBuf,
    /// Print JSON instead of the table.
    #[arg(long)]
    json: bool,
}

fn parse_setup(s: &str) -> Result<Setup, String> {
    s.parse().map_err(|e: handover_core::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: handover_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: handover_core::Error| e.to_string())
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated numbers".to_string())
}

/// Base configuration with the command-line values layered on top.
fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    match &cli.command {
        Some(Command::Generate(a)) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
        }
        Some(Command::Bench(a)) => apply_bench(&mut cfg, a),
        Some(Command::Replay(a)) => {
            if let Some(c) = &a.chain {
                cfg.chain = Some(c.clone());
            }
        }
        Some(Command::Report(_)) | None => {}
    }
    Ok(cfg)
}

fn apply_bench(cfg: &mut RunConfig, a: &BenchArgs) {
    macro_rules! set {
        ($($src:expr => $dst:expr),* $(,)?) => {
            $(if let Some(v) = $src.clone() { $dst = v; })*
        };
    }
    set! {
        a.setup => cfg.setup,
        a.split => cfg.split,
        a.policy => cfg.policy,
        a.split_seed => cfg.split_seed,
        a.parallelism => cfg.parallelism,
        a.kernel.dt => cfg.env.control_dt,
        a.kernel.substeps => cfg.env.substeps,
        a.kernel.gain => cfg.env.gain,
        a.kernel.goal_center => cfg.env.goal.center,
        a.kernel.goal_radius => cfg.env.goal.radius,
        a.kernel.margin => cfg.env.contact_margin,
        a.kernel.time_limit => cfg.env.time_limit,
    }
    if a.results.is_some() {
        cfg.results = a.results.clone();
    }
    if a.trace_dir.is_some() {
        cfg.trace_dir = a.trace_dir.clone();
    }
    if a.chain.is_some() {
        cfg.chain = a.chain.clone();
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    match cli.command {
        None => Err(CliError::Usage("no command given (try --help)".into())),
        Some(Command::Generate(a)) => commands::generate(&cfg, a.out.as_deref()),
        Some(Command::Bench(a)) => commands::bench(&cfg, a.json.as_deref()),
        Some(Command::Replay(a)) => commands::replay(&cfg, &a.trace, a.verify),
        Some(Command::Report(a)) => commands::report(&a.results, a.json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli))
        .unwrap_or_else(|_| Err(CliError::Invariant("internal error (panic)".into())));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
