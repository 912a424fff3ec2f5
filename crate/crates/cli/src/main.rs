//! `obsnet`: generate scenarios, run allocation methods and write CSV/NDJSON
//! results.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 size-guard refusal,
//! 4 internal invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use obsnet_core::experiment::{run_dynamic, run_static, run_static_median, Method, ResultRow, RunConfig};
use obsnet_core::protocol::{Trace, TraceLevel};
use obsnet_core::scenario::{generate_dynamic, generate_static, Profile, Scenario, ScenarioConfig};
use obsnet_core::Error;

#[derive(Parser)]
#[command(name = "obsnet", version, about = "Multiround combinatorial allocation for Earth-observation resources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded scenario (and its event schedule) to a directory.
    Generate(GenerateArgs),
    /// Allocate one scenario with one method.
    Run(RunArgs),
    /// Run methods over a grid of task counts and seeds.
    Sweep(SweepArgs),
    /// Replay a scenario's task arrivals round by round.
    Dynamic(DynamicArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Table1,
    Table2,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Table1 => Profile::Table1,
            ProfileArg::Table2 => Profile::Table2,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    profile: ProfileArg,
    /// Number of tasks for a static scenario.
    #[arg(long, conflicts_with = "dynamic")]
    tasks: Option<u32>,
    /// Write the profile's arrival schedule as well.
    #[arg(long)]
    dynamic: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct MethodOpts {
    /// Cluster count for TCA.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    y: Option<u32>,
    /// Record wall-clock runtimes; output is then no longer byte-reproducible.
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    timing: Toggle,
}

#[derive(Args)]
struct RunArgs {
    /// scenario.json or a directory holding it.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: MethodOpts,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::Table2)]
    profile: ProfileArg,
    #[arg(long, value_delimiter = ',', default_values_t = [50u32, 100, 150, 200])]
    tasks: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "mca,ssa,aus,exact,tca")]
    methods: Vec<String>,
    /// Repeats per cell; runtimes are the median.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: MethodOpts,
}

#[derive(Args)]
struct DynamicArgs {
    /// Scenario with an event schedule; generated from the table2 profile
    /// when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "mca,ssa,aus,exact,tca")]
    methods: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: MethodOpts,
}

/// Per-round dynamic output; the first nine columns match the static CSV.
#[derive(Serialize)]
struct DynamicCsvRow {
    method: String,
    seed: u64,
    n_tasks: usize,
    round: u32,
    tcr: Option<f64>,
    runtime_ms: Option<f64>,
    aec_km: Option<f64>,
    rsc: Option<f64>,
    or: Option<f64>,
    nt: usize,
    assigned: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SizeGuard { .. } => 3,
        Error::Invariant(_) => 4,
        _ => 2,
    }
}

fn run_config(method: Method, seed: u64, opts: &MethodOpts) -> obsnet_core::Result<RunConfig> {
    let mut cfg = RunConfig::new(method, seed);
    cfg.k = opts.k;
    cfg.timing = opts.timing == Toggle::On;
    cfg.trace_level = TraceLevel::from_env();
    if let Some(r) = opts.rho {
        cfg.mca.fls.rho = r;
    }
    if let Some(s) = opts.sigma {
        cfg.mca.fls.sigma = s;
    }
    if let Some(y) = opts.y {
        cfg.mca.fls.y = y;
    }
    cfg.mca.fls.validate()?;
    if cfg.k == 0 {
        return Err(Error::InvalidParam("--k must be at least 1".into()));
    }
    Ok(cfg)
}

fn methods(names: &[String]) -> obsnet_core::Result<Vec<Method>> {
    names.iter().map(|m| m.parse()).collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> obsnet_core::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `trace.ndjson` and its sha256 next to the results.
fn write_trace(dir: &Path, trace: &Trace) -> obsnet_core::Result<String> {
    fs::write(dir.join("trace.ndjson"), trace.to_ndjson())?;
    let digest = trace.digest();
    fs::write(dir.join("trace.sha256"), format!("{digest}  trace.ndjson\n"))?;
    Ok(digest)
}

fn generate(a: &GenerateArgs) -> obsnet_core::Result<()> {
    let mut cfg = ScenarioConfig::profile(a.profile.into(), a.seed);
    let scenario = if a.dynamic {
        generate_dynamic(&cfg)?
    } else {
        if let Some(n) = a.tasks {
            cfg.task_count = n;
        }
        cfg.dynamic = None;
        generate_static(&cfg)?
    };
    scenario.save(&a.out)?;
    println!("wrote {} ({} tasks, {} events)", a.out.display(), scenario.world.tasks.len(), scenario.events.len());
    Ok(())
}

fn run(a: &RunArgs) -> obsnet_core::Result<()> {
    let method: Method = a.method.parse()?;
    let cfg = run_config(method, a.seed, &a.opts)?;
    let scenario = Scenario::load(&a.scenario)?;
    fs::create_dir_all(&a.out)?;
    let out = run_static(&scenario, &cfg)?;
    write_csv(&a.out.join("results.csv"), std::slice::from_ref(&out.row))?;
    let digest = write_trace(&a.out, &out.trace)?;
    println!("{} tcr={} trace={digest}", method, fmt_opt(out.row.tcr));
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn sweep(a: &SweepArgs) -> obsnet_core::Result<()> {
    let ms = methods(&a.methods)?;
    fs::create_dir_all(&a.out)?;
    let mut rows = Vec::new();
    let mut trace = Trace::default();
    for &n in &a.tasks {
        for &seed in &a.seeds {
            let mut sc = ScenarioConfig::profile(a.profile.into(), seed);
            sc.task_count = n;
            sc.dynamic = None;
            let scenario = generate_static(&sc)?;
            for &m in &ms {
                let cfg = run_config(m, seed, &a.opts)?;
                match run_static_median(&scenario, &cfg, a.repeats) {
                    Ok(out) => {
                        trace.append(&out.trace);
                        rows.push(out.row);
                    }
                    Err(Error::SizeGuard { size, limit }) => {
                        log::warn!("{m} refused {size} tasks (limit {limit})");
                        rows.push(empty_row(m, seed, n as usize));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    write_csv(&a.out.join("results.csv"), &rows)?;
    let digest = write_trace(&a.out, &trace)?;
    println!("{} rows trace={digest}", rows.len());
    Ok(())
}

fn empty_row(m: Method, seed: u64, n: usize) -> ResultRow {
    ResultRow {
        method: m.name().into(),
        seed,
        n_tasks: n,
        round: 0,
        tcr: None,
        runtime_ms: None,
        aec_km: None,
        rsc: None,
        or: None,
        level1_ms: None,
        level2_ms: None,
        level3_ms: None,
    }
}

fn dynamic(a: &DynamicArgs) -> obsnet_core::Result<()> {
    let ms = methods(&a.methods)?;
    let scenario = match &a.scenario {
        Some(p) => Scenario::load(p)?,
        None => generate_dynamic(&ScenarioConfig::profile(Profile::Table2, a.seed))?,
    };
    if scenario.events.is_empty() {
        return Err(Error::InvalidScenario("scenario has no event schedule".into()));
    }
    fs::create_dir_all(&a.out)?;
    let mut rows = Vec::new();
    let mut trace = Trace::default();
    for m in ms {
        let cfg = run_config(m, a.seed, &a.opts)?;
        let out = run_dynamic(&scenario, &cfg)?;
        trace.append(&out.trace);
        rows.extend(out.rows.into_iter().map(|r| DynamicCsvRow {
            method: r.method,
            seed: r.seed,
            n_tasks: r.at,
            round: r.round,
            tcr: r.tcr,
            runtime_ms: r.rpt_ms,
            aec_km: r.aec_km,
            rsc: r.rsc,
            or: r.or,
            nt: r.nt,
            assigned: r.assigned,
        }));
    }
    write_csv(&a.out.join("results.csv"), &rows)?;
    let digest = write_trace(&a.out, &trace)?;
    println!("{} rows trace={digest}", rows.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Dynamic(a) => dynamic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
