use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use pimsner_lab::dim_calculus::DimGraph;
use pimsner_lab::io::parse_json;
use pimsner_lab::tasks::{run_task, BoundsTask, RelationsTask, RunOptions, Task, TaskFile, TaskOutcome};
use pimsner_lab::Error;
use serde_json::json;

const THREADS_VAR: &str = "PIMSNER_LAB_THREADS";

/// Certify Rokhlin towers, completely positive factorizations and nuclear
/// dimension bounds for Toeplitz and Cuntz-Pimsner algebras.
///
/// Every input file is either a versioned task file
/// `{"version": 1, "task": {"<kind>": {...}}}` or the bare parameters of the
/// subcommand. Exit status: 0 pass, 1 certified failure, 2 input error.
#[derive(Parser, Debug)]
#[command(name = "pimsner-lab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Directory receiving report.json, metadata.json and any CSV table.
    #[arg(long, global = true, default_value = "pimsner-lab-out")]
    out: PathBuf,
    /// Seed for every randomized test set.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the pass threshold of check-tower (1e-10), check-qc-unit
    /// (1e-10) and relations (1e-10).
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure the four defects of a Rokhlin tower.
    CheckTower { input: PathBuf },
    /// Build a tower for the cyclic shift on C^n and measure it.
    SynthesizeTower { input: PathBuf },
    /// Certify the factorization error of a finite set of Toeplitz elements.
    VerifyFactorization { input: PathBuf },
    /// Measured factorization error against the analytic bound over a list of heights.
    Sweep { input: PathBuf },
    /// Quasicentrality of the basis truncation units in D_p(H).
    CheckQcUnit { input: PathBuf },
    /// Propagate nuclear dimension and Rokhlin dimension bounds.
    Bounds { input: PathBuf },
    /// Toeplitz relations on seeded random correspondences.
    Relations { input: Option<PathBuf> },
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::CheckTower { .. } => "check_tower",
            Command::SynthesizeTower { .. } => "synthesize_tower",
            Command::VerifyFactorization { .. } => "verify_factorization",
            Command::Sweep { .. } => "sweep",
            Command::CheckQcUnit { .. } => "quasicentral_check",
            Command::Bounds { .. } => "bounds",
            Command::Relations { .. } => "relations",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Command::CheckTower { input }
            | Command::SynthesizeTower { input }
            | Command::VerifyFactorization { input }
            | Command::Sweep { input }
            | Command::CheckQcUnit { input }
            | Command::Bounds { input } => Some(input),
            Command::Relations { input } => input.as_deref(),
        }
    }
}

fn bare_task(kind: &str, text: &str, value: &serde_json::Value) -> Result<Task, Error> {
    Ok(match kind {
        "check_tower" => Task::CheckTower(parse_json(text)?),
        "synthesize_tower" => Task::SynthesizeTower(parse_json(text)?),
        "verify_factorization" => Task::VerifyFactorization(parse_json(text)?),
        "sweep" => Task::Sweep(parse_json(text)?),
        "quasicentral_check" => Task::QuasicentralCheck(parse_json(text)?),
        "bounds" if value.get("graph").is_some() => Task::Bounds(parse_json(text)?),
        "bounds" => Task::Bounds(BoundsTask {
            graph: DimGraph::from_json(text)?,
            config: Default::default(),
            confluence_seeds: 20,
        }),
        "relations" => Task::Relations(parse_json(text)?),
        other => unreachable!("unknown task kind {other}"),
    })
}

fn load_task(cmd: &Command) -> Result<Task, Error> {
    let Some(path) = cmd.input() else {
        return Ok(Task::Relations(RelationsTask {
            instances: 100,
            tol: None,
        }));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = parse_json(&text)?;
    if value.get("version").is_some() && value.get("task").is_some() {
        let file = TaskFile::parse(&text)?;
        if file.task.name() != cmd.kind() {
            return Err(Error::Input(format!(
                "task file holds a {} task, expected {}",
                file.task.name(),
                cmd.kind()
            )));
        }
        return Ok(file.task);
    }
    bare_task(cmd.kind(), &text, &value)
}

fn configure_threads() -> Result<Option<usize>, Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Input(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

fn unix_ms(t: SystemTime) -> u128 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn write_artifacts(
    cli: &Cli,
    task: &Task,
    outcome: &TaskOutcome,
    threads: Option<usize>,
    started: SystemTime,
    elapsed_ms: u128,
) -> std::io::Result<()> {
    let out = &cli.global.out;
    fs::create_dir_all(out)?;
    let mut report = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    report.push('\n');
    fs::write(out.join("report.json"), report)?;
    if let Some((name, csv)) = &outcome.csv {
        fs::write(out.join(name), csv)?;
    }
    let meta = json!({
        "tool": "pimsner-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "task": task.name(),
        "input": cli.command.input().map(|p| p.display().to_string()),
        "seed": cli.global.seed,
        "tol": cli.global.tol,
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
        "started_unix_ms": unix_ms(started),
        "finished_unix_ms": unix_ms(SystemTime::now()),
        "elapsed_ms": elapsed_ms,
        "pass": outcome.pass,
    });
    let mut meta = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    meta.push('\n');
    fs::write(out.join("metadata.json"), meta)
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match configure_threads() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pimsner-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let task = match load_task(&cli.command) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pimsner-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        seed: cli.global.seed,
        tol: cli.global.tol,
    };
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = match run_task(&task, opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("pimsner-lab: {}: {e}", task.name());
            return ExitCode::from(exit_for(&e));
        }
    };
    let elapsed_ms = clock.elapsed().as_millis();
    if let Err(e) = write_artifacts(&cli, &task, &outcome, threads, started, elapsed_ms) {
        eprintln!("pimsner-lab: writing to {}: {e}", cli.global.out.display());
        return ExitCode::from(2);
    }
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{}: {verdict} ({})", task.name(), cli.global.out.join("report.json").display());
    ExitCode::from(if outcome.pass { 0 } else { 1 })
}
