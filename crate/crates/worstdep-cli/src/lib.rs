//! Batch front end: reads a JSON run configuration, runs the requested
//! search and writes its results to an output directory.

pub mod config;
pub mod output;

pub use config::{parse_config, Algorithm, Resolved, RunConfig};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;
use worstdep::search::grid::levels_per_axis;
use worstdep::search::{
    estimate_cost, greedy_search, grid_search_min, permuted_restarts, quantile_curve, search_grid, CurveRow,
    EvalRecord, GreedyTrace, GridStrategy, ProgressEvent, SearchResult,
};
use worstdep::vine::VineJson;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] worstdep::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration and usage problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Parser)]
#[command(name = "worstdep", version, about = "Worst-case dependence search for black-box models")]
pub struct Cli {
    /// Worker threads; all cores when absent.
    #[arg(long, env = "WORSTDEP_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured search and write its results.
    Run(RunArgs),
    /// Write the quantile-versus-tau curve of the single free pair.
    Curve(RunArgs),
    /// Print the number of model runs the configured search needs.
    Cost { config: PathBuf },
    /// Check a configuration and print it with every default filled in.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Command-line values that replace configuration entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(n) = overrides.n {
        config.n = n;
    }
    if let Some(out) = &overrides.out {
        config.output = Some(out.to_string_lossy().into_owned());
    }
    config.resolve()
}

/// Executes a parsed command line.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {:?} worker threads: {e}", cli.threads)))?;
    pool.install(|| match cli.command {
        Command::Run(args) => {
            let resolved = load_config(&args.config, &overrides(&args))?;
            let outcome = run(&resolved)?;
            eprintln!(
                "best quantile {} at record {} ({} model runs); results in {}",
                output::num(outcome.best.quantile),
                outcome.best.index,
                outcome.evaluations,
                outcome.directory.display()
            );
            Ok(())
        }
        Command::Curve(args) => {
            let resolved = load_config(&args.config, &overrides(&args))?;
            let path = write_curve(&resolved)?;
            eprintln!("curve written to {}", path.display());
            Ok(())
        }
        Command::Cost { config } => {
            let resolved = load_config(&config, &Overrides::default())?;
            println!("{}", cost(&resolved)?);
            Ok(())
        }
        Command::Validate { config } => {
            let resolved = load_config(&config, &Overrides::default())?;
            let text = serde_json::to_string_pretty(&resolved.config).expect("config serializes");
            println!("{text}");
            Ok(())
        }
    })
}

fn overrides(args: &RunArgs) -> Overrides {
    Overrides { seed: args.seed, n: args.n, out: args.out.clone() }
}

/// Number of points the configured grid search evaluates per family.
pub fn grid_point_count(resolved: &Resolved) -> Result<u128, CliError> {
    let p = resolved.space.free.len();
    let n = resolved.config.search.grid_size;
    let count = match resolved.space.strategy {
        GridStrategy::Regular => {
            let m = levels_per_axis(n, p)? as u128;
            (0..p).try_fold(1u128, |acc, _| acc.checked_mul(m))
        }
        GridStrategy::Lhs => Some(n as u128),
        GridStrategy::Vertices => 1u128.checked_shl(p as u32),
    };
    count.ok_or_else(|| CliError::Usage("grid size overflows 128 bits".into()))
}

/// Model runs of the configured search. Greedy runs use the closed-form
/// estimate over iterations `0..max_iterations`; grid runs count
/// `families · n · grid points · restarts`.
pub fn cost(resolved: &Resolved) -> Result<u128, CliError> {
    let c = &resolved.config;
    let families = resolved.space.families.len() as u64;
    match c.algorithm {
        Algorithm::Greedy => {
            let sizes: Vec<u64> = resolved.schedule().iter().map(|&s| s as u64).collect();
            Ok(estimate_cost(families, c.n as u64, &sizes, resolved.space.d as u64)?)
        }
        Algorithm::Grid | Algorithm::PermutedGrid => {
            let restarts = if c.algorithm == Algorithm::Grid { 1 } else { c.restarts as u128 };
            grid_point_count(resolved)?
                .checked_mul(families as u128 * c.n as u128)
                .and_then(|x| x.checked_mul(restarts))
                .ok_or_else(|| CliError::Usage("cost overflows 128 bits".into()))
        }
    }
}

/// What a successful run reports back.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub best: EvalRecord,
    pub evaluations: u64,
    pub records: usize,
}

#[derive(Serialize)]
struct BestSummary<'a> {
    record: &'a EvalRecord,
    vine: VineJson,
}

/// Content of result.json. Wall-clock time goes to timing.json so that this
/// file depends on the configuration and seed only.
#[derive(Serialize)]
struct RunReport<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: &'a RunConfig,
    evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    best: Option<BestSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    greedy: Option<&'a GreedyTrace>,
    /// Winning relabeling of a restarted search, 1-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation: Option<Vec<usize>>,
    structures: &'a [Vec<Vec<usize>>],
    records: &'a [EvalRecord],
}

#[derive(Serialize)]
struct Timing {
    wall_clock_seconds: f64,
    evaluations: u64,
    threads: usize,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_vec_pretty(value).expect("outputs serialize");
    text.push(b'\n');
    write_file(path, &text)
}

fn output_dir(resolved: &Resolved) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(resolved.config.output.as_deref().unwrap_or(config::DEFAULT_OUTPUT));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn search(resolved: &Resolved, progress: worstdep::search::Progress<'_>) -> Result<SearchResult, CliError> {
    let c = &resolved.config;
    let problem = resolved.problem()?;
    let space = &resolved.space;
    let result = match c.algorithm {
        Algorithm::Grid => {
            let grid = search_grid(space, c.search.grid_size, c.seed)?;
            grid_search_min(&problem, space, &grid, Some(progress))?
        }
        Algorithm::PermutedGrid => {
            let grid = search_grid(space, c.search.grid_size, c.seed)?;
            permuted_restarts(&problem, space, &grid, c.restarts, Some(progress))?
        }
        Algorithm::Greedy => greedy_search(&problem, space, &c.greedy, Some(progress))?,
    };
    Ok(result)
}

/// Runs the configured search and writes result.json, records.csv,
/// vine.json, events.jsonl, timing.json and, for greedy runs, trace.csv.
/// On failure the records finished so far are written with a failure marker
/// before the error is returned.
pub fn run(resolved: &Resolved) -> Result<RunOutcome, CliError> {
    let dir = output_dir(resolved)?;
    let events_path = dir.join("events.jsonl");
    let events = Mutex::new(BufWriter::new(File::create(&events_path).map_err(io_err(&events_path))?));
    let finished = Mutex::new(Vec::<EvalRecord>::new());
    let sink = |event: &ProgressEvent<'_>| {
        if let ProgressEvent::Point(r) = event {
            finished.lock().expect("records lock").push((*r).clone());
        }
        let mut w = events.lock().expect("events lock");
        // A broken event log must not abort the search; the flush below
        // reports persistent write errors.
        let _ = serde_json::to_writer(&mut *w, event).map(|_| w.write_all(b"\n"));
    };
    let start = Instant::now();
    let outcome = search(resolved, &sink);
    let elapsed = start.elapsed().as_secs_f64();
    events.into_inner().expect("events lock").flush().map_err(io_err(&events_path))?;

    let result = match outcome {
        Ok(result) => result,
        Err(err) => {
            let records = finished.into_inner().expect("records lock");
            let message = err.to_string();
            write_file(&dir.join("records.csv"), output::records_csv(&records, Some(&message)).as_bytes())?;
            let report = RunReport {
                status: "failed",
                error: Some(message),
                config: &resolved.config,
                evaluations: records.iter().map(|r| r.evaluations).sum(),
                best: None,
                greedy: None,
                permutation: None,
                structures: &[],
                records: &records,
            };
            write_json(&dir.join("result.json"), &report)?;
            return Err(err);
        }
    };

    let best = result.best_record();
    let vine = result.best_model.to_json()?;
    write_file(&dir.join("records.csv"), output::records_csv(&result.records, None).as_bytes())?;
    write_json(&dir.join("vine.json"), &vine)?;
    if let Some(trace) = &result.greedy {
        write_file(&dir.join("trace.csv"), output::trace_csv(trace).as_bytes())?;
    }
    let report = RunReport {
        status: "ok",
        error: None,
        config: &resolved.config,
        evaluations: result.evaluations,
        best: Some(BestSummary { record: best, vine }),
        greedy: result.greedy.as_ref(),
        permutation: result.permutation.as_ref().map(|p| p.iter().map(|v| v + 1).collect()),
        structures: &result.structures,
        records: &result.records,
    };
    write_json(&dir.join("result.json"), &report)?;
    let timing = Timing { wall_clock_seconds: elapsed, evaluations: result.evaluations, threads: rayon::current_num_threads() };
    write_json(&dir.join("timing.json"), &timing)?;
    Ok(RunOutcome { directory: dir, best: best.clone(), evaluations: result.evaluations, records: result.records.len() })
}

/// Quantile curve of the configured single free pair, over the curve taus
/// (41 levels across the pair's bounds unless configured) and families.
pub fn curve(resolved: &Resolved) -> Result<Vec<CurveRow>, CliError> {
    if resolved.space.free.len() != 1 {
        return Err(CliError::Usage(format!(
            "a curve needs exactly one free pair in search.pairs, got {}",
            resolved.space.free.len()
        )));
    }
    let mut config = resolved.config.clone();
    if config.curve.is_none() {
        config.curve = Some(config::CurveConfig::default());
    }
    let resolved = config.resolve()?;
    let curve = resolved.config.curve.as_ref().expect("materialized above");
    let mut space = resolved.space.clone();
    space.families = curve.families.clone().expect("materialized by resolve");
    let taus = curve.taus.clone().expect("materialized by resolve");
    let problem = resolved.problem()?;
    Ok(quantile_curve(&problem, &space, &taus)?)
}

/// Writes curve.csv into the output directory and returns its path.
pub fn write_curve(resolved: &Resolved) -> Result<PathBuf, CliError> {
    let rows = curve(resolved)?;
    let path = output_dir(resolved)?.join("curve.csv");
    write_file(&path, output::curve_csv(&rows).as_bytes())?;
    Ok(path)
}
