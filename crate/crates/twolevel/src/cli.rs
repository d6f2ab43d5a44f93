//! Command-line interface: simulation paths, deterministic-limit snapshots,
//! tail classification, studies, and closed-form oracle output.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical-resolution error,
//! 3 failed study verdict.

use crate::harness::{self, HarnessError, StudyConfig};
use crate::limit::{self, ExampleParams, LimitError, LimitParams};
use crate::measures::Measure;
use crate::moran::{self, ChainParams};
use crate::spec_lang::{parse_measure, parse_observable};
use crate::testfn::TestFunction;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::io::Write as _;
use std::path::PathBuf;

pub const OUT_DIR_ENV: &str = "TWOLEVEL_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "twolevel", about = "Two-level Moran process and its limits", version)]
pub struct Cli {
    /// Output directory (default: $TWOLEVEL_OUT_DIR, else current directory)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Master seed override (wins over config files, with a notice)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Verbosity (-v per-rung logs)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one chain path and write it as CSV
    Simulate(SimulateArgs),
    /// Evolve the deterministic limit and write snapshots as JSON
    Solve(SolveArgs),
    /// Classify the long-time limit of an initial measure
    Classify(ClassifyArgs),
    /// Run a configured study (CSV + JSON manifest)
    Study(StudyArgs),
    /// Print the closed-form reference solution of a worked example
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub w: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    /// Initial measure (mini-language)
    #[arg(long, default_value = "uniform")]
    pub initial: String,
    /// Comma-separated observables, e.g. x,x^2
    #[arg(long, default_value = "x,x^2")]
    pub observables: String,
    /// Number of equally spaced sample times
    #[arg(long, default_value_t = 51)]
    pub samples: usize,
    /// Clock factor: record time as chain time / factor (1 = unscaled)
    #[arg(long, default_value_t = 1.0)]
    pub time_factor: f64,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub initial: String,
    #[arg(long)]
    pub lambda: f64,
    /// Comma-separated times, e.g. 0,1,10
    #[arg(long)]
    pub times: String,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub initial: String,
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// StudyConfig TOML path
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub example: u8,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Resolution(String),
    StudyFailed,
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<LimitError> for CliError {
    fn from(e: LimitError) -> Self {
        match e {
            LimitError::Resolution { .. } => CliError::Resolution(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Limit(LimitError::Resolution { .. }) => {
                CliError::Resolution(e.to_string())
            }
            HarnessError::Io(io) => CliError::Io(io),
            other => CliError::Validation(other.to_string()),
        }
    }
}

macro_rules! validation_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}
validation_from!(
    crate::spec_lang::ParseError,
    crate::moran::ChainError,
    crate::measures::MeasureError
);

/// Run a parsed invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(CliError::Resolution(msg)) => {
            eprintln!("numerical resolution error: {msg}");
            2
        }
        Err(CliError::StudyFailed) => {
            eprintln!("study verdict: FAIL");
            3
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Solve(args) => solve(cli, args),
        Command::Classify(args) => classify(args),
        Command::Study(args) => study(cli, args),
        Command::Oracle(args) => oracle(args),
    }
}

fn parse_list(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad value in `{key}`: `{t}`: {e}")))
        })
        .collect()
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let params = ChainParams::new(args.m, args.n, args.s, args.r, args.w, args.time_factor)?;
    let mu0 = parse_measure(&args.initial)?.build(Some(params.lambda()).filter(|l| l.is_finite()))?;
    let lattice = crate::measures::GridMeasure::from_measure(&mu0, args.n);
    let fs: Result<Vec<TestFunction>, _> = args
        .observables
        .split(',')
        .map(|o| parse_observable(o))
        .collect();
    let fs = fs?;
    if args.samples < 2 {
        return Err(CliError::Validation("samples must be >= 2".into()));
    }
    let times: Vec<f64> = (0..args.samples)
        .map(|i| args.horizon * i as f64 / (args.samples - 1) as f64)
        .collect();
    let seed = cli.seed.unwrap_or(0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let path = moran::simulate(&lattice, &params, args.horizon, &fs, &times, &mut rng)?;

    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir)?;
    let file_path = dir.join("path.csv");
    let mut file = std::fs::File::create(&file_path)?;
    let mut header = String::from("time");
    for name in &path.observable_names {
        header.push_str(&format!(",{name},drift_int[{name}],qv_int[{name}]"));
    }
    writeln!(file, "{header}")?;
    for (k, &t) in path.sample_times.iter().enumerate() {
        let mut line = format!("{t}");
        for i in 0..path.observable_names.len() {
            line.push_str(&format!(
                ",{},{},{}",
                path.values[i][k], path.drift_integrals[i][k], path.qv_integrals[i][k]
            ));
        }
        writeln!(file, "{line}")?;
    }
    println!("wrote {}", file_path.display());
    if cli.verbose > 0 {
        println!(
            "events: {}, absorbed: {:?}",
            path.event_count, path.absorbed_at
        );
    }
    Ok(())
}

fn solve(cli: &Cli, args: &SolveArgs) -> Result<(), CliError> {
    let lp = LimitParams::new(args.lambda)?;
    let mu0 = parse_measure(&args.initial)?.build(Some(args.lambda))?;
    let times = parse_list("times", &args.times)?;
    let mut snapshots = Vec::new();
    for &t in &times {
        let state = limit::evolve(&mu0, &lp, t)?;
        let mean = state.measure.mean();
        println!("t = {t}: mean = {mean:.6}");
        snapshots.push(serde_json::json!({
            "t": t,
            "mean": mean,
            "measure": state.measure,
        }));
    }
    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir)?;
    let file_path = dir.join("solve.json");
    std::fs::write(
        &file_path,
        serde_json::to_string_pretty(&snapshots).expect("snapshot serialization"),
    )?;
    println!("wrote {}", file_path.display());
    Ok(())
}

fn classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let lp = LimitParams::new(args.lambda)?;
    let mu0 = parse_measure(&args.initial)?.build(Some(args.lambda))?;
    let tail = limit::tail_of(&mu0)?;
    let verdict = limit::classify_longtime(&tail, &lp);
    let out = serde_json::json!({
        "lambda": args.lambda,
        "tail": tail,
        "verdict": verdict,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("verdict serialization"));
    Ok(())
}

fn study(cli: &Cli, args: &StudyArgs) -> Result<(), CliError> {
    let mut cfg = StudyConfig::from_path(&args.config)?;
    if let Some(seed) = cli.seed {
        if seed != cfg.seed {
            eprintln!("notice: --seed {seed} overrides config seed {}", cfg.seed);
        }
        cfg.seed = seed;
    }
    let result = harness::run_study(&cfg)?;
    for (i, row) in result.rows.iter().enumerate() {
        let stats: Vec<String> = row
            .stats
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect();
        println!(
            "rung {i}: {} [{}]",
            stats.join(" "),
            if row.pass { "ok" } else { "FAIL" }
        );
    }
    for warn in &result.warnings {
        eprintln!("warning: {warn}");
    }
    let dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| out_dir(cli));
    let stem = format!("{:?}", cfg.kind).to_lowercase();
    result.persist(&cfg, &dir, &stem)?;
    println!("wrote {}/{stem}.csv and {stem}.json", dir.display());
    if result.passed {
        Ok(())
    } else {
        Err(CliError::StudyFailed)
    }
}

fn oracle(args: &OracleArgs) -> Result<(), CliError> {
    let lp = LimitParams::new(args.lambda)?;
    let ex = ExampleParams {
        x0: args.x0,
        c: args.c,
        alpha: args.alpha,
        a: args.a,
    };
    let mu = limit::reference_solution(args.example, &lp, &ex, args.t)?;
    let out = serde_json::json!({
        "example": args.example,
        "lambda": args.lambda,
        "t": args.t,
        "mean": mu.mean(),
        "measure": mu,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("oracle serialization"));
    Ok(())
}
