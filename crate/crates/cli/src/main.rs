// Negated comparisons are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bench;
mod config;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icos::instance;
use icos::ply::load_ply;
use icos::samplers::Problem;
use icos::synth::ScaleMode;

use bench::{generate, run_benchmark, write_results, BenchConfig, Format};
use config::{parse_problem, parse_ratios, parse_scale, parse_solver, parse_solvers, registration_problem};
use config::{CliError, CliResult, Overrides, OVERRIDE_KEYS};

#[derive(Parser, Debug)]
#[command(name = "icos", version, about = "Outlier-robust rotation search and point-cloud registration")]
#[command(after_help = "Environment: ICOS_THREADS caps the number of benchmark cells run in parallel.\n\
Exit codes: 0 success, 2 configuration error, 3 I/O or format error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rotation search on random unit vectors.
    BenchRotation(BenchArgs),
    /// Registration; `--scale fixed` solves with known unit scale.
    BenchRegistration(BenchArgs),
    /// Unknown-scale registration with the scale drawn from `--scale range`.
    BenchScale(BenchArgs),
    /// Solve one instance dump, or two PLY clouds with an index-pair file.
    Solve(SolveArgs),
    /// Write a synthetic instance as a JSON dump.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn override_help() -> String {
    let keys: Vec<String> = OVERRIDE_KEYS.iter().map(|(k, d)| format!("  {k}: {d}")).collect();
    format!("Parameter override, repeatable. Keys:\n{}", keys.join("\n"))
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// `start:step:end` or a comma-separated list, within [0, 0.99].
    #[arg(long, default_value = "0:0.1:0.9")]
    outlier_ratios: String,
    #[arg(long, default_value_t = 50)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated: icos, ransac-<iterations>, ransac-<seconds>s, ransac-time.
    #[arg(long, default_value = "icos,ransac-1000")]
    solvers: String,
    /// `fixed [s]` or `range lo hi`.
    #[arg(long, num_args = 1..=3, value_names = ["MODE", "LO", "HI"])]
    scale: Option<Vec<String>>,
    /// Registration source cloud (PLY) instead of the unit cube.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long = "override", value_name = "KEY=VALUE", long_help = override_help())]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// JSON dump written by `icos synth`.
    #[arg(long, conflicts_with_all = ["src", "dst", "pairs"])]
    instance: Option<PathBuf>,
    #[arg(long, requires_all = ["dst", "pairs"])]
    src: Option<PathBuf>,
    #[arg(long)]
    dst: Option<PathBuf>,
    /// One `i j` line per correspondence: src vertex i matches dst vertex j.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// rotation, known-scale or unknown-scale. Defaults from the dump kind.
    #[arg(long)]
    problem: Option<String>,
    /// Noise level. Defaults to the dump's sigma.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "icos")]
    solver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE", long_help = override_help())]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// rotation, known-scale or unknown-scale.
    #[arg(long, default_value = "rotation")]
    problem: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_ratio: f64,
    /// `fixed [s]` or `range lo hi`; unknown-scale defaults to `range 1 5`.
    #[arg(long, num_args = 1..=3, value_names = ["MODE", "LO", "HI"])]
    scale: Option<Vec<String>>,
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ICOS_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => builder = builder.num_threads(k),
            _ => return Err(CliError::Config(format!("ICOS_THREADS must be a positive integer, got {v:?}"))),
        }
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

fn bench(command: &Command, a: &BenchArgs) -> CliResult<()> {
    let scale = a.scale.as_deref().map(parse_scale).transpose()?;
    let (problem, scale, default_n) = match command {
        Command::BenchRotation(_) => {
            if scale.is_some() || a.cloud.is_some() {
                return Err(CliError::Config("bench-rotation takes no --scale or --cloud".into()));
            }
            (Problem::RotationSearch, ScaleMode::Fixed(1.0), 100)
        }
        Command::BenchRegistration(_) => {
            let scale = scale.unwrap_or(ScaleMode::Fixed(1.0));
            (registration_problem(scale), scale, 1000)
        }
        _ => (Problem::UnknownScaleRegistration, scale.unwrap_or(ScaleMode::Range(1.0, 5.0)), 100),
    };
    let overrides = Overrides::parse(&a.overrides)?;
    let cfg = BenchConfig {
        problem,
        n: a.n.unwrap_or(default_n),
        sigma: a.sigma,
        ratios: parse_ratios(&a.outlier_ratios)?,
        runs: a.runs,
        seed: a.seed,
        solvers: parse_solvers(&a.solvers, &overrides)?,
        scale,
        cloud: a.cloud.as_ref().map(load_ply).transpose()?,
        overrides,
        out: a.out.clone(),
        format: match a.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
    };
    let rows = thread_pool()?.install(|| run_benchmark(&cfg))?;
    write_results(&cfg, &rows)
}

fn write_output(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => bench::write_stdout(format!("{text}\n").as_bytes()),
    }
}

fn solve(a: &SolveArgs) -> CliResult<()> {
    let overrides = Overrides::parse(&a.overrides)?;
    let solver = parse_solver(&a.solver, &overrides)?;
    let problem = a.problem.as_deref().map(parse_problem).transpose()?;
    let result = if let Some(path) = &a.instance {
        let inst = instance::load(path)?;
        let problem = problem.unwrap_or(solve::default_problem(inst.set.kind()));
        let sigma = a.sigma.unwrap_or(inst.truth.sigma);
        solve::solve_json(solver, &inst.set, problem, sigma, a.seed, &overrides, Some(&inst))?
    } else {
        let (Some(src), Some(dst), Some(pairs)) = (&a.src, &a.dst, &a.pairs) else {
            return Err(CliError::Config("solve needs --instance, or --src, --dst and --pairs".into()));
        };
        let (Some(problem), Some(sigma)) = (problem, a.sigma) else {
            return Err(CliError::Config("PLY input needs --problem and --sigma".into()));
        };
        let (src, dst) = (load_ply(src)?, load_ply(dst)?);
        let pairs = solve::parse_pairs(&solve::read_text(pairs)?, src.len(), dst.len())?;
        let set = solve::set_from_clouds(problem, &src, &dst, &pairs)?;
        solve::solve_json(solver, &set, problem, sigma, a.seed, &overrides, None)?
    };
    write_output(a.out.as_ref(), &serde_json::to_string_pretty(&result).expect("report serializes"))
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let problem = parse_problem(&a.problem)?;
    let scale = match (&a.scale, problem) {
        (Some(_), Problem::RotationSearch) => return Err(CliError::Config("rotation search takes no --scale".into())),
        (Some(words), _) => parse_scale(words)?,
        (None, Problem::UnknownScaleRegistration) => ScaleMode::Range(1.0, 5.0),
        (None, _) => ScaleMode::Fixed(1.0),
    };
    if problem == Problem::KnownScaleRegistration && scale != ScaleMode::Fixed(1.0) {
        return Err(CliError::Config("known-scale instances need --scale fixed 1".into()));
    }
    let cloud = a.cloud.as_ref().map(load_ply).transpose()?;
    let inst = generate(problem, a.n, a.sigma, a.outlier_ratio, scale, cloud.as_deref(), a.seed)?;
    write_output(a.out.as_ref(), &instance::to_json(&inst))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Synth(a) => synth(a),
        c @ (Command::BenchRotation(a) | Command::BenchRegistration(a) | Command::BenchScale(a)) => bench(c, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icos: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
