//! Monte-Carlo benchmark: one instance per (ratio, run) cell, every solver
//! on the same instance, rows in (ratio, run, solver) order.

use std::io::Write;
use std::path::{Path, PathBuf};

use icos::baseline::{ransac_registration, ransac_rotation};
use icos::geometry::{CorrespondenceSet, Vec3};
use icos::metrics::{BenchRecord, SuccessCriteria, BENCH_SCHEMA_VERSION};
use icos::rng::derive_seed;
use icos::samplers::{icos_solve, Problem, SolveReport};
use icos::synth::{gen_registration_instance, gen_rotation_instance, Instance, ScaleMode, SourceCloud};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CliError, CliResult, Overrides, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub problem: Problem,
    pub n: usize,
    pub sigma: f64,
    pub ratios: Vec<f64>,
    pub runs: u64,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    pub scale: ScaleMode,
    pub cloud: Option<Vec<Vec3>>,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub fn run_solver(
    solver: Solver,
    set: &CorrespondenceSet,
    problem: Problem,
    sigma: f64,
    seed: u64,
    ov: &Overrides,
) -> CliResult<SolveReport> {
    let report = match solver {
        Solver::Icos => icos_solve(set, &ov.icos(problem, sigma, set.len())?.with_seed(seed), problem)?,
        _ => {
            let p = ov.ransac(solver, sigma)?.with_seed(seed);
            match problem {
                Problem::RotationSearch => ransac_rotation(set, &p)?,
                Problem::KnownScaleRegistration => ransac_registration(set, &p, true)?,
                Problem::UnknownScaleRegistration => ransac_registration(set, &p, false)?,
            }
        }
    };
    Ok(report)
}

pub fn generate(
    problem: Problem,
    n: usize,
    sigma: f64,
    ratio: f64,
    scale: ScaleMode,
    cloud: Option<&[Vec3]>,
    seed: u64,
) -> CliResult<Instance> {
    let inst = match problem {
        Problem::RotationSearch => gen_rotation_instance(n, sigma, ratio, seed)?,
        _ => {
            let source = cloud.map_or(SourceCloud::UnitCube, SourceCloud::Points);
            gen_registration_instance(n, sigma, ratio, scale, seed, source)?
        }
    };
    Ok(inst)
}

/// Mean and median of every error column, per (ratio, solver).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub problem: &'static str,
    pub ratio_index: usize,
    pub outlier_ratio: f64,
    pub solver: String,
    pub runs: usize,
    pub success_rate: f64,
    pub converged_rate: f64,
    pub mean_rotation_deg: f64,
    pub median_rotation_deg: f64,
    pub mean_translation: f64,
    pub median_translation: f64,
    pub mean_scale: f64,
    pub median_scale: f64,
    pub mean_recall: f64,
    pub median_recall: f64,
    pub mean_precision: f64,
    pub median_precision: f64,
    pub mean_runtime_s: f64,
    pub median_runtime_s: f64,
}

fn mean_median(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
    (mean, median)
}

pub fn aggregate(rows: &[BenchRecord], ratios: &[f64], solvers: &[Solver]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for (ri, &ratio) in ratios.iter().enumerate() {
        for solver in solvers {
            let name = solver.name();
            let cell: Vec<&BenchRecord> = rows.iter().filter(|r| r.ratio_index == ri && r.solver == name).collect();
            let Some(first) = cell.first() else { continue };
            let k = cell.len() as f64;
            let stat = |f: fn(&BenchRecord) -> f64| mean_median(cell.iter().map(|r| f(r)));
            let (mean_rotation_deg, median_rotation_deg) = stat(|r| r.rotation_deg);
            let (mean_translation, median_translation) = stat(|r| r.translation);
            let (mean_scale, median_scale) = stat(|r| r.scale);
            let (mean_recall, median_recall) = stat(|r| r.recall);
            let (mean_precision, median_precision) = stat(|r| r.precision);
            let (mean_runtime_s, median_runtime_s) = stat(|r| r.runtime_s);
            out.push(Aggregate {
                schema_version: BENCH_SCHEMA_VERSION,
                problem: first.problem,
                ratio_index: ri,
                outlier_ratio: ratio,
                solver: name,
                runs: cell.len(),
                success_rate: cell.iter().filter(|r| r.success).count() as f64 / k,
                converged_rate: cell.iter().filter(|r| r.status == "converged").count() as f64 / k,
                mean_rotation_deg,
                median_rotation_deg,
                mean_translation,
                median_translation,
                mean_scale,
                median_scale,
                mean_recall,
                median_recall,
                mean_precision,
                median_precision,
                mean_runtime_s,
                median_runtime_s,
            });
        }
    }
    out
}

fn run_cell(cfg: &BenchConfig, criteria: &SuccessCriteria, ri: usize, run: u64) -> CliResult<Vec<BenchRecord>> {
    let seed = derive_seed(cfg.seed, ri as u64, run);
    let inst = generate(cfg.problem, cfg.n, cfg.sigma, cfg.ratios[ri], cfg.scale, cfg.cloud.as_deref(), seed)?;
    cfg.solvers
        .iter()
        .map(|&solver| {
            let report = run_solver(solver, &inst.set, cfg.problem, cfg.sigma, seed, &cfg.overrides)?;
            Ok(BenchRecord::new(&inst, ri, run, &solver.name(), &report, criteria))
        })
        .collect()
}

/// Runs every cell, in parallel, and returns rows in deterministic order.
pub fn run_benchmark(cfg: &BenchConfig) -> CliResult<Vec<BenchRecord>> {
    // Fail on bad parameters before spending time on any cell.
    for &solver in &cfg.solvers {
        match solver {
            Solver::Icos => {
                let p = cfg.overrides.icos(cfg.problem, cfg.sigma, cfg.n)?;
                let need = p.min_inliers + cfg.problem.seed_size();
                if cfg.n < need {
                    return Err(CliError::Config(format!("icos needs n >= {need}, got {}", cfg.n)));
                }
            }
            _ => {
                cfg.overrides.ransac(solver, cfg.sigma)?;
            }
        }
    }
    if cfg.runs == 0 {
        return Err(CliError::Config("runs must be at least 1".into()));
    }
    let criteria = cfg.overrides.success();
    let cells: Vec<(usize, u64)> =
        (0..cfg.ratios.len()).flat_map(|ri| (0..cfg.runs).map(move |run| (ri, run))).collect();
    let per_cell: Vec<Vec<BenchRecord>> =
        cells.par_iter().map(|&(ri, run)| run_cell(cfg, &criteria, ri, run)).collect::<CliResult<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// A closed pipe (`icos ... | head`) is not an error.
pub fn write_stdout(bytes: &[u8]) -> CliResult<()> {
    match std::io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `results.csv` pairs with `results.summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// CSV: rows to `--out` (or stdout) and aggregates to the summary file (or
/// stderr). JSON: one document holding both.
pub fn write_results(cfg: &BenchConfig, rows: &[BenchRecord]) -> CliResult<()> {
    let aggregates = aggregate(rows, &cfg.ratios, &cfg.solvers);
    match cfg.format {
        Format::Csv => {
            let rows_csv = csv_bytes(rows)?;
            let agg_csv = csv_bytes(&aggregates)?;
            match &cfg.out {
                Some(path) => {
                    write_file(path, &rows_csv)?;
                    write_file(&summary_path(path), &agg_csv)?;
                }
                None => {
                    write_stdout(&rows_csv)?;
                    std::io::stderr().write_all(&agg_csv).map_err(|e| CliError::Io(format!("stderr: {e}")))?;
                }
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "schema_version": BENCH_SCHEMA_VERSION,
                "problem": cfg.problem.name(),
                "n": cfg.n,
                "sigma": cfg.sigma,
                "seed": cfg.seed,
                "runs": cfg.runs,
                "rows": rows,
                "aggregates": aggregates,
            });
            let text = serde_json::to_string_pretty(&doc).expect("results serialize") + "\n";
            match &cfg.out {
                Some(path) => write_file(path, text.as_bytes())?,
                None => write_stdout(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_median() {
        assert_eq!(mean_median([3.0, 1.0, 2.0].into_iter()), (2.0, 2.0));
        assert_eq!(mean_median([4.0, 1.0, 2.0, 9.0].into_iter()), (4.0, 3.0));
        assert!(mean_median(std::iter::empty()).0.is_nan());
    }

    #[test]
    fn summary_sits_next_to_output() {
        assert_eq!(summary_path(Path::new("/tmp/r/out.csv")), PathBuf::from("/tmp/r/out.summary.csv"));
    }

    #[test]
    fn rows_are_ordered_and_shared_per_cell() {
        let cfg = BenchConfig {
            problem: Problem::RotationSearch,
            n: 40,
            sigma: 0.01,
            ratios: vec![0.0, 0.5],
            runs: 3,
            seed: 7,
            solvers: vec![Solver::Icos, Solver::RansacIterations(200)],
            scale: ScaleMode::Fixed(1.0),
            cloud: None,
            overrides: Overrides::default(),
            out: None,
            format: Format::Csv,
        };
        let rows = run_benchmark(&cfg).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<(usize, u64, &str)> = rows.iter().map(|r| (r.ratio_index, r.run, r.solver.as_str())).collect();
        let mut sorted = keys.clone();
        sorted.sort_by_key(|&(ri, run, s)| (ri, run, s != "icos"));
        assert_eq!(keys, sorted);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].seed, pair[1].seed);
        }
        let agg = aggregate(&rows, &cfg.ratios, &cfg.solvers);
        assert_eq!(agg.len(), 4);
        assert!(agg.iter().all(|a| a.runs == 3));
    }
}
