//! One-shot solving of a dump or a PLY pair with an index-pair file.

use std::path::Path;

use icos::geometry::{CorrespondenceKind, CorrespondenceSet, Vec3};
use icos::metrics::evaluate;
use icos::samplers::Problem;
use icos::synth::Instance;

use crate::bench::run_solver;
use crate::config::{CliError, CliResult, Overrides, Solver};

/// One `i j` pair per line; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, n_src: usize, n_dst: usize) -> CliResult<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |why: &str| CliError::Io(format!("unsupported format: pairs line {}: {why}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [i, j] = fields[..] else {
            return Err(bad("expected two indices"));
        };
        let i: usize = i.parse().map_err(|_| bad("not an index"))?;
        let j: usize = j.parse().map_err(|_| bad("not an index"))?;
        if i >= n_src || j >= n_dst {
            return Err(bad("index out of range"));
        }
        pairs.push((i, j));
    }
    Ok(pairs)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn set_from_clouds(
    problem: Problem,
    src: &[Vec3],
    dst: &[Vec3],
    pairs: &[(usize, usize)],
) -> CliResult<CorrespondenceSet> {
    Ok(CorrespondenceSet::new(problem.kind(), pairs.iter().map(|&(i, j)| (src[i], dst[j])))?)
}

/// The dump's kind fixes vector or point pairs; point pairs default to
/// unknown-scale registration.
pub fn default_problem(kind: CorrespondenceKind) -> Problem {
    match kind {
        CorrespondenceKind::VectorPairs => Problem::RotationSearch,
        CorrespondenceKind::PointPairs => Problem::UnknownScaleRegistration,
    }
}

pub fn solve_json(
    solver: Solver,
    set: &CorrespondenceSet,
    problem: Problem,
    sigma: f64,
    seed: u64,
    ov: &Overrides,
    truth: Option<&Instance>,
) -> CliResult<serde_json::Value> {
    if set.kind() != problem.kind() {
        return Err(CliError::Config(format!("{} cannot be solved from {:?}", problem.name(), set.kind())));
    }
    let report = run_solver(solver, set, problem, sigma, seed, ov)?;
    let mut out = report.to_json(true);
    out["solver"] = solver.name().into();
    if let Some(inst) = truth {
        out["errors"] = serde_json::to_value(evaluate(&report, &inst.truth)).expect("metrics serialize");
    }
    Ok(out)
}
