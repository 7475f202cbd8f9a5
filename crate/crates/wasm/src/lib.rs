//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The plain functions below the
//! bindings hold the logic and are tested natively.

use icos::baseline::{ransac_registration, ransac_rotation, RansacParams};
use icos::metrics::{evaluate, SuccessCriteria};
use icos::rng::derive_seed;
use icos::samplers::{icos_solve, IcosParams, Problem, SolveReport};
use icos::synth::{gen_registration_instance, gen_rotation_instance, Instance, ScaleMode, SourceCloud};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Solve one random instance with ICOS and RANSAC and return both results
/// alongside the correspondences, for drawing.
#[wasm_bindgen]
pub fn solve_random(problem: &str, n: usize, sigma: f64, outlier_ratio: f64, seed: u64) -> Result<String, JsValue> {
    demo_solve(problem, n, sigma, outlier_ratio, seed).map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Success rate of ICOS and RANSAC over `runs` instances per outlier ratio.
#[wasm_bindgen]
pub fn outlier_sweep(
    problem: &str,
    n: usize,
    sigma: f64,
    ratios: &[f64],
    runs: u32,
    seed: u64,
) -> Result<String, JsValue> {
    demo_sweep(problem, n, sigma, ratios, runs, seed).map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Iteration budget for `x` clean samples of size `sample_size`.
#[wasm_bindgen]
pub fn iteration_budget(x: u32, confidence: f64, outlier_ratio: f64, sample_size: u32) -> Result<f64, JsValue> {
    icos::samplers::max_iterations(x as u64, confidence, outlier_ratio, sample_size)
        .map(|v| v as f64)
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

pub const RANSAC_ITERATIONS: u64 = 1000;
/// Keeps hopeless settings (fewer true inliers than a solve needs) from
/// freezing the page.
pub const DEMO_MAX_RESTARTS: usize = 2000;

pub fn parse_problem(name: &str) -> Result<Problem, String> {
    match name {
        "rotation" => Ok(Problem::RotationSearch),
        "known-scale" => Ok(Problem::KnownScaleRegistration),
        "unknown-scale" => Ok(Problem::UnknownScaleRegistration),
        _ => Err(format!("unknown problem {name:?}")),
    }
}

fn instance(problem: Problem, n: usize, sigma: f64, ratio: f64, seed: u64) -> Result<Instance, String> {
    let r = match problem {
        Problem::RotationSearch => gen_rotation_instance(n, sigma, ratio, seed),
        Problem::KnownScaleRegistration => {
            gen_registration_instance(n, sigma, ratio, ScaleMode::Fixed(1.0), seed, SourceCloud::UnitCube)
        }
        Problem::UnknownScaleRegistration => {
            gen_registration_instance(n, sigma, ratio, ScaleMode::Range(1.0, 5.0), seed, SourceCloud::UnitCube)
        }
    };
    r.map_err(|e| e.to_string())
}

fn run_both(inst: &Instance, problem: Problem, seed: u64) -> Result<[SolveReport; 2], String> {
    let sigma = inst.truth.sigma;
    let mut params = IcosParams::for_problem(problem, sigma, inst.set.len()).with_seed(seed);
    params.max_restarts = DEMO_MAX_RESTARTS;
    let ours = icos_solve(&inst.set, &params, problem).map_err(|e| e.to_string())?;
    let rp = RansacParams::with_iterations(sigma, RANSAC_ITERATIONS).with_seed(seed);
    let theirs = match problem {
        Problem::RotationSearch => ransac_rotation(&inst.set, &rp),
        Problem::KnownScaleRegistration => ransac_registration(&inst.set, &rp, true),
        Problem::UnknownScaleRegistration => ransac_registration(&inst.set, &rp, false),
    }
    .map_err(|e| e.to_string())?;
    Ok([ours, theirs])
}

fn summary(report: &SolveReport, inst: &Instance) -> Value {
    let mut v = report.to_json(true);
    v["errors"] = json!(evaluate(report, &inst.truth));
    v
}

pub fn demo_solve(problem: &str, n: usize, sigma: f64, ratio: f64, seed: u64) -> Result<Value, String> {
    let problem = parse_problem(problem)?;
    let inst = instance(problem, n, sigma, ratio, seed)?;
    let [ours, theirs] = run_both(&inst, problem, seed)?;
    let pts = |f: fn(&icos::geometry::Correspondence) -> icos::geometry::Vec3| -> Vec<[f64; 3]> {
        inst.set
            .iter()
            .map(|c| {
                let p = f(c);
                [p.x, p.y, p.z]
            })
            .collect()
    };
    Ok(json!({
        "problem": problem.name(),
        "src": pts(|c| c.src),
        "dst": pts(|c| c.dst),
        "inlier_mask": inst.truth.inlier_mask,
        "icos": summary(&ours, &inst),
        "ransac": summary(&theirs, &inst),
    }))
}

pub fn demo_sweep(problem: &str, n: usize, sigma: f64, ratios: &[f64], runs: u32, seed: u64) -> Result<Value, String> {
    let problem = parse_problem(problem)?;
    if runs == 0 {
        return Err("runs must be at least 1".into());
    }
    let criteria = SuccessCriteria::rotation(1.0);
    let mut rows = Vec::new();
    for (ri, &ratio) in ratios.iter().enumerate() {
        let mut wins = [0u32; 2];
        let mut time = [0f64; 2];
        for run in 0..runs as u64 {
            let cell = derive_seed(seed, ri as u64, run);
            let inst = instance(problem, n, sigma, ratio, cell)?;
            for (k, rep) in run_both(&inst, problem, cell)?.iter().enumerate() {
                wins[k] += criteria.accepts(&evaluate(rep, &inst.truth)) as u32;
                time[k] += rep.elapsed.as_secs_f64();
            }
        }
        let runs = runs as f64;
        rows.push(json!({
            "outlier_ratio": ratio,
            "icos_success": wins[0] as f64 / runs,
            "ransac_success": wins[1] as f64 / runs,
            "icos_mean_s": time[0] / runs,
            "ransac_mean_s": time[1] / runs,
        }));
    }
    Ok(json!({ "problem": problem.name(), "ransac_iterations": RANSAC_ITERATIONS, "rows": rows }))
}
