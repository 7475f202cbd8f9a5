//! Parsing of sweep, scale, solver and override arguments.

use std::fmt;
use std::time::Duration;

use icos::baseline::{RansacParams, DEFAULT_CONFIDENCE};
use icos::invariants::{inlier_threshold, NoiseBounds};
use icos::metrics::SuccessCriteria;
use icos::samplers::{IcosParams, Problem};
use icos::synth::ScaleMode;

/// Exit code 2.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code 3.
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<icos::error::Error> for CliError {
    fn from(e: icos::error::Error) -> Self {
        use icos::error::Error;
        match e {
            Error::Io { .. } | Error::UnsupportedFormat(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

pub const MAX_SWEEP_RATIO: f64 = 0.99;

/// `a:b:c` (start, step, end inclusive) or a comma-separated list.
pub fn parse_ratios(spec: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| -> CliResult<f64> {
        s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad outlier ratio {s:?}")))
    };
    let ratios = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, c] = parts[..] else {
            return config(format!("sweep must be start:step:end, got {spec:?}"));
        };
        let (a, b, c) = (num(a)?, num(b)?, num(c)?);
        if !(b > 0.0) || c < a {
            return config(format!("sweep {spec:?} needs a positive step and end >= start"));
        }
        // Computed per index and rounded, so 0:0.1:0.9 gives exactly 0.3, not
        // 0.30000000000000004.
        let steps = ((c - a) / b + 1e-9).floor() as usize;
        (0..=steps).map(|k| ((a + k as f64 * b) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(num).collect::<CliResult<Vec<_>>>()?
    };
    if ratios.is_empty() {
        return config("no outlier ratios given");
    }
    if let Some(r) = ratios.iter().find(|r| !(0.0..=MAX_SWEEP_RATIO).contains(*r)) {
        return config(format!("outlier ratio {r} outside [0, {MAX_SWEEP_RATIO}]"));
    }
    Ok(ratios)
}

/// `fixed [s]` or `range lo hi`.
pub fn parse_scale(words: &[String]) -> CliResult<ScaleMode> {
    let num = |s: &String| s.parse::<f64>().map_err(|_| CliError::Config(format!("bad scale value {s:?}")));
    let mode = match words {
        [m] if m == "fixed" => ScaleMode::Fixed(1.0),
        [m, s] if m == "fixed" => ScaleMode::Fixed(num(s)?),
        [m, lo, hi] if m == "range" => ScaleMode::Range(num(lo)?, num(hi)?),
        _ => return config(format!("--scale expects `fixed [s]` or `range lo hi`, got {words:?}")),
    };
    let ok = match mode {
        ScaleMode::Fixed(s) => s > 0.0 && s.is_finite(),
        ScaleMode::Range(lo, hi) => lo > 0.0 && hi > lo && hi.is_finite(),
    };
    if !ok {
        return config(format!("invalid scale {mode:?}"));
    }
    Ok(mode)
}

/// A fixed unit scale is solved as known-scale registration; anything else
/// needs the scale estimated.
pub fn registration_problem(scale: ScaleMode) -> Problem {
    match scale {
        ScaleMode::Fixed(1.0) => Problem::KnownScaleRegistration,
        _ => Problem::UnknownScaleRegistration,
    }
}

pub fn parse_problem(name: &str) -> CliResult<Problem> {
    match name {
        "rotation" | "rotation-search" => Ok(Problem::RotationSearch),
        "known-scale" => Ok(Problem::KnownScaleRegistration),
        "unknown-scale" => Ok(Problem::UnknownScaleRegistration),
        _ => config(format!("unknown problem {name:?}; expected rotation, known-scale or unknown-scale")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Icos,
    RansacIterations(u64),
    RansacTime(Duration),
}

impl Solver {
    pub fn name(&self) -> String {
        match self {
            Solver::Icos => "icos".into(),
            Solver::RansacIterations(k) => format!("ransac-{k}"),
            Solver::RansacTime(d) => format!("ransac-{}s", d.as_secs_f64()),
        }
    }
}

/// `icos`, `ransac-<iterations>`, `ransac-<seconds>s`, or `ransac-time`
/// (budget from the `ransac.time_s` override).
pub fn parse_solver(name: &str, ov: &Overrides) -> CliResult<Solver> {
    let name = name.trim();
    if name == "icos" {
        return Ok(Solver::Icos);
    }
    let Some(arg) = name.strip_prefix("ransac-") else {
        return config(format!("unknown solver {name:?}"));
    };
    let seconds = |s: f64| {
        if s > 0.0 && s.is_finite() {
            Ok(Solver::RansacTime(Duration::from_secs_f64(s)))
        } else {
            config(format!("bad RANSAC time budget in {name:?}"))
        }
    };
    if arg == "time" {
        return seconds(ov.ransac_time_s.unwrap_or(1.0));
    }
    if let Some(s) = arg.strip_suffix('s') {
        return seconds(s.parse().map_err(|_| CliError::Config(format!("bad solver {name:?}")))?);
    }
    match arg.parse::<u64>() {
        Ok(k) if k > 0 => Ok(Solver::RansacIterations(k)),
        _ => config(format!("bad solver {name:?}")),
    }
}

pub fn parse_solvers(list: &str, ov: &Overrides) -> CliResult<Vec<Solver>> {
    let solvers = list.split(',').map(|s| parse_solver(s, ov)).collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<String> = solvers.iter().map(Solver::name).collect();
    names.sort();
    names.dedup();
    if names.len() != solvers.len() {
        return config(format!("duplicate solver in {list:?}"));
    }
    Ok(solvers)
}

/// Documented `--override` keys.
pub const OVERRIDE_KEYS: &[(&str, &str)] = &[
    ("x", "ICOS: extensions to collect before solving"),
    ("max_itr1", "ICOS: seed draws per restart"),
    ("max_itr2", "ICOS: third-point draws of the known-scale seed"),
    ("max_itr3", "ICOS: extension draws per seed"),
    ("max_itr4", "ICOS: early-abort period"),
    ("max_restarts", "ICOS: restart cap"),
    ("confidence", "ICOS: confidence for budget_formula"),
    ("assumed_outlier_ratio", "ICOS: outlier ratio for budget_formula"),
    ("budget_formula", "ICOS: true derives itr caps from the iteration formula"),
    ("bound.L", "ICOS: length bound, multiple of sigma"),
    ("bound.G", "ICOS: vector residual bound, multiple of sigma"),
    ("bound.F", "ICOS: pair geodesic bound, multiple of sigma (radians)"),
    ("bound.A", "ICOS: scale bound, multiple of sigma"),
    ("bound.B", "ICOS: translation bound, multiple of sigma"),
    ("bound.C", "ICOS: point residual bound, multiple of sigma"),
    ("bound.D", "ICOS: triple geodesic bound, multiple of sigma (radians)"),
    ("ransac.confidence", "RANSAC: adaptive stopping confidence"),
    ("ransac.threshold", "RANSAC: absolute inlier threshold (default 5.2 sigma)"),
    ("ransac.time_s", "RANSAC: budget of the ransac-time solver in seconds"),
    ("success.rotation_deg", "benchmark success: rotation error below, degrees (default 1)"),
    ("success.translation", "benchmark success: translation error below"),
    ("success.scale", "benchmark success: scale error below"),
];

const BOUND_KEYS: [&str; 7] = ["L", "G", "F", "A", "B", "C", "D"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    x: Option<usize>,
    max_itr: [Option<usize>; 4],
    max_restarts: Option<usize>,
    confidence: Option<f64>,
    assumed_outlier_ratio: Option<f64>,
    budget_formula: bool,
    bounds: [Option<f64>; 7],
    ransac_confidence: Option<f64>,
    ransac_threshold: Option<f64>,
    ransac_time_s: Option<f64>,
    success_rotation_deg: Option<f64>,
    success_translation: Option<f64>,
    success_scale: Option<f64>,
}

impl Overrides {
    pub fn parse(raw: &[String]) -> CliResult<Self> {
        let mut ov = Overrides::default();
        for entry in raw {
            let Some((key, value)) = entry.split_once('=') else {
                return config(format!("override {entry:?} is not key=value"));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = || CliError::Config(format!("bad value {value:?} for override {key}"));
            let int = || value.parse::<usize>().map_err(|_| bad());
            let float =
                || value.parse::<f64>().map_err(|_| bad()).and_then(|v| if v.is_finite() { Ok(v) } else { Err(bad()) });
            match key {
                "x" => ov.x = Some(int()?),
                "max_itr1" => ov.max_itr[0] = Some(int()?),
                "max_itr2" => ov.max_itr[1] = Some(int()?),
                "max_itr3" => ov.max_itr[2] = Some(int()?),
                "max_itr4" => ov.max_itr[3] = Some(int()?),
                "max_restarts" => ov.max_restarts = Some(int()?),
                "confidence" => ov.confidence = Some(float()?),
                "assumed_outlier_ratio" => ov.assumed_outlier_ratio = Some(float()?),
                "budget_formula" => ov.budget_formula = value.parse().map_err(|_| bad())?,
                "ransac.confidence" => ov.ransac_confidence = Some(float()?),
                "ransac.threshold" => ov.ransac_threshold = Some(float()?),
                "ransac.time_s" => ov.ransac_time_s = Some(float()?),
                "success.rotation_deg" => ov.success_rotation_deg = Some(float()?),
                "success.translation" => ov.success_translation = Some(float()?),
                "success.scale" => ov.success_scale = Some(float()?),
                _ => match key.strip_prefix("bound.").and_then(|b| BOUND_KEYS.iter().position(|k| *k == b)) {
                    Some(slot) => ov.bounds[slot] = Some(float()?),
                    None => {
                        let known: Vec<&str> = OVERRIDE_KEYS.iter().map(|(k, _)| *k).collect();
                        return config(format!("unknown override {key:?}; known keys: {}", known.join(", ")));
                    }
                },
            }
        }
        Ok(ov)
    }

    pub fn icos(&self, problem: Problem, sigma: f64, n: usize) -> CliResult<IcosParams> {
        let mut p = IcosParams::for_problem(problem, sigma, n);
        if let Some(x) = self.x {
            p.min_inliers = x;
        }
        if let Some(c) = self.confidence {
            p.confidence = c;
        }
        if let Some(r) = self.assumed_outlier_ratio {
            p.assumed_outlier_ratio = r;
        }
        if self.budget_formula {
            p = p.with_budget_formula(problem)?;
        }
        let caps = [&mut p.max_itr1, &mut p.max_itr2, &mut p.max_itr3, &mut p.max_itr4];
        for (cap, v) in caps.into_iter().zip(self.max_itr) {
            if let Some(v) = v {
                *cap = v;
            }
        }
        if let Some(r) = self.max_restarts {
            p.max_restarts = r;
        }
        let b: &mut NoiseBounds = &mut p.bounds;
        let slots = [
            &mut b.length,
            &mut b.vector_residual,
            &mut b.pair_geodesic,
            &mut b.scale,
            &mut b.translation,
            &mut b.point_residual,
            &mut b.triple_geodesic,
        ];
        for (slot, m) in slots.into_iter().zip(self.bounds) {
            if let Some(m) = m {
                *slot = m * sigma;
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn ransac(&self, solver: Solver, sigma: f64) -> CliResult<RansacParams> {
        let mut p = match solver {
            Solver::RansacIterations(k) => RansacParams::with_iterations(sigma, k),
            Solver::RansacTime(d) => RansacParams::with_time_budget(sigma, d),
            Solver::Icos => return config("not a RANSAC solver"),
        };
        p.confidence = self.ransac_confidence.unwrap_or(DEFAULT_CONFIDENCE);
        p.inlier_threshold = self.ransac_threshold.unwrap_or(inlier_threshold(sigma));
        p.validate()?;
        Ok(p)
    }

    pub fn success(&self) -> SuccessCriteria {
        SuccessCriteria {
            max_rotation_deg: self.success_rotation_deg.unwrap_or(1.0),
            max_translation: self.success_translation,
            max_scale: self.success_scale,
        }
    }
}
