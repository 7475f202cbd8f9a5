//! The ICOS sampling frameworks.
//!
//! Each solver grows a seed structure (a 2-COS for rotation search, a
//! 3-COS for registration) by single-correspondence draws. A draw is
//! collected when it forms an eligible larger structure with the seed; once
//! `min_inliers` distinct draws have been collected the provisional estimate
//! is solved on them, every correspondence is reclassified by residual, and
//! the estimate is re-solved on the result.
//!
//! A seed that fails to attract extensions is abandoned early by
//! [`check_sampling`] and the solver restarts with a fresh seed, up to
//! `max_restarts` times.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use web_time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{
    solve_rotation_nonminimal, solve_transform_nonminimal, Correspondence, CorrespondenceKind, CorrespondenceSet,
    Rotation, SimilarityTransform, Vec3,
};
use crate::invariants::{
    build_three_cos, check_scale_triplet, check_two_cos, check_unit_scale_pair, evaluate_four_cos,
    evaluate_three_cos_rotation, inlier_threshold, Check, NoiseBounds, Residual, ThreeCosState, TwoCosState,
};
use crate::rng::{draw_distinct, draw_excluding, seeded, SolverRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    RotationSearch,
    KnownScaleRegistration,
    UnknownScaleRegistration,
}

impl Problem {
    /// Size of the seed structure.
    pub fn seed_size(self) -> usize {
        match self {
            Problem::RotationSearch => 2,
            _ => 3,
        }
    }

    pub fn kind(self) -> CorrespondenceKind {
        match self {
            Problem::RotationSearch => CorrespondenceKind::VectorPairs,
            _ => CorrespondenceKind::PointPairs,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::RotationSearch => "rotation",
            Problem::KnownScaleRegistration => "known-scale",
            Problem::UnknownScaleRegistration => "unknown-scale",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcosParams {
    pub bounds: NoiseBounds,
    /// Distinct extensions to collect before solving (`X`).
    pub min_inliers: usize,
    /// Seed draws per restart.
    pub max_itr1: usize,
    /// Third-point draws completing a decoupled known-scale seed.
    pub max_itr2: usize,
    /// Extension draws per seed.
    pub max_itr3: usize,
    /// Early-abort period of [`check_sampling`].
    pub max_itr4: usize,
    pub confidence: f64,
    pub assumed_outlier_ratio: f64,
    pub seed: u64,
    pub max_restarts: usize,
}

pub const DEFAULT_MAX_RESTARTS: usize = 100_000;

impl IcosParams {
    /// Rotation-search defaults. `X` is 2, 4 or 5 for the documented sizes
    /// N = 100, 500, 1000; other N take the value of the nearest size.
    pub fn rotation_search(sigma: f64, n: usize) -> Self {
        let min_inliers = [(100usize, 2usize), (500, 4), (1000, 5)]
            .into_iter()
            .min_by_key(|(size, _)| size.abs_diff(n))
            .map(|(_, x)| x)
            .unwrap();
        IcosParams {
            bounds: NoiseBounds::from_sigma(sigma),
            min_inliers,
            max_itr1: 40_000,
            max_itr2: 400,
            max_itr3: 2000,
            max_itr4: 400,
            confidence: 0.99,
            assumed_outlier_ratio: 0.99,
            seed: 0,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    /// Registration defaults (known or unknown scale).
    pub fn registration(sigma: f64) -> Self {
        IcosParams {
            bounds: NoiseBounds::from_sigma(sigma),
            min_inliers: 4,
            max_itr1: 40_000,
            max_itr2: 400,
            max_itr3: 1600,
            max_itr4: 400,
            confidence: 0.99,
            assumed_outlier_ratio: 0.99,
            seed: 0,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn for_problem(problem: Problem, sigma: f64, n: usize) -> Self {
        match problem {
            Problem::RotationSearch => Self::rotation_search(sigma, n),
            _ => Self::registration(sigma),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Replaces the iteration caps with [`max_iterations`] evaluated at
    /// `confidence` and `assumed_outlier_ratio`: pair draws for the seed
    /// stage, single draws for the others, `X` subsets for collection.
    pub fn with_budget_formula(mut self, problem: Problem) -> Result<Self> {
        let (p, r) = (self.confidence, self.assumed_outlier_ratio);
        let seed_draw = if problem == Problem::UnknownScaleRegistration { 3 } else { 2 };
        self.max_itr1 = to_cap(max_iterations(1, p, r, seed_draw)?);
        self.max_itr2 = to_cap(max_iterations(1, p, r, 1)?);
        self.max_itr3 = to_cap(max_iterations(self.min_inliers as u64, p, r, 1)?);
        self.max_itr4 = to_cap(max_iterations(1, p, r, 1)?);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        let all_bounds =
            [b.length, b.vector_residual, b.pair_geodesic, b.scale, b.translation, b.point_residual, b.triple_geodesic];
        if !(b.sigma >= 0.0 && b.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {}", b.sigma)));
        }
        if all_bounds.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter("noise bounds must be non-negative".into()));
        }
        if self.min_inliers == 0 {
            return Err(Error::InvalidParameter("min_inliers must be positive".into()));
        }
        if [self.max_itr1, self.max_itr2, self.max_itr3, self.max_itr4].contains(&0) {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        if self.max_restarts == 0 {
            return Err(Error::InvalidParameter("max_restarts must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!("confidence must lie in (0,1), got {}", self.confidence)));
        }
        if !(0.0..1.0).contains(&self.assumed_outlier_ratio) {
            return Err(Error::InvalidParameter(format!(
                "assumed outlier ratio must lie in [0,1), got {}",
                self.assumed_outlier_ratio
            )));
        }
        Ok(())
    }
}

fn to_cap(v: u64) -> usize {
    usize::try_from(v).unwrap_or(usize::MAX)
}

/// Draws needed to obtain `x` all-inlier samples of size `n` with
/// confidence `p` at the given outlier ratio:
/// `ceil(x·log(1−p) / log(1−(1−ratio)ⁿ))`, never less than `x`: at low
/// outlier ratios the formula drops below `x`, and `x` clean samples take
/// at least `x` draws. A zero outlier ratio needs exactly `x`.
pub fn max_iterations(x: u64, p: f64, outlier_ratio: f64, n: u32) -> Result<u64> {
    if x < 1 || n < 1 {
        return Err(Error::InvalidParameter("x and n must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence must lie in (0,1), got {p}")));
    }
    if !(0.0..1.0).contains(&outlier_ratio) {
        return Err(Error::InvalidParameter(format!("outlier ratio must lie in [0,1), got {outlier_ratio}")));
    }
    if outlier_ratio == 0.0 {
        return Ok(x);
    }
    let all_inlier = (1.0 - outlier_ratio).powi(n as i32);
    let draws = x as f64 * (-p).ln_1p() / (-all_inlier).ln_1p();
    // Absorb round-off so that exact integers (e.g. log 0.01 / log 0.1) do
    // not round up.
    let rounded = (draws - 1e-9 * draws.max(1.0)).ceil();
    Ok(if rounded >= u64::MAX as f64 { u64::MAX } else { (rounded as u64).max(x) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingDecision {
    Continue,
    Abort,
}

/// Abandons a seed that has attracted fewer than `k` extensions after
/// `k·max_itr4` draws, for k = 1, 2, 3.
pub fn check_sampling(itr3: usize, count: usize, max_itr4: usize) -> SamplingDecision {
    let abort = (1..=3).any(|k| itr3 >= k * max_itr4 && count < k);
    if abort {
        SamplingDecision::Abort
    } else {
        SamplingDecision::Continue
    }
}

/// Why a pass of the outer loop ended without a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RestartReason {
    /// The seed stage drew `max_itr1` candidates without an eligible one.
    NoSeed,
    /// A complete seed candidate was rejected by this check.
    SeedRejected(Check),
    /// [`check_sampling`] abandoned the seed.
    CollectionAborted,
    /// `max_itr3` extension draws did not collect `min_inliers`.
    CollectionExhausted,
    /// The final solve failed or kept too few inliers.
    Refinement,
}

impl RestartReason {
    pub fn name(self) -> String {
        match self {
            RestartReason::NoSeed => "no-seed".into(),
            RestartReason::SeedRejected(c) => format!("seed-rejected:{}", c.name()),
            RestartReason::CollectionAborted => "collection-aborted".into(),
            RestartReason::CollectionExhausted => "collection-exhausted".into(),
            RestartReason::Refinement => "refinement".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    BudgetExhausted,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::BudgetExhausted => "budget-exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Rotation(Rotation),
    Transform(SimilarityTransform),
}

impl Estimate {
    pub fn identity(problem: Problem) -> Self {
        match problem {
            Problem::RotationSearch => Estimate::Rotation(Rotation::identity()),
            _ => Estimate::Transform(SimilarityTransform::identity()),
        }
    }

    pub fn rotation(&self) -> Rotation {
        match self {
            Estimate::Rotation(r) => *r,
            Estimate::Transform(t) => t.rotation,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Estimate::Rotation(_) => 1.0,
            Estimate::Transform(t) => t.scale,
        }
    }

    pub fn translation(&self) -> Vec3 {
        match self {
            Estimate::Rotation(_) => Vec3::zeros(),
            Estimate::Transform(t) => t.translation,
        }
    }
}

impl Residual for Estimate {
    fn residual(&self, c: &Correspondence) -> f64 {
        match self {
            Estimate::Rotation(r) => r.residual(c),
            Estimate::Transform(t) => t.residual(c),
        }
    }
}

/// Draw counts summed over all restarts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageIterations {
    pub seed: u64,
    pub completion: u64,
    pub collection: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub problem: Problem,
    pub estimate: Estimate,
    /// Final inliers, ascending.
    pub inliers: Vec<usize>,
    /// Seed plus collected extensions before expansion, ascending.
    pub collected: Vec<usize>,
    pub iterations: StageIterations,
    pub restarts: usize,
    pub restart_reasons: BTreeMap<RestartReason, usize>,
    pub elapsed: Duration,
    pub status: Status,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// JSON form: rotation as row-major rows and a `[w, x, y, z]` unit
    /// quaternion, translation, scale, inliers, counters and status.
    /// `elapsed_s` is included only when `with_elapsed` is set, so that
    /// outputs can be compared byte for byte.
    pub fn to_json(&self, with_elapsed: bool) -> serde_json::Value {
        let r = self.estimate.rotation();
        let q = r.to_quaternion();
        let t = self.estimate.translation();
        let reasons: serde_json::Map<String, serde_json::Value> =
            self.restart_reasons.iter().map(|(k, v)| (k.name(), (*v).into())).collect();
        let mut out = serde_json::json!({
            "problem": self.problem.name(),
            "status": self.status.name(),
            "rotation": r.to_rows(),
            "quaternion": [q.w, q.i, q.j, q.k],
            "translation": [t.x, t.y, t.z],
            "scale": self.estimate.scale(),
            "inliers": self.inliers,
            "collected": self.collected,
            "iterations": {
                "seed": self.iterations.seed,
                "completion": self.iterations.completion,
                "collection": self.iterations.collection,
            },
            "restarts": self.restarts,
            "restart_reasons": reasons,
        });
        if with_elapsed {
            out["elapsed_s"] = self.elapsed.as_secs_f64().into();
        }
        out
    }
}

/// Hooks into the sampler, for tracing and verification.
pub trait SamplingObserver {
    /// A seed structure passed every seed-stage check.
    fn seed_accepted(&mut self, _seed: &[usize]) {}
    /// `index` formed an eligible extended structure with `seed`.
    fn extension_accepted(&mut self, _seed: &[usize], _index: usize) {}
}

impl SamplingObserver for () {}

/// Classifies every correspondence by `residual ≤ 5.2σ` under `provisional`
/// and re-solves on that set. The returned inliers are exactly the set
/// classified under `provisional`.
pub fn expand_and_refine(
    set: &CorrespondenceSet,
    provisional: &Estimate,
    sigma: f64,
    problem: Problem,
) -> Result<(Estimate, Vec<usize>)> {
    let threshold = inlier_threshold(sigma);
    let inliers: Vec<usize> = set.iter().filter(|c| provisional.residual(c) <= threshold).map(|c| c.index).collect();
    if inliers.len() < problem.seed_size() {
        return Err(Error::DegenerateConfiguration("too few inliers survive expansion"));
    }
    Ok((solve(set, &inliers, problem)?, inliers))
}

fn solve(set: &CorrespondenceSet, subset: &[usize], problem: Problem) -> Result<Estimate> {
    Ok(match problem {
        Problem::RotationSearch => Estimate::Rotation(solve_rotation_nonminimal(set, subset)?),
        Problem::KnownScaleRegistration => Estimate::Transform(solve_transform_nonminimal(set, subset, Some(1.0))?),
        Problem::UnknownScaleRegistration => Estimate::Transform(solve_transform_nonminimal(set, subset, None)?),
    })
}

pub fn icos_rotation_search(set: &CorrespondenceSet, params: &IcosParams) -> Result<SolveReport> {
    solve_observed(set, params, Problem::RotationSearch, &mut ())
}

pub fn icos_registration_known_scale(set: &CorrespondenceSet, params: &IcosParams) -> Result<SolveReport> {
    solve_observed(set, params, Problem::KnownScaleRegistration, &mut ())
}

pub fn icos_registration_unknown_scale(set: &CorrespondenceSet, params: &IcosParams) -> Result<SolveReport> {
    solve_observed(set, params, Problem::UnknownScaleRegistration, &mut ())
}

pub fn icos_solve(set: &CorrespondenceSet, params: &IcosParams, problem: Problem) -> Result<SolveReport> {
    solve_observed(set, params, problem, &mut ())
}

/// Runs the solver for `problem`, reporting accepted structures to
/// `observer`. Deterministic in `(set, params)`.
pub fn solve_observed<O: SamplingObserver>(
    set: &CorrespondenceSet,
    params: &IcosParams,
    problem: Problem,
    observer: &mut O,
) -> Result<SolveReport> {
    params.validate()?;
    if set.kind() != problem.kind() {
        return Err(Error::InvalidParameter(format!(
            "{} expects {:?}, got {:?}",
            problem.name(),
            problem.kind(),
            set.kind()
        )));
    }
    let needed = params.min_inliers + problem.seed_size();
    if set.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "{} needs at least {needed} correspondences, got {}",
            problem.name(),
            set.len()
        )));
    }

    let start = Instant::now();
    let mut run =
        Run { set, params, problem, rng: seeded(params.seed), iterations: StageIterations::default(), observer };
    let mut reasons = BTreeMap::new();
    let mut restarts = 0;
    loop {
        match run.attempt() {
            Ok((estimate, inliers, collected)) => {
                return Ok(SolveReport {
                    problem,
                    estimate,
                    inliers,
                    collected,
                    iterations: run.iterations,
                    restarts,
                    restart_reasons: reasons,
                    elapsed: start.elapsed(),
                    status: Status::Converged,
                });
            }
            Err(reason) => {
                *reasons.entry(reason).or_insert(0) += 1;
                restarts += 1;
                if restarts >= params.max_restarts {
                    return Ok(SolveReport {
                        problem,
                        estimate: Estimate::identity(problem),
                        inliers: Vec::new(),
                        collected: Vec::new(),
                        iterations: run.iterations,
                        restarts,
                        restart_reasons: reasons,
                        elapsed: start.elapsed(),
                        status: Status::BudgetExhausted,
                    });
                }
            }
        }
    }
}

enum Seed {
    Pair(TwoCosState),
    Triple(ThreeCosState),
}

impl Seed {
    fn indices(&self) -> Vec<usize> {
        match self {
            Seed::Pair(s) => s.indices.to_vec(),
            Seed::Triple(s) => s.indices.to_vec(),
        }
    }
}

struct Run<'a, O> {
    set: &'a CorrespondenceSet,
    params: &'a IcosParams,
    problem: Problem,
    rng: SolverRng,
    iterations: StageIterations,
    observer: &'a mut O,
}

type Attempt = std::result::Result<(Estimate, Vec<usize>, Vec<usize>), RestartReason>;

impl<O: SamplingObserver> Run<'_, O> {
    /// One pass of the outer loop.
    fn attempt(&mut self) -> Attempt {
        let seed = match self.problem {
            Problem::RotationSearch => self.seed_pair()?,
            Problem::KnownScaleRegistration => self.seed_triple_decoupled()?,
            Problem::UnknownScaleRegistration => self.seed_triple()?,
        };
        let seed_indices = seed.indices();
        self.observer.seed_accepted(&seed_indices);

        let collected = self.collect(&seed, &seed_indices)?;
        let mut pool: BTreeSet<usize> = collected;
        pool.extend(seed_indices.iter().copied());
        let pool: Vec<usize> = pool.into_iter().collect();

        let provisional = solve(self.set, &pool, self.problem).map_err(|_| RestartReason::Refinement)?;
        let (estimate, inliers) = expand_and_refine(self.set, &provisional, self.params.bounds.sigma, self.problem)
            .map_err(|_| RestartReason::Refinement)?;
        if inliers.len() < self.params.min_inliers + self.problem.seed_size() {
            return Err(RestartReason::Refinement);
        }
        Ok((estimate, inliers, pool))
    }

    fn seed_pair(&mut self) -> std::result::Result<Seed, RestartReason> {
        let (set, bounds) = (self.set, &self.params.bounds);
        for _ in 0..self.params.max_itr1 {
            let [i, j] = draw_distinct::<_, 2>(&mut self.rng, set.len());
            self.iterations.seed += 1;
            if check_two_cos(set.get(i), set.get(j), bounds) {
                if let Ok(two) = TwoCosState::new(set.get(i), set.get(j)) {
                    return Ok(Seed::Pair(two));
                }
            }
        }
        Err(RestartReason::NoSeed)
    }

    /// Known-scale seed: a pair whose scale invariant is near 1, completed
    /// by a third point agreeing with both, then the full triple checks.
    fn seed_triple_decoupled(&mut self) -> std::result::Result<Seed, RestartReason> {
        let (set, bounds) = (self.set, &self.params.bounds);
        let mut triple = None;
        for _ in 0..self.params.max_itr1 {
            let [i, j] = draw_distinct::<_, 2>(&mut self.rng, set.len());
            self.iterations.seed += 1;
            if !check_unit_scale_pair(set.get(i), set.get(j), bounds) {
                continue;
            }
            let excluded = if i < j { [i, j] } else { [j, i] };
            for _ in 0..self.params.max_itr2 {
                let k = draw_excluding(&mut self.rng, set.len(), &excluded);
                self.iterations.completion += 1;
                if check_unit_scale_pair(set.get(i), set.get(k), bounds)
                    && check_unit_scale_pair(set.get(j), set.get(k), bounds)
                {
                    triple = Some([i, j, k]);
                    break;
                }
            }
            break;
        }
        let [i, j, k] = triple.ok_or(RestartReason::NoSeed)?;
        let (ci, cj, ck) = (set.get(i), set.get(j), set.get(k));
        if !check_scale_triplet(ci, cj, ck, bounds, true) {
            return Err(RestartReason::SeedRejected(Check::Scale));
        }
        build_three_cos(ci, cj, ck, bounds, true).map(Seed::Triple).map_err(RestartReason::SeedRejected)
    }

    /// Unknown-scale seed: random triples until one passes the scale and
    /// translation checks.
    fn seed_triple(&mut self) -> std::result::Result<Seed, RestartReason> {
        let (set, bounds) = (self.set, &self.params.bounds);
        for _ in 0..self.params.max_itr1 {
            let [i, j, k] = draw_distinct::<_, 3>(&mut self.rng, set.len());
            self.iterations.seed += 1;
            let (ci, cj, ck) = (set.get(i), set.get(j), set.get(k));
            if !check_scale_triplet(ci, cj, ck, bounds, false) {
                continue;
            }
            if let Ok(state) = build_three_cos(ci, cj, ck, bounds, false) {
                return Ok(Seed::Triple(state));
            }
        }
        Err(RestartReason::NoSeed)
    }

    /// Single draws outside the seed; returns the distinct passing indices
    /// once `min_inliers` are collected.
    fn collect(&mut self, seed: &Seed, seed_indices: &[usize]) -> std::result::Result<BTreeSet<usize>, RestartReason> {
        let (set, params) = (self.set, self.params);
        let mut excluded = seed_indices.to_vec();
        excluded.sort_unstable();
        let mut collected = BTreeSet::new();
        for itr3 in 1..=params.max_itr3 {
            if check_sampling(itr3, collected.len(), params.max_itr4) == SamplingDecision::Abort {
                return Err(RestartReason::CollectionAborted);
            }
            let k = draw_excluding(&mut self.rng, set.len(), &excluded);
            self.iterations.collection += 1;
            let ck = set.get(k);
            let eligible = match seed {
                Seed::Pair(two) => evaluate_three_cos_rotation(two, ck, set, &params.bounds).is_ok(),
                Seed::Triple(three) => evaluate_four_cos(three, ck, &params.bounds).is_ok(),
            };
            if eligible {
                self.observer.extension_accepted(seed_indices, k);
                collected.insert(k);
            }
            if collected.len() >= params.min_inliers {
                return Ok(collected);
            }
        }
        Err(RestartReason::CollectionExhausted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_formula_spot_values() {
        // ln 0.01 / ln 0.9 = 43.7; ln 0.01 / ln 0.1 is exactly 2.
        assert_eq!(max_iterations(1, 0.99, 0.9, 1).unwrap(), 44);
        assert_eq!(max_iterations(1, 0.99, 0.1, 1).unwrap(), 2);
        assert_eq!(max_iterations(1, 0.99, 0.0, 1).unwrap(), 1);
        assert_eq!(max_iterations(7, 0.99, 0.0, 3).unwrap(), 7);
        // The raw formula gives 5 here.
        assert_eq!(max_iterations(6, 0.99, 0.003, 1).unwrap(), 6);
        // ln(0.01) / ln(1 − 1e-4) = 46049.40…
        assert_eq!(max_iterations(1, 0.99, 0.99, 2).unwrap(), 46_050);
    }

    #[test]
    fn budget_formula_rejects_bad_input() {
        assert!(max_iterations(0, 0.99, 0.5, 1).is_err());
        assert!(max_iterations(1, 1.0, 0.5, 1).is_err());
        assert!(max_iterations(1, 0.0, 0.5, 1).is_err());
        assert!(max_iterations(1, 0.99, 1.0, 1).is_err());
        assert!(max_iterations(1, 0.99, -0.1, 1).is_err());
        assert!(max_iterations(1, 0.99, 0.5, 0).is_err());
    }

    #[test]
    fn budget_formula_is_monotone() {
        let base = max_iterations(2, 0.95, 0.8, 2).unwrap();
        assert!(max_iterations(3, 0.95, 0.8, 2).unwrap() >= base);
        assert!(max_iterations(2, 0.99, 0.8, 2).unwrap() >= base);
        assert!(max_iterations(2, 0.95, 0.9, 2).unwrap() >= base);
        assert!(max_iterations(2, 0.95, 0.8, 3).unwrap() >= base);
    }

    #[test]
    fn check_sampling_truth_table() {
        use SamplingDecision::*;
        assert_eq!(check_sampling(399, 0, 400), Continue);
        assert_eq!(check_sampling(400, 0, 400), Abort);
        assert_eq!(check_sampling(799, 1, 400), Continue);
        assert_eq!(check_sampling(800, 1, 400), Abort);
        assert_eq!(check_sampling(1199, 2, 400), Continue);
        assert_eq!(check_sampling(1200, 2, 400), Abort);
        assert_eq!(check_sampling(800, 2, 400), Continue);
        assert_eq!(check_sampling(5000, 3, 400), Continue);
    }

    #[test]
    fn table_defaults() {
        assert_eq!(IcosParams::rotation_search(0.01, 100).min_inliers, 2);
        assert_eq!(IcosParams::rotation_search(0.01, 500).min_inliers, 4);
        assert_eq!(IcosParams::rotation_search(0.01, 1000).min_inliers, 5);
        assert_eq!(IcosParams::rotation_search(0.01, 5000).min_inliers, 5);
        assert_eq!(IcosParams::rotation_search(0.01, 20).min_inliers, 2);
        let r = IcosParams::rotation_search(0.01, 100);
        assert_eq!((r.max_itr1, r.max_itr3, r.max_itr4), (40_000, 2000, 400));
        let g = IcosParams::registration(0.01);
        assert_eq!((g.min_inliers, g.max_itr1, g.max_itr2, g.max_itr3, g.max_itr4), (4, 40_000, 400, 1600, 400));
        assert!(g.max_restarts >= 1);
    }

    #[test]
    fn budget_formula_params() {
        let p = IcosParams::rotation_search(0.01, 1000).with_budget_formula(Problem::RotationSearch).unwrap();
        assert_eq!(p.max_itr1, 46_050);
        // ln 0.01 / ln 0.99 = 458.2
        assert_eq!(p.max_itr4, 459);
        assert_eq!(p.max_itr3, 2292);
    }

    use crate::geometry::geodesic_distance;
    use crate::synth::{gen_registration_instance, gen_rotation_instance, ScaleMode, SourceCloud};

    #[test]
    fn noiseless_rotation_search_is_exact() {
        let inst = gen_rotation_instance(100, 0.0, 0.0, 8).unwrap();
        let rep = icos_rotation_search(&inst.set, &IcosParams::rotation_search(0.0, 100)).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.inliers, (0..100).collect::<Vec<_>>());
        assert!(geodesic_distance(&rep.estimate.rotation(), &inst.truth.rotation()) < 1e-9);
    }

    #[test]
    fn noiseless_known_scale_identity() {
        let inst = gen_registration_instance(60, 0.0, 0.0, ScaleMode::Fixed(1.0), 8, SourceCloud::UnitCube).unwrap();
        let pairs: Vec<_> = inst.set.iter().map(|c| (c.src, c.src)).collect();
        let set = CorrespondenceSet::point_pairs(pairs).unwrap();
        let rep = icos_registration_known_scale(&set, &IcosParams::registration(0.0)).unwrap();
        assert!(rep.converged());
        assert_eq!(rep.inliers.len(), 60);
        assert!(geodesic_distance(&rep.estimate.rotation(), &Rotation::identity()) < 1e-9);
        assert!(rep.estimate.translation().norm() < 1e-9);
    }

    #[test]
    fn noiseless_unknown_scale_is_exact() {
        let inst = gen_registration_instance(80, 0.0, 0.0, ScaleMode::Fixed(3.0), 9, SourceCloud::UnitCube).unwrap();
        let rep = icos_registration_unknown_scale(&inst.set, &IcosParams::registration(0.0)).unwrap();
        let t = inst.truth.transform;
        assert!((rep.estimate.scale() - 3.0).abs() < 1e-9);
        assert!(geodesic_distance(&rep.estimate.rotation(), &t.rotation) < 1e-9);
        assert!((rep.estimate.translation() - t.translation).norm() < 1e-9);
    }

    #[test]
    fn reports_are_deterministic() {
        let inst = gen_rotation_instance(300, 0.01, 0.9, 10).unwrap();
        let p = IcosParams::rotation_search(0.01, 300).with_seed(42);
        let a = icos_rotation_search(&inst.set, &p).unwrap();
        let b = icos_rotation_search(&inst.set, &p).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(
            (a.inliers, a.collected, a.iterations, a.restarts),
            (b.inliers, b.collected, b.iterations, b.restarts)
        );
        assert_eq!(a.restart_reasons, b.restart_reasons);
    }

    #[test]
    fn exhaustion_returns_identity() {
        // Pure noise with tight bounds: no seed survives.
        let inst = gen_rotation_instance(50, 0.0, 0.98, 11).unwrap();
        let mut p = IcosParams::rotation_search(1e-9, 50);
        p.max_restarts = 3;
        p.max_itr1 = 200;
        let rep = icos_rotation_search(&inst.set, &p).unwrap();
        assert_eq!(rep.status, Status::BudgetExhausted);
        assert_eq!(rep.restarts, 3);
        assert!(rep.inliers.is_empty());
        assert_eq!(rep.estimate, Estimate::Rotation(Rotation::identity()));
        assert_eq!(rep.restart_reasons.values().sum::<usize>(), 3);
    }

    #[test]
    fn input_validation() {
        let rot = gen_rotation_instance(20, 0.01, 0.0, 1).unwrap();
        let reg = gen_registration_instance(20, 0.01, 0.0, ScaleMode::Fixed(1.0), 1, SourceCloud::UnitCube).unwrap();
        let p = IcosParams::registration(0.01);
        assert!(icos_registration_known_scale(&rot.set, &p).is_err());
        assert!(icos_rotation_search(&reg.set, &p).is_err());
        let small = gen_rotation_instance(5, 0.01, 0.0, 1).unwrap();
        let mut q = IcosParams::rotation_search(0.01, 5);
        q.min_inliers = 4;
        assert!(icos_rotation_search(&small.set, &q).is_err());
        let mut bad = p;
        bad.max_restarts = 0;
        assert!(bad.validate().is_err());
        bad = p;
        bad.max_itr3 = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn converged_reports_meet_size_invariant() {
        for seed in 0..10 {
            let inst = gen_rotation_instance(100, 0.01, 0.5, seed).unwrap();
            let p = IcosParams::rotation_search(0.01, 100).with_seed(seed);
            let rep = icos_rotation_search(&inst.set, &p).unwrap();
            assert!(rep.converged());
            assert!(rep.inliers.len() >= p.min_inliers + 2);
            assert!(rep.inliers.windows(2).all(|w| w[0] < w[1]));
            assert!(rep.collected.len() >= p.min_inliers + 2);
        }
    }

    #[test]
    fn expansion_threshold_is_inclusive() {
        let set = CorrespondenceSet::vector_pairs([
            (Vec3::x(), Vec3::x()),
            (Vec3::y(), Vec3::y() + Vec3::new(0.052, 0.0, 0.0)),
            (Vec3::z(), Vec3::z() + Vec3::new(0.06, 0.0, 0.0)),
        ])
        .unwrap();
        let id = Estimate::Rotation(Rotation::identity());
        let (_, inliers) = expand_and_refine(&set, &id, 0.0100000001, Problem::RotationSearch).unwrap();
        assert_eq!(inliers, vec![0, 1]);
        assert!(expand_and_refine(&set, &id, 0.001, Problem::RotationSearch).is_err());
    }
}
