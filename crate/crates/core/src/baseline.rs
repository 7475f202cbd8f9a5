//! Hypothesize-and-test RANSAC with closed-form minimal solvers, used as the
//! comparison baseline.
//!
//! Minimal samples are two vector pairs (rotation search) or three point
//! pairs (registration). Consensus is the number of correspondences with
//! residual at most `inlier_threshold`. The hypothesis budget shrinks
//! adaptively as better consensus is found, and the best consensus set is
//! re-solved with the non-minimal solver.

use std::collections::BTreeMap;
use std::time::Duration;

use web_time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{
    centroid, horn_pair_rotation, horn_triple_rotation, recover_translation, CorrespondenceSet, SimilarityTransform,
};
use crate::invariants::{inlier_threshold, triple_scale, Residual};
use crate::rng::{draw_distinct, seeded};
use crate::samplers::{max_iterations, Estimate, Problem, SolveReport, StageIterations, Status};

/// Default RANSAC confidence.
pub const DEFAULT_CONFIDENCE: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Iterations(u64),
    /// Wall-clock budget. Runs are not reproducible across machines.
    Time(Duration),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub confidence: f64,
    pub stop: StopRule,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl RansacParams {
    /// Iteration-capped RANSAC with the `5.2σ` threshold.
    pub fn with_iterations(sigma: f64, max_iterations: u64) -> Self {
        RansacParams {
            confidence: DEFAULT_CONFIDENCE,
            stop: StopRule::Iterations(max_iterations),
            inlier_threshold: inlier_threshold(sigma),
            seed: 0,
        }
    }

    pub fn with_time_budget(sigma: f64, budget: Duration) -> Self {
        RansacParams { stop: StopRule::Time(budget), ..Self::with_iterations(sigma, 1) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!("confidence must lie in (0,1), got {}", self.confidence)));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParameter("inlier threshold must be positive".into()));
        }
        match self.stop {
            StopRule::Iterations(0) => Err(Error::InvalidParameter("max_iterations must be positive".into())),
            StopRule::Time(d) if d.is_zero() => Err(Error::InvalidParameter("time budget must be positive".into())),
            _ => Ok(()),
        }
    }
}

pub fn ransac_rotation(set: &CorrespondenceSet, params: &RansacParams) -> Result<SolveReport> {
    ransac(set, params, Problem::RotationSearch)
}

pub fn ransac_registration(set: &CorrespondenceSet, params: &RansacParams, known_scale: bool) -> Result<SolveReport> {
    let problem = if known_scale { Problem::KnownScaleRegistration } else { Problem::UnknownScaleRegistration };
    ransac(set, params, problem)
}

fn hypothesis(set: &CorrespondenceSet, problem: Problem, sample: &[usize]) -> Option<Estimate> {
    if problem == Problem::RotationSearch {
        let (a, b) = (set.get(sample[0]), set.get(sample[1]));
        return horn_pair_rotation(&a.src, &a.dst, &b.src, &b.dst).ok().map(Estimate::Rotation);
    }
    let src: [_; 3] = std::array::from_fn(|k| set.get(sample[k]).src);
    let dst: [_; 3] = std::array::from_fn(|k| set.get(sample[k]).dst);
    let rotation = horn_triple_rotation(&src, &dst).ok()?;
    let scale = if problem == Problem::KnownScaleRegistration { 1.0 } else { triple_scale(&src, &dst) };
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let t = recover_translation(scale, &rotation, &centroid(&src).ok()?, &centroid(&dst).ok()?);
    SimilarityTransform::new(scale, rotation, t).ok().map(Estimate::Transform)
}

fn consensus(set: &CorrespondenceSet, model: &Estimate, threshold: f64) -> Vec<usize> {
    set.iter().filter(|c| model.residual(c) <= threshold).map(|c| c.index).collect()
}

fn ransac(set: &CorrespondenceSet, params: &RansacParams, problem: Problem) -> Result<SolveReport> {
    params.validate()?;
    if set.kind() != problem.kind() {
        return Err(Error::InvalidParameter(format!("{} expects {:?}", problem.name(), problem.kind())));
    }
    let m = problem.seed_size();
    if set.len() < m {
        return Err(Error::InvalidParameter(format!("need at least {m} correspondences, got {}", set.len())));
    }
    let start = Instant::now();
    let mut rng = seeded(params.seed);
    let cap = match params.stop {
        StopRule::Iterations(n) => n,
        StopRule::Time(_) => u64::MAX,
    };
    let mut bound = cap;
    let mut best: Option<(Estimate, Vec<usize>)> = None;
    let mut hypotheses = 0u64;
    while hypotheses < bound {
        if let StopRule::Time(budget) = params.stop {
            if start.elapsed() >= budget {
                break;
            }
        }
        let sample: Vec<usize> = if m == 2 {
            draw_distinct::<_, 2>(&mut rng, set.len()).to_vec()
        } else {
            draw_distinct::<_, 3>(&mut rng, set.len()).to_vec()
        };
        hypotheses += 1;
        let Some(model) = hypothesis(set, problem, &sample) else {
            continue;
        };
        let inliers = consensus(set, &model, params.inlier_threshold);
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            let outlier_ratio = 1.0 - inliers.len() as f64 / set.len() as f64;
            // An empty consensus cannot lower the bound.
            if outlier_ratio < 1.0 {
                let adaptive = max_iterations(1, params.confidence, outlier_ratio, m as u32)?;
                bound = bound.min(adaptive);
            }
            best = Some((model, inliers));
        }
    }
    let status = if hypotheses >= bound && bound < cap { Status::Converged } else { Status::BudgetExhausted };
    let mut report = SolveReport {
        problem,
        estimate: Estimate::identity(problem),
        inliers: Vec::new(),
        collected: Vec::new(),
        iterations: StageIterations { seed: hypotheses, ..StageIterations::default() },
        restarts: 0,
        restart_reasons: BTreeMap::new(),
        elapsed: Duration::ZERO,
        status: Status::BudgetExhausted,
    };
    if let Some((model, inliers)) = best.filter(|(_, i)| i.len() >= m) {
        let refined = match problem {
            Problem::RotationSearch => {
                crate::geometry::solve_rotation_nonminimal(set, &inliers).map(Estimate::Rotation)
            }
            Problem::KnownScaleRegistration => {
                crate::geometry::solve_transform_nonminimal(set, &inliers, Some(1.0)).map(Estimate::Transform)
            }
            Problem::UnknownScaleRegistration => {
                crate::geometry::solve_transform_nonminimal(set, &inliers, None).map(Estimate::Transform)
            }
        };
        report.estimate = refined.unwrap_or(model);
        report.collected = inliers.clone();
        report.inliers = inliers;
        report.status = status;
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic_distance;
    use crate::synth::{gen_registration_instance, gen_rotation_instance, ScaleMode, SourceCloud};

    #[test]
    fn noiseless_rotation_is_exact_in_one_hypothesis() {
        let inst = gen_rotation_instance(50, 0.0, 0.0, 1).unwrap();
        let rep = ransac_rotation(&inst.set, &RansacParams::with_iterations(0.0, 1000)).unwrap();
        assert_eq!(rep.iterations.seed, 1);
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.inliers.len(), 50);
        assert!(geodesic_distance(&rep.estimate.rotation(), &inst.truth.rotation()) < 1e-9);
    }

    #[test]
    fn noiseless_registration_is_exact() {
        for known in [true, false] {
            let scale = if known { ScaleMode::Fixed(1.0) } else { ScaleMode::Range(1.0, 5.0) };
            let inst = gen_registration_instance(40, 0.0, 0.0, scale, 2, SourceCloud::UnitCube).unwrap();
            let rep = ransac_registration(&inst.set, &RansacParams::with_iterations(0.0, 1000), known).unwrap();
            let t = inst.truth.transform;
            assert!(geodesic_distance(&rep.estimate.rotation(), &t.rotation) < 1e-9);
            assert!((rep.estimate.scale() - t.scale).abs() < 1e-9);
            assert!((rep.estimate.translation() - t.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn hypothesis_count_respects_caps() {
        let inst = gen_rotation_instance(200, 0.01, 0.9, 3).unwrap();
        let rep = ransac_rotation(&inst.set, &RansacParams::with_iterations(0.01, 100)).unwrap();
        assert!(rep.iterations.seed <= 100);
        let expected_bound = max_iterations(1, DEFAULT_CONFIDENCE, 1.0 - rep.inliers.len() as f64 / 200.0, 2).unwrap();
        assert!(rep.iterations.seed <= expected_bound.max(100));
    }

    #[test]
    fn deterministic_under_seed() {
        let inst = gen_registration_instance(100, 0.01, 0.5, ScaleMode::Fixed(1.0), 4, SourceCloud::UnitCube).unwrap();
        let p = RansacParams::with_iterations(0.01, 500).with_seed(9);
        let a = ransac_registration(&inst.set, &p, true).unwrap();
        let b = ransac_registration(&inst.set, &p, true).unwrap();
        assert_eq!((a.estimate, a.inliers, a.iterations), (b.estimate, b.inliers, b.iterations));
    }

    #[test]
    fn time_budget_stops() {
        let inst = gen_rotation_instance(500, 0.01, 0.99, 5).unwrap();
        let p = RansacParams::with_time_budget(0.01, Duration::from_millis(30));
        let rep = ransac_rotation(&inst.set, &p).unwrap();
        assert!(rep.elapsed < Duration::from_secs(2));
        assert!(rep.iterations.seed > 0);
    }

    #[test]
    fn rejects_bad_params() {
        let inst = gen_rotation_instance(10, 0.01, 0.0, 5).unwrap();
        let mut p = RansacParams::with_iterations(0.01, 0);
        assert!(ransac_rotation(&inst.set, &p).is_err());
        p.stop = StopRule::Iterations(10);
        p.confidence = 1.0;
        assert!(ransac_rotation(&inst.set, &p).is_err());
        assert!(ransac_registration(&inst.set, &RansacParams::with_iterations(0.01, 10), true).is_err());
    }
}
