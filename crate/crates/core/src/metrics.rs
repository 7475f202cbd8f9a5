//! Estimation errors and inlier-set quality against ground truth.

use serde::Serialize;

use crate::geometry::geodesic_distance;
use crate::samplers::SolveReport;
use crate::synth::{GroundTruth, Instance};

/// Version of the [`BenchRecord`] column layout.
pub const BENCH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics {
    /// Geodesic rotation error in degrees.
    pub rotation_deg: f64,
    pub translation: f64,
    pub scale: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Success thresholds applied to [`ErrorMetrics`]. `None` skips a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriteria {
    pub max_rotation_deg: f64,
    pub max_translation: Option<f64>,
    pub max_scale: Option<f64>,
}

impl SuccessCriteria {
    pub fn rotation(max_rotation_deg: f64) -> Self {
        SuccessCriteria { max_rotation_deg, max_translation: None, max_scale: None }
    }

    pub fn accepts(&self, m: &ErrorMetrics) -> bool {
        m.rotation_deg < self.max_rotation_deg
            && self.max_translation.is_none_or(|t| m.translation < t)
            && self.max_scale.is_none_or(|s| m.scale < s)
    }
}

pub fn evaluate(report: &SolveReport, truth: &GroundTruth) -> ErrorMetrics {
    let e = &report.estimate;
    let t = &truth.transform;
    let (recall, precision) = recall_precision(&report.inliers, &truth.inlier_mask);
    ErrorMetrics {
        rotation_deg: geodesic_distance(&e.rotation(), &t.rotation).to_degrees().clamp(0.0, 180.0),
        translation: (e.translation() - t.translation).norm(),
        scale: (e.scale() - t.scale).abs(),
        recall,
        precision,
    }
}

/// `|found ∩ true| / |true|` and `|found ∩ true| / |found|`. Recall is 1
/// when there are no true inliers; precision is 0 when nothing was found.
pub fn recall_precision(found: &[usize], mask: &[bool]) -> (f64, f64) {
    let hits = found.iter().filter(|&&i| mask.get(i).copied().unwrap_or(false)).count() as f64;
    let truth = mask.iter().filter(|m| **m).count();
    let recall = if truth == 0 { 1.0 } else { hits / truth as f64 };
    let precision = if found.is_empty() { 0.0 } else { hits / found.len() as f64 };
    (recall, precision)
}

/// One benchmark row: a solver run on one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub schema_version: u32,
    pub problem: &'static str,
    pub n: usize,
    pub sigma: f64,
    pub outlier_ratio: f64,
    pub ratio_index: usize,
    pub run: u64,
    pub seed: u64,
    pub solver: String,
    pub status: &'static str,
    pub rotation_deg: f64,
    pub translation: f64,
    pub scale: f64,
    pub recall: f64,
    pub precision: f64,
    pub inliers: usize,
    pub restarts: usize,
    pub draws: u64,
    pub success: bool,
    pub runtime_s: f64,
}

impl BenchRecord {
    pub fn new(
        instance: &Instance,
        ratio_index: usize,
        run: u64,
        solver: &str,
        report: &SolveReport,
        criteria: &SuccessCriteria,
    ) -> Self {
        let m = evaluate(report, &instance.truth);
        let it = report.iterations;
        BenchRecord {
            schema_version: BENCH_SCHEMA_VERSION,
            problem: report.problem.name(),
            n: instance.set.len(),
            sigma: instance.truth.sigma,
            outlier_ratio: instance.outlier_ratio,
            ratio_index,
            run,
            seed: instance.seed,
            solver: solver.to_string(),
            status: report.status.name(),
            rotation_deg: m.rotation_deg,
            translation: m.translation,
            scale: m.scale,
            recall: m.recall,
            precision: m.precision,
            inliers: report.inliers.len(),
            restarts: report.restarts,
            draws: it.seed + it.completion + it.collection,
            success: criteria.accepts(&m),
            runtime_s: report.elapsed.as_secs_f64(),
        }
    }
}
