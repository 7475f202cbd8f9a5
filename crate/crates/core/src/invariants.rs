//! Transform-independent invariants of small correspondence subsets
//! ("compatible structures") and the Boolean constraints built on them.
//!
//! Rotation search works on 2-element structures grown to 3; registration
//! works on 3-element structures grown to 4. Every check is a pure
//! conjunction evaluated cheapest-first, so the expensive rotation
//! compatibility tests only run on candidates that survived the rest.

use crate::geometry::{
    collinear, geodesic_distance, horn_pair_rotation, horn_triple_rotation, Correspondence, CorrespondenceSet,
    Rotation, SimilarityTransform, Vec3,
};

/// Source points closer than this are treated as coincident.
pub const COINCIDENT: f64 = 1e-9;

/// Every bound is compared as `value <= max(bound, NUMERIC_FLOOR)` so that
/// zero-noise problems are not rejected over round-off.
pub const NUMERIC_FLOOR: f64 = 1e-6;

/// Inlier classification threshold, in units of sigma.
pub const INLIER_RESIDUAL_SIGMAS: f64 = 5.2;

/// Per-constraint noise bounds. Lengths are in input units; the two
/// geodesic bounds are in radians (numerically a multiple of sigma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBounds {
    pub sigma: f64,
    /// `L`: length invariant of unit-normalized vector pairs.
    pub length: f64,
    /// `G`: residual of a third vector under the pair rotation.
    pub vector_residual: f64,
    /// `F`: mutual geodesic distance of pair rotations.
    pub pair_geodesic: f64,
    /// `A`: scale invariant noise, divided by source distance at use.
    pub scale: f64,
    /// `B`: spread of the translation invariants.
    pub translation: f64,
    /// `C`: residual of a fourth point under the raw 3-point transform.
    pub point_residual: f64,
    /// `D`: mutual geodesic distance of triple rotations.
    pub triple_geodesic: f64,
}

impl NoiseBounds {
    /// Default multipliers: L=2.5σ, G=4σ, F=10.5σ, A=4.5σ, B=5σ, C=6σ, D=10.5σ.
    pub fn from_sigma(sigma: f64) -> Self {
        NoiseBounds {
            sigma,
            length: 2.5 * sigma,
            vector_residual: 4.0 * sigma,
            pair_geodesic: 10.5 * sigma,
            scale: 4.5 * sigma,
            translation: 5.0 * sigma,
            point_residual: 6.0 * sigma,
            triple_geodesic: 10.5 * sigma,
        }
    }

    /// Bounds that accept every non-degenerate structure.
    pub fn unbounded(sigma: f64) -> Self {
        NoiseBounds {
            sigma,
            length: f64::INFINITY,
            vector_residual: f64::INFINITY,
            pair_geodesic: f64::INFINITY,
            scale: f64::INFINITY,
            translation: f64::INFINITY,
            point_residual: f64::INFINITY,
            triple_geodesic: f64::INFINITY,
        }
    }

    pub fn inlier_threshold(&self) -> f64 {
        inlier_threshold(self.sigma)
    }
}

pub fn inlier_threshold(sigma: f64) -> f64 {
    (INLIER_RESIDUAL_SIGMAS * sigma).max(NUMERIC_FLOOR)
}

#[inline]
fn within(value: f64, bound: f64) -> bool {
    value <= bound.max(NUMERIC_FLOOR)
}

/// The constraint that rejected a candidate structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Length,
    VectorResidual,
    PairGeodesic,
    Scale,
    Rotation,
    Translation,
    PointResidual,
    TripleGeodesic,
    Degenerate,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Length => "length",
            Check::VectorResidual => "vector-residual",
            Check::PairGeodesic => "pair-geodesic",
            Check::Scale => "scale",
            Check::Rotation => "rotation",
            Check::Translation => "translation",
            Check::PointResidual => "point-residual",
            Check::TripleGeodesic => "triple-geodesic",
            Check::Degenerate => "degenerate",
        }
    }
}

// ---------------------------------------------------------------------------
// Rotation search

/// `| ‖ûi − ûj‖ − ‖v̂i − v̂j‖ |` on unit-normalized vectors; lies in `[0, 2]`.
pub fn length_invariant(ci: &Correspondence, cj: &Correspondence) -> f64 {
    ((ci.unit_src() - cj.unit_src()).norm() - (ci.unit_dst() - cj.unit_dst()).norm()).abs()
}

pub fn check_two_cos(ci: &Correspondence, cj: &Correspondence, bounds: &NoiseBounds) -> bool {
    within(length_invariant(ci, cj), bounds.length)
}

/// An accepted pair of vector correspondences with its raw rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCosState {
    pub indices: [usize; 2],
    pub rotation: Rotation,
}

impl TwoCosState {
    pub fn new(ci: &Correspondence, cj: &Correspondence) -> Result<Self, Check> {
        let rotation = horn_pair_rotation(&ci.src, &ci.dst, &cj.src, &cj.dst).map_err(|_| Check::Degenerate)?;
        Ok(TwoCosState { indices: [ci.index, cj.index], rotation })
    }
}

/// Evaluates the 3-COS constraints for rotation search in order: the two
/// new length invariants, the residual of `ck` under the pair rotation, then
/// the mutual geodesic distances of the three pair rotations.
pub fn evaluate_three_cos_rotation(
    two: &TwoCosState,
    ck: &Correspondence,
    set: &CorrespondenceSet,
    bounds: &NoiseBounds,
) -> Result<(), Check> {
    let c1 = set.get(two.indices[0]);
    let c2 = set.get(two.indices[1]);
    if !(check_two_cos(c1, ck, bounds) && check_two_cos(c2, ck, bounds)) {
        return Err(Check::Length);
    }
    let residual = (two.rotation.apply(&ck.unit_src()) - ck.unit_dst()).norm();
    if !within(residual, bounds.vector_residual) {
        return Err(Check::VectorResidual);
    }
    let r1k = horn_pair_rotation(&c1.src, &c1.dst, &ck.src, &ck.dst).map_err(|_| Check::Degenerate)?;
    let r2k = horn_pair_rotation(&c2.src, &c2.dst, &ck.src, &ck.dst).map_err(|_| Check::Degenerate)?;
    let r12 = &two.rotation;
    let compatible = [(r12, &r1k), (r12, &r2k), (&r1k, &r2k)]
        .iter()
        .all(|(a, b)| within(geodesic_distance(a, b), bounds.pair_geodesic));
    if !compatible {
        return Err(Check::PairGeodesic);
    }
    Ok(())
}

pub fn check_three_cos_rotation(
    two: &TwoCosState,
    ck: &Correspondence,
    set: &CorrespondenceSet,
    bounds: &NoiseBounds,
) -> bool {
    evaluate_three_cos_rotation(two, ck, set, bounds).is_ok()
}

// ---------------------------------------------------------------------------
// Registration

/// `‖Qi − Qj‖ / ‖Pi − Pj‖`, or `None` when the source points coincide.
pub fn scale_invariant(ci: &Correspondence, cj: &Correspondence) -> Option<f64> {
    let dp = (ci.src - cj.src).norm();
    if !(dp >= COINCIDENT) {
        return None;
    }
    Some((ci.dst - cj.dst).norm() / dp)
}

/// `|I − 1| ≤ A/‖Pi − Pj‖` for one pair, the known-scale pair test.
pub fn check_unit_scale_pair(ci: &Correspondence, cj: &Correspondence, bounds: &NoiseBounds) -> bool {
    let dp = (ci.src - cj.src).norm();
    match scale_invariant(ci, cj) {
        Some(s) => within((s - 1.0).abs(), bounds.scale / dp),
        None => false,
    }
}

/// Scale constraints on a candidate triple. The three cyclic pairwise
/// differences of scale invariants are always checked; with `known_scale`
/// each invariant must additionally be close to 1. Collinear or coincident
/// source points fail.
pub fn check_scale_triplet(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    bounds: &NoiseBounds,
    known_scale: bool,
) -> bool {
    if collinear(&c1.src, &c2.src, &c3.src) {
        return false;
    }
    let cs = [c1, c2, c3];
    // Pairs (1,2), (2,3), (3,1) with their source distances.
    let mut inv = [0.0; 3];
    let mut dist = [0.0; 3];
    for k in 0..3 {
        let (a, b) = (cs[k], cs[(k + 1) % 3]);
        dist[k] = (a.src - b.src).norm();
        match scale_invariant(a, b) {
            Some(s) => inv[k] = s,
            None => return false,
        }
    }
    if known_scale && !(0..3).all(|k| within((inv[k] - 1.0).abs(), bounds.scale / dist[k])) {
        return false;
    }
    (0..3).all(|k| {
        let next = (k + 1) % 3;
        within((inv[k] - inv[next]).abs(), bounds.scale * (1.0 / dist[k] + 1.0 / dist[next]))
    })
}

/// An accepted 3-element structure with its raw transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeCosState {
    pub indices: [usize; 3],
    pub scale: f64,
    pub rotation: Rotation,
    /// Mean of the three translation invariants.
    pub translation: Vec3,
    src: [Vec3; 3],
    dst: [Vec3; 3],
}

impl ThreeCosState {
    pub fn transform(&self) -> SimilarityTransform {
        SimilarityTransform { scale: self.scale, rotation: self.rotation, translation: self.translation }
    }

    /// The three translation invariants `Qi − s·R·Pi`.
    pub fn translation_invariants(&self) -> [Vec3; 3] {
        translation_invariants(self.scale, &self.rotation, &self.src, &self.dst)
    }
}

fn translation_invariants(scale: f64, rotation: &Rotation, src: &[Vec3; 3], dst: &[Vec3; 3]) -> [Vec3; 3] {
    std::array::from_fn(|i| dst[i] - scale * rotation.apply(&src[i]))
}

/// Weighted raw scale of a triple with weights `‖Pij‖²`.
pub fn triple_scale(src: &[Vec3; 3], dst: &[Vec3; 3]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..3 {
        let next = (k + 1) % 3;
        let dp = (src[k] - src[next]).norm();
        let dq = (dst[k] - dst[next]).norm();
        let w = dp * dp;
        num += w * (dq / dp);
        den += w;
    }
    num / den
}

/// Computes the raw scale (fixed to 1 with `known_scale`), the 3-point
/// rotation and the translation invariants, and checks the invariants agree
/// pairwise within `B`. Expects `check_scale_triplet` to have passed.
pub fn build_three_cos(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    bounds: &NoiseBounds,
    known_scale: bool,
) -> Result<ThreeCosState, Check> {
    let src = [c1.src, c2.src, c3.src];
    let dst = [c1.dst, c2.dst, c3.dst];
    let scale = if known_scale { 1.0 } else { triple_scale(&src, &dst) };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Check::Scale);
    }
    let rotation = horn_triple_rotation(&src, &dst).map_err(|_| Check::Rotation)?;
    let ti = translation_invariants(scale, &rotation, &src, &dst);
    let consistent = (0..3).all(|k| within((ti[k] - ti[(k + 1) % 3]).norm(), bounds.translation));
    if !consistent {
        return Err(Check::Translation);
    }
    Ok(ThreeCosState {
        indices: [c1.index, c2.index, c3.index],
        scale,
        rotation,
        translation: (ti[0] + ti[1] + ti[2]) / 3.0,
        src,
        dst,
    })
}

/// Evaluates the 4-COS constraints in order: pairwise differences of the
/// three new scale invariants, the residual of `ck` under the raw transform,
/// then the mutual geodesic distances of the four triple rotations.
pub fn evaluate_four_cos(three: &ThreeCosState, ck: &Correspondence, bounds: &NoiseBounds) -> Result<(), Check> {
    let mut inv = [0.0; 3];
    let mut dist = [0.0; 3];
    for i in 0..3 {
        let dp = (three.src[i] - ck.src).norm();
        if !(dp >= COINCIDENT) {
            return Err(Check::Degenerate);
        }
        dist[i] = dp;
        inv[i] = (three.dst[i] - ck.dst).norm() / dp;
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if !within((inv[i] - inv[j]).abs(), bounds.scale * (1.0 / dist[i] + 1.0 / dist[j])) {
            return Err(Check::Scale);
        }
    }

    let residual = (three.transform().apply(&ck.src) - ck.dst).norm();
    if !within(residual, bounds.point_residual) {
        return Err(Check::PointResidual);
    }

    let (p, q) = (&three.src, &three.dst);
    let triple = |a: usize, b: usize| {
        horn_triple_rotation(&[p[a], p[b], ck.src], &[q[a], q[b], ck.dst]).map_err(|_| Check::Degenerate)
    };
    let rotations = [three.rotation, triple(0, 1)?, triple(0, 2)?, triple(1, 2)?];
    for a in 0..4 {
        for b in a + 1..4 {
            if !within(geodesic_distance(&rotations[a], &rotations[b]), bounds.triple_geodesic) {
                return Err(Check::TripleGeodesic);
            }
        }
    }
    Ok(())
}

pub fn check_four_cos(
    three: &ThreeCosState,
    ck: &Correspondence,
    _set: &CorrespondenceSet,
    bounds: &NoiseBounds,
) -> bool {
    evaluate_four_cos(three, ck, bounds).is_ok()
}

/// Residual of one correspondence under an estimate.
pub trait Residual {
    fn residual(&self, c: &Correspondence) -> f64;
}

impl Residual for Rotation {
    /// `‖R·u − v‖` on the raw vectors.
    fn residual(&self, c: &Correspondence) -> f64 {
        (self.apply(&c.src) - c.dst).norm()
    }
}

impl Residual for SimilarityTransform {
    /// `‖s·R·P + t − Q‖`.
    fn residual(&self, c: &Correspondence) -> f64 {
        (self.apply(&c.src) - c.dst).norm()
    }
}

pub fn residual<M: Residual + ?Sized>(c: &Correspondence, estimate: &M) -> f64 {
    estimate.residual(c)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng::{gaussian_vector, random_rotation, random_unit_vector, seeded};

    fn corr(index: usize, src: Vec3, dst: Vec3) -> Correspondence {
        Correspondence { index, src, dst }
    }

    fn cube_point<R: Rng>(rng: &mut R) -> Vec3 {
        Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
    }

    #[test]
    fn table_multipliers() {
        let b = NoiseBounds::from_sigma(0.01);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(b.length, 0.025));
        assert!(close(b.vector_residual, 0.04));
        assert!(close(b.pair_geodesic, 0.105));
        assert!(close(b.scale, 0.045));
        assert!(close(b.translation, 0.05));
        assert!(close(b.point_residual, 0.06));
        assert!(close(b.triple_geodesic, 0.105));
        assert!(close(b.inlier_threshold(), 0.052));
    }

    #[test]
    fn length_invariant_cases() {
        let u1 = Vec3::new(1.0, 2.0, 3.0);
        let u2 = Vec3::new(-1.0, 0.5, 0.0);
        assert_eq!(length_invariant(&corr(0, u1, u1), &corr(1, u2, u2)), 0.0);

        let mut rng = seeded(21);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let (a, b) = (random_unit_vector(&mut rng) * 3.0, random_unit_vector(&mut rng));
            let v = length_invariant(&corr(0, a, r.apply(&a)), &corr(1, b, r.apply(&b)));
            assert!(v < 1e-12);
        }
    }

    #[test]
    fn length_invariant_pass_rate_at_sigma() {
        // Unit-normalizing R·u + N(0, σ²I₃) leaves tangential noise on both
        // chords; about 2% of inlier pairs exceed 2.5σ.
        let sigma = 0.01;
        let bounds = NoiseBounds::from_sigma(sigma);
        let mut rng = seeded(22);
        let trials = 10_000;
        let mut pass = 0;
        for _ in 0..trials {
            let r = random_rotation(&mut rng);
            let (a, b) = (random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let ca = corr(0, a, r.apply(&a) + gaussian_vector(&mut rng, sigma));
            let cb = corr(1, b, r.apply(&b) + gaussian_vector(&mut rng, sigma));
            if check_two_cos(&ca, &cb, &bounds) {
                pass += 1;
            }
        }
        assert!(pass as f64 / trials as f64 >= 0.97, "pass rate {pass}/{trials}");
    }

    #[test]
    fn two_cos_adversarial_and_vacuous() {
        let bounds = NoiseBounds::from_sigma(0.01);
        let u1 = Vec3::new(1.0, 0.0, 0.0);
        let u2 = Vec3::new(0.0, 1.0, 0.0);
        let c1 = corr(0, u1, u1);
        // ‖û1 − û2‖ = √2 but the targets are antipodal: invariant 2 − √2.
        let c2 = corr(1, u2, -u1);
        assert!((length_invariant(&c1, &c2) - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(!check_two_cos(&c1, &c2, &bounds));
        assert!(check_two_cos(&c1, &c2, &NoiseBounds::unbounded(0.01)));
        assert!(check_two_cos(&c1, &corr(1, u2, u2), &bounds));
    }

    fn vector_set(pairs: &[(Vec3, Vec3)]) -> CorrespondenceSet {
        CorrespondenceSet::vector_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn three_cos_noiseless_and_degenerate() {
        let bounds = NoiseBounds::from_sigma(0.01);
        let mut rng = seeded(23);
        let r = random_rotation(&mut rng);
        let us: Vec<Vec3> = (0..3).map(|_| random_unit_vector(&mut rng)).collect();
        let set = vector_set(&us.iter().map(|u| (*u, r.apply(u))).collect::<Vec<_>>());
        let two = TwoCosState::new(set.get(0), set.get(1)).unwrap();
        assert!(check_three_cos_rotation(&two, set.get(2), &set, &bounds));

        // ck parallel to c1 in the source frame: pair rotation undefined.
        let set =
            vector_set(&[(us[0], r.apply(&us[0])), (us[1], r.apply(&us[1])), (2.0 * us[0], r.apply(&us[0]) * 2.0)]);
        let two = TwoCosState::new(set.get(0), set.get(1)).unwrap();
        assert_eq!(
            evaluate_three_cos_rotation(&two, set.get(2), &set, &NoiseBounds::unbounded(0.01)),
            Err(Check::Degenerate)
        );
    }

    #[test]
    fn three_cos_rejects_random_outliers() {
        let sigma = 0.01;
        let bounds = NoiseBounds::from_sigma(sigma);
        let mut rng = seeded(24);
        let trials = 10_000;
        let mut rejected = 0;
        for _ in 0..trials {
            let r = random_rotation(&mut rng);
            let mut pairs: Vec<(Vec3, Vec3)> = (0..2)
                .map(|_| {
                    let u = random_unit_vector(&mut rng);
                    (u, r.apply(&u) + gaussian_vector(&mut rng, sigma))
                })
                .collect();
            pairs.push((random_unit_vector(&mut rng), random_unit_vector(&mut rng)));
            let set = vector_set(&pairs);
            let Ok(two) = TwoCosState::new(set.get(0), set.get(1)) else {
                continue;
            };
            if !check_three_cos_rotation(&two, set.get(2), &set, &bounds) {
                rejected += 1;
            }
        }
        assert!(rejected as f64 / trials as f64 >= 0.99, "{rejected}/{trials}");
    }

    #[test]
    fn scale_invariant_cases() {
        let c1 = corr(0, Vec3::zeros(), Vec3::zeros());
        let c2 = corr(1, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(scale_invariant(&c1, &c2), Some(2.0));
        assert_eq!(scale_invariant(&c1, &corr(2, Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0))), None);

        let mut rng = seeded(25);
        let r = random_rotation(&mut rng);
        let t = Vec3::new(0.3, -1.0, 2.0);
        for _ in 0..1000 {
            let (p, q) = (cube_point(&mut rng), cube_point(&mut rng));
            let s = scale_invariant(&corr(0, p, 3.0 * r.apply(&p) + t), &corr(1, q, 3.0 * r.apply(&q) + t)).unwrap();
            assert!((s - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_invariant_noise_bound_rate() {
        let sigma = 0.01;
        let a = 4.5 * sigma;
        let mut rng = seeded(26);
        let r = random_rotation(&mut rng);
        let trials = 10_000;
        let mut pass = 0;
        for _ in 0..trials {
            let (p, q) = (cube_point(&mut rng), cube_point(&mut rng));
            let cp = corr(0, p, 3.0 * r.apply(&p) + gaussian_vector(&mut rng, sigma));
            let cq = corr(1, q, 3.0 * r.apply(&q) + gaussian_vector(&mut rng, sigma));
            let Some(s) = scale_invariant(&cp, &cq) else { continue };
            if (s - 3.0).abs() <= a / (p - q).norm() {
                pass += 1;
            }
        }
        assert!(pass as f64 / trials as f64 >= 0.99, "{pass}/{trials}");
    }

    fn registration_triple(
        rng: &mut crate::rng::SolverRng,
        scale: f64,
        sigma: f64,
    ) -> (SimilarityTransform, [Correspondence; 3]) {
        let tf = SimilarityTransform::new(scale, random_rotation(rng), 3.0 * random_unit_vector(rng)).unwrap();
        let cs = std::array::from_fn(|i| {
            let p = cube_point(rng);
            corr(i, p, tf.apply(&p) + gaussian_vector(rng, sigma))
        });
        (tf, cs)
    }

    #[test]
    fn scale_triplet_noiseless_and_collinear() {
        let bounds = NoiseBounds::from_sigma(0.01);
        let mut rng = seeded(27);
        let (_, [c1, c2, c3]) = registration_triple(&mut rng, 1.0, 0.0);
        assert!(check_scale_triplet(&c1, &c2, &c3, &bounds, true));
        let (_, [c1, c2, c3]) = registration_triple(&mut rng, 4.2, 0.0);
        assert!(check_scale_triplet(&c1, &c2, &c3, &bounds, false));
        assert!(!check_scale_triplet(&c1, &c2, &c3, &bounds, true));

        let line = |i: usize, x: f64| corr(i, Vec3::new(x, x, 0.0), Vec3::new(x, x, 0.0));
        assert!(!check_scale_triplet(
            &line(0, 0.0),
            &line(1, 0.1),
            &line(2, 0.3),
            &NoiseBounds::unbounded(0.01),
            false
        ));
    }

    #[test]
    fn build_three_cos_noiseless() {
        let bounds = NoiseBounds::from_sigma(0.01);
        let mut rng = seeded(28);
        for known in [true, false] {
            let s = if known { 1.0 } else { 2.5 };
            let (tf, [c1, c2, c3]) = registration_triple(&mut rng, s, 0.0);
            let state = build_three_cos(&c1, &c2, &c3, &bounds, known).unwrap();
            assert!((state.scale - s).abs() < 1e-12);
            assert!(geodesic_distance(&state.rotation, &tf.rotation) < 1e-9);
            assert!((state.translation - tf.translation).norm() < 1e-12);
            let ti = state.translation_invariants();
            let mean = (ti[0] + ti[1] + ti[2]) / 3.0;
            assert!((mean - state.translation).norm() < 1e-15);
            if known {
                assert_eq!(state.scale, 1.0);
            }
        }
    }

    #[test]
    fn four_cos_noiseless_unbounded_and_collinear() {
        let bounds = NoiseBounds::from_sigma(0.01);
        let mut rng = seeded(29);
        let (tf, [c1, c2, c3]) = registration_triple(&mut rng, 2.0, 0.0);
        let state = build_three_cos(&c1, &c2, &c3, &bounds, false).unwrap();
        let p = cube_point(&mut rng);
        let c4 = corr(3, p, tf.apply(&p));
        let set = CorrespondenceSet::point_pairs([c1, c2, c3, c4].map(|c| (c.src, c.dst))).unwrap();
        assert!(check_four_cos(&state, set.get(3), &set, &bounds));

        // A wild fourth point still passes vacuous bounds.
        let c4 = corr(3, p, Vec3::new(9.0, -4.0, 1.0));
        assert_eq!(evaluate_four_cos(&state, &c4, &NoiseBounds::unbounded(0.01)), Ok(()));

        // Fourth point on the line through P1 and P2.
        let on_line = c1.src + 0.5 * (c2.src - c1.src);
        let c4 = corr(3, on_line, tf.apply(&on_line));
        assert_eq!(evaluate_four_cos(&state, &c4, &NoiseBounds::unbounded(0.01)), Err(Check::Degenerate));
    }

    #[test]
    fn residual_cases() {
        let mut rng = seeded(30);
        let r = random_rotation(&mut rng);
        let u = random_unit_vector(&mut rng) * 2.0;
        assert!(residual(&corr(0, u, r.apply(&u)), &r) < 1e-12);
        let tf = SimilarityTransform::new(3.0, r, Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert!(residual(&corr(0, u, tf.apply(&u)), &tf) < 1e-12);
    }

    #[test]
    fn noised_residual_tail() {
        // ‖ε‖ for ε ~ N(0, σ²I₃) is chi-distributed with 3 dof;
        // P(χ₃ > 5.2) ≈ 1.2e-5.
        let sigma = 0.01;
        let mut rng = seeded(31);
        let r = random_rotation(&mut rng);
        let n = 100_000;
        let within = (0..n)
            .filter(|_| {
                let u = random_unit_vector(&mut rng);
                let c = corr(0, u, r.apply(&u) + gaussian_vector(&mut rng, sigma));
                residual(&c, &r) <= inlier_threshold(sigma)
            })
            .count();
        assert!(within as f64 / n as f64 >= 0.999);

        let outliers = (0..10_000)
            .filter(|_| {
                let c = corr(0, random_unit_vector(&mut rng), random_unit_vector(&mut rng));
                residual(&c, &r) > inlier_threshold(sigma)
            })
            .count();
        assert!(outliers as f64 / 10_000.0 >= 0.99);
    }
}
