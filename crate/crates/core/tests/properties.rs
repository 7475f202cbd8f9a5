use icos::geometry::{geodesic_distance, kabsch_rotation, CorrespondenceSet, Rotation, SimilarityTransform, Vec3};
use icos::instance;
use icos::invariants::{length_invariant, scale_invariant};
use icos::samplers::max_iterations;
use icos::synth::{gen_registration_instance, outlier_count, ScaleMode, SourceCloud};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (vec3(), -3.1..3.1f64).prop_filter_map("axis too short", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| Rotation::from_axis_angle(&axis.normalize(), angle))
    })
}

proptest! {
    #[test]
    fn geodesic_is_a_metric(a in rotation(), b in rotation(), c in rotation()) {
        let (ab, bc, ac) = (geodesic_distance(&a, &b), geodesic_distance(&b, &c), geodesic_distance(&a, &c));
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&ab));
        prop_assert!((ab - geodesic_distance(&b, &a)).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(geodesic_distance(&a, &a) < 1e-12);
    }

    #[test]
    fn invariants_ignore_the_transform(
        p in vec3(), q in vec3(), r in rotation(), s in 0.5..5.0f64, t in vec3(),
    ) {
        prop_assume!((p - q).norm() > 1e-2 && p.norm() > 1e-2 && q.norm() > 1e-2);
        let tf = SimilarityTransform::new(s, r, t * 3.0).unwrap();
        let points = CorrespondenceSet::point_pairs([(p, tf.apply(&p)), (q, tf.apply(&q))]).unwrap();
        let scale = scale_invariant(points.get(0), points.get(1)).unwrap();
        prop_assert!((scale - s).abs() < 1e-9 * s);
        let vectors = CorrespondenceSet::vector_pairs([(p, r.apply(&p)), (q, r.apply(&q))]).unwrap();
        prop_assert!(length_invariant(vectors.get(0), vectors.get(1)) < 1e-12);
    }

    #[test]
    fn kabsch_recovers_rotation(r in rotation(), pts in prop::collection::vec(vec3(), 4..30)) {
        let spread = pts.iter().map(|p| (p - pts[0]).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 0.1);
        let src: Vec<Vec3> = pts.iter().map(|p| p - pts.iter().sum::<Vec3>() / pts.len() as f64).collect();
        let pairs: Vec<(Vec3, Vec3)> = src.iter().map(|p| (*p, r.apply(p))).collect();
        // Nearly collinear draws are legitimately ambiguous.
        if let Ok(est) = kabsch_rotation(&pairs) {
            let residual: f64 = pairs.iter().map(|(a, b)| (est.apply(a) - b).norm()).sum();
            prop_assert!(residual < 1e-8);
        }
    }

    #[test]
    fn budget_grows_with_outliers(r1 in 0.0..0.98f64, dr in 0.0..0.01f64, x in 1u64..10, n in 1u32..4) {
        let a = max_iterations(x, 0.99, r1, n).unwrap();
        let b = max_iterations(x, 0.99, r1 + dr, n).unwrap();
        prop_assert!(a >= x && b >= a);
    }

    #[test]
    fn generated_instances_round_trip(
        n in 5usize..80, ratio in 0.0..0.99f64, seed in any::<u64>(), lo in 0.5..2.0f64,
    ) {
        let inst = gen_registration_instance(n, 0.01, ratio, ScaleMode::Range(lo, lo + 1.0), seed, SourceCloud::UnitCube)
            .unwrap();
        prop_assert_eq!(inst.truth.outlier_count(), outlier_count(n, ratio));
        prop_assert_eq!(instance::from_json(&instance::to_json(&inst)).unwrap(), inst);
    }
}
