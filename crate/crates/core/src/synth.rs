//! Synthetic benchmark instances with ground truth.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{CorrespondenceKind, CorrespondenceSet, Rotation, SimilarityTransform, Vec3};
use crate::rng::{gaussian_vector, random_rotation, random_unit_vector, seeded, SolverRng};

/// Largest generative residual allowed for a masked inlier, in sigmas.
/// Noise draws beyond it are redrawn.
pub const NOISE_TRUNCATION_SIGMAS: f64 = 6.0;

/// Largest translation norm of generated registration instances.
pub const MAX_TRANSLATION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub kind: CorrespondenceKind,
    /// Scale 1 and zero translation for rotation search.
    pub transform: SimilarityTransform,
    pub inlier_mask: Vec<bool>,
    pub sigma: f64,
}

impl GroundTruth {
    pub fn rotation(&self) -> Rotation {
        self.transform.rotation
    }

    pub fn inlier_indices(&self) -> Vec<usize> {
        self.inlier_mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|m| !**m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub set: CorrespondenceSet,
    pub truth: GroundTruth,
    pub seed: u64,
    pub outlier_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    Fixed(f64),
    /// Uniform in `[lo, hi)`.
    Range(f64, f64),
}

impl ScaleMode {
    fn validate(self) -> Result<()> {
        let ok = match self {
            ScaleMode::Fixed(s) => s > 0.0 && s.is_finite(),
            ScaleMode::Range(lo, hi) => lo > 0.0 && hi > lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid scale mode {self:?}")))
        }
    }

    fn draw(self, rng: &mut SolverRng) -> f64 {
        match self {
            ScaleMode::Fixed(s) => s,
            ScaleMode::Range(lo, hi) => rng.random_range(lo..hi),
        }
    }
}

/// Where registration source points come from.
#[derive(Debug, Clone, Copy)]
pub enum SourceCloud<'a> {
    /// Uniform in `[-0.5, 0.5]³`.
    UnitCube,
    /// Downsampled to `n` points and rescaled into the unit cube.
    Points(&'a [Vec3]),
}

/// Number of outliers for `ratio` of `n`, robust to the ratio not being
/// exactly representable (0.99·1000 is 990).
pub fn outlier_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) + 1e-9).floor() as usize
}

fn validate(n: usize, sigma: f64, ratio: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("n must be at least 3, got {n}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("outlier ratio must lie in [0,1), got {ratio}")));
    }
    Ok(())
}

fn bounded_noise(rng: &mut SolverRng, sigma: f64) -> Vec3 {
    loop {
        let e = gaussian_vector(rng, sigma);
        if e.norm() <= NOISE_TRUNCATION_SIGMAS * sigma {
            return e;
        }
    }
}

/// Inlier mask with exactly `outlier_count(n, ratio)` uniformly placed
/// `false` entries.
fn draw_mask(rng: &mut SolverRng, n: usize, ratio: f64) -> Vec<bool> {
    let mut mask = vec![true; n];
    for i in sample(rng, n, outlier_count(n, ratio)) {
        mask[i] = false;
    }
    mask
}

/// Unit source vectors, `dst = R·src + ε`, and outlier targets replaced by
/// random unit vectors.
pub fn gen_rotation_instance(n: usize, sigma: f64, outlier_ratio: f64, seed: u64) -> Result<Instance> {
    validate(n, sigma, outlier_ratio)?;
    let mut rng = seeded(seed);
    let rotation = random_rotation(&mut rng);
    let mask = draw_mask(&mut rng, n, outlier_ratio);
    let mut pairs = Vec::with_capacity(n);
    for &inlier in &mask {
        let src = random_unit_vector(&mut rng);
        let dst =
            if inlier { rotation.apply(&src) + bounded_noise(&mut rng, sigma) } else { random_unit_vector(&mut rng) };
        pairs.push((src, dst));
    }
    Ok(Instance {
        set: CorrespondenceSet::vector_pairs(pairs)?,
        truth: GroundTruth {
            kind: CorrespondenceKind::VectorPairs,
            transform: SimilarityTransform::new(1.0, rotation, Vec3::zeros())?,
            inlier_mask: mask,
            sigma,
        },
        seed,
        outlier_ratio,
    })
}

/// `Q = s·R·P + t + ε` with outlier targets replaced by points uniform in a
/// ball of diameter `s·√3` around the transformed source centroid.
pub fn gen_registration_instance(
    n: usize,
    sigma: f64,
    outlier_ratio: f64,
    scale: ScaleMode,
    seed: u64,
    source: SourceCloud<'_>,
) -> Result<Instance> {
    validate(n, sigma, outlier_ratio)?;
    scale.validate()?;
    let mut rng = seeded(seed);
    let s = scale.draw(&mut rng);
    let rotation = random_rotation(&mut rng);
    let translation = random_unit_vector(&mut rng) * rng.random_range(0.0..=MAX_TRANSLATION);
    let transform = SimilarityTransform::new(s, rotation, translation)?;
    let mask = draw_mask(&mut rng, n, outlier_ratio);

    let src: Vec<Vec3> = match source {
        SourceCloud::UnitCube => (0..n).map(|_| Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5))).collect(),
        SourceCloud::Points(points) => downsample_and_rescale(points, n, &mut rng)?,
    };
    let centroid = src.iter().sum::<Vec3>() / n as f64;
    let center = transform.apply(&centroid);
    let radius = 0.5 * s * 3f64.sqrt();

    let pairs: Vec<(Vec3, Vec3)> = src
        .iter()
        .zip(&mask)
        .map(|(p, &inlier)| {
            let q = if inlier {
                transform.apply(p) + bounded_noise(&mut rng, sigma)
            } else {
                center + uniform_in_ball(&mut rng, radius)
            };
            (*p, q)
        })
        .collect();
    Ok(Instance {
        set: CorrespondenceSet::point_pairs(pairs)?,
        truth: GroundTruth { kind: CorrespondenceKind::PointPairs, transform, inlier_mask: mask, sigma },
        seed,
        outlier_ratio,
    })
}

fn uniform_in_ball(rng: &mut SolverRng, radius: f64) -> Vec3 {
    let u: f64 = rng.random();
    random_unit_vector(rng) * radius * u.cbrt()
}

/// Uniform subset of `target_n` points (in draw order), translated and
/// uniformly scaled so the bounding box is centered at the origin with
/// largest extent 1.
pub fn downsample_and_rescale<R: Rng + ?Sized>(points: &[Vec3], target_n: usize, rng: &mut R) -> Result<Vec<Vec3>> {
    if target_n == 0 || target_n > points.len() {
        return Err(Error::InvalidParameter(format!("cannot draw {target_n} of {} points", points.len())));
    }
    let picked: Vec<Vec3> = sample(rng, points.len(), target_n).into_iter().map(|i| points[i]).collect();
    rescale_to_unit_cube(&picked)
}

pub fn rescale_to_unit_cube(points: &[Vec3]) -> Result<Vec<Vec3>> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let extent = (hi - lo).max();
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::DegenerateConfiguration("point cloud has zero extent"));
    }
    let center = (lo + hi) / 2.0;
    Ok(points.iter().map(|p| (p - center) / extent).collect())
}
