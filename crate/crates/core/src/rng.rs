//! Seeded randomness shared by the samplers, baselines and generators.
//!
//! All randomness flows from [`SolverRng`] (ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`), whose output stream is fixed across
//! platforms. Index draws use the explicit skip-mapping in
//! [`draw_excluding`], so a given seed yields the same subsets everywhere.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Rotation, Vec3};

pub type SolverRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one benchmark cell:
/// `splitmix64(splitmix64(master ^ splitmix64(ratio_index)) ^ run_index)`.
pub fn derive_seed(master: u64, ratio_index: u64, run_index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(ratio_index)) ^ run_index)
}

/// Uniform rotation: a normalized 4D standard-normal sample is uniform on S³,
/// and its unit quaternion is uniform on SO(3).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = Quaternion::new(c[0], c[1], c[2], c[3]);
        if q.norm() > 1e-12 {
            return Rotation::from_quaternion(&UnitQuaternion::from_quaternion(q));
        }
    }
}

/// Uniform direction on S².
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = gaussian_vector(rng, 1.0);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Isotropic Gaussian with per-axis standard deviation `sigma`.
pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    Vec3::new(
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Uniform draw from `0..n` skipping every index in `excluded`, which must be
/// sorted ascending and duplicate-free. Draws `k` from
/// `0..n - excluded.len()` and shifts it past each excluded index in turn.
pub fn draw_excluding<R: Rng + ?Sized>(rng: &mut R, n: usize, excluded: &[usize]) -> usize {
    debug_assert!(excluded.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(excluded.len() < n);
    let mut k = rng.random_range(0..n - excluded.len());
    for &e in excluded {
        if k >= e {
            k += 1;
        }
    }
    k
}

/// `m` distinct indices from `0..n`, in draw order.
pub fn draw_distinct<R: Rng + ?Sized, const M: usize>(rng: &mut R, n: usize) -> [usize; M] {
    let mut out = [0usize; M];
    let mut taken = [0usize; M];
    for slot in 0..M {
        let idx = draw_excluding(rng, n, &taken[..slot]);
        out[slot] = idx;
        taken[slot] = idx;
        taken[..=slot].sort_unstable();
    }
    out
}
