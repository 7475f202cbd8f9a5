//! 3D types and the closed-form solvers used by the samplers.
//!
//! Everything here is a pure function of its inputs. The non-minimal
//! solvers follow the usual centroid-demeaning recipe: demean both clouds,
//! estimate scale from norm ratios, rotation from the SVD of the
//! cross-covariance, and translation from the centroids.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Minimal configurations whose defining directions have a sine below this
/// are rejected as degenerate.
pub const PARALLEL_SINE: f64 = 1e-6;

/// Relative size of the second singular value of the cross-covariance below
/// which the configuration is treated as rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// A proper rotation (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `m` and wraps it. Accepts deviations from orthonormality up
    /// to 1e-6 in Frobenius norm, which is what round-tripping a rotation
    /// through text at 9 significant digits produces.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("rotation has non-finite entries".into()));
        }
        let dev = (m.transpose() * m - Matrix3::identity()).norm();
        if dev > 1e-6 || m.determinant() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "matrix is not a proper rotation (orthonormality deviation {dev:.3e}, det {:.6})",
                m.determinant()
            )));
        }
        Ok(Rotation(m))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Rotation(*Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation(*q.to_rotation_matrix().matrix())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// `self ∘ other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Row-major copy of the matrix entries.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    /// Frobenius deviation from orthonormality and the determinant.
    pub fn validity(&self) -> (f64, f64) {
        ((self.0.transpose() * self.0 - Matrix3::identity()).norm(), self.0.determinant())
    }
}

/// `p ↦ s·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Rotation, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Ok(SimilarityTransform { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        SimilarityTransform { scale: 1.0, rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.apply(p) + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrespondenceKind {
    /// Direction vectors; only their orientation matters.
    VectorPairs,
    /// Points in two frames related by a similarity transform.
    PointPairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub index: usize,
    pub src: Vec3,
    pub dst: Vec3,
}

impl Correspondence {
    pub fn unit_src(&self) -> Vec3 {
        self.src / self.src.norm()
    }

    pub fn unit_dst(&self) -> Vec3 {
        self.dst / self.dst.norm()
    }
}

/// Putative correspondences indexed `0..len()` in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    kind: CorrespondenceKind,
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    /// Ingests pairs, assigning indices in order. Non-finite coordinates are
    /// rejected for both kinds; zero-norm vectors are rejected for
    /// [`CorrespondenceKind::VectorPairs`] since they have no direction.
    pub fn new(kind: CorrespondenceKind, pairs: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<Self> {
        let mut items = Vec::new();
        for (index, (src, dst)) in pairs.into_iter().enumerate() {
            if !src.iter().chain(dst.iter()).all(|x| x.is_finite()) {
                return Err(Error::InvalidParameter(format!("correspondence {index} has non-finite coordinates")));
            }
            if kind == CorrespondenceKind::VectorPairs && (src.norm() == 0.0 || dst.norm() == 0.0) {
                return Err(Error::InvalidParameter(format!("correspondence {index} has a zero-norm vector")));
            }
            items.push(Correspondence { index, src, dst });
        }
        Ok(CorrespondenceSet { kind, items })
    }

    pub fn vector_pairs(pairs: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<Self> {
        Self::new(CorrespondenceKind::VectorPairs, pairs)
    }

    pub fn point_pairs(pairs: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<Self> {
        Self::new(CorrespondenceKind::PointPairs, pairs)
    }

    pub fn kind(&self) -> CorrespondenceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn get(&self, index: usize) -> &Correspondence {
        &self.items[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    fn require_kind(&self, kind: CorrespondenceKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidParameter(format!("expected {kind:?}, got {:?}", self.kind)));
        }
        Ok(())
    }

    fn subset_pairs(&self, subset: &[usize]) -> Result<Vec<(Vec3, Vec3)>> {
        subset
            .iter()
            .map(|&i| {
                self.items
                    .get(i)
                    .map(|c| (c.src, c.dst))
                    .ok_or_else(|| Error::InvalidParameter(format!("index {i} out of range")))
            })
            .collect()
    }
}

/// Rotation angle of `aᵀb`, in `[0, π]`.
///
/// Equal to `|arccos((tr(aᵀb) − 1)/2)|`, but evaluated as
/// `atan2(sin θ, cos θ)` with `sin θ` taken from the skew part of `aᵀb`,
/// since `arccos` loses about half the significant digits near 0 and π.
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.0.transpose() * b.0;
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = (skew.norm() / 2.0).min(1.0);
    sin.atan2(cos).abs()
}

/// Least-squares rotation taking each `src` onto its `dst`
/// (minimizes `Σ‖R·src − dst‖²`), reflection-corrected.
pub fn kabsch_rotation(pairs: &[(Vec3, Vec3)]) -> Result<Rotation> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateConfiguration("fewer than two pairs"));
    }
    let mut h = Matrix3::zeros();
    for (m, n) in pairs {
        h += m * n.transpose();
    }
    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateConfiguration("SVD did not converge"));
    };
    let s = svd.singular_values;
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= RANK_TOLERANCE * sorted[0] {
        return Err(Error::DegenerateConfiguration("cross-covariance has rank < 2"));
    }

    let mut v = v_t.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        let smallest = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        v.column_mut(smallest).neg_mut();
        r = v * u.transpose();
    }
    Ok(Rotation(refine_alignment(r, &h)))
}

/// One Newton step on `max tr(Rᵀ·Hᵀ)` about `r`. The SVD's singular vectors
/// lose accuracy when the second singular value is small (thin triangles);
/// the step restores full precision and is a no-op at the optimum.
fn refine_alignment(r: Matrix3<f64>, h: &Matrix3<f64>) -> Matrix3<f64> {
    let b = r.transpose() * h.transpose();
    let skew = b - b.transpose();
    let grad = Vec3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
    let sym = (b + b.transpose()) / 2.0;
    let hess = Matrix3::identity() * sym.trace() - sym;
    match hess.try_inverse() {
        Some(inv) => {
            let step = inv * grad;
            if step.norm() < 1e-3 {
                r * Rotation3::new(step).matrix()
            } else {
                r
            }
        }
        None => r,
    }
}

fn triad(a: &Vec3, b: &Vec3) -> Option<Matrix3<f64>> {
    let a = a.normalize();
    let b = b.normalize();
    let c = a.cross(&b);
    let sine = c.norm();
    if !(sine >= PARALLEL_SINE) {
        return None;
    }
    let c = c / sine;
    let d = a.cross(&c);
    Some(Matrix3::from_columns(&[a, c, d]))
}

/// Rotation taking the triad built from `(u1, u2)` onto the triad built from
/// `(v1, v2)`. `u1` is mapped exactly onto the direction of `v1`.
pub fn horn_pair_rotation(u1: &Vec3, v1: &Vec3, u2: &Vec3, v2: &Vec3) -> Result<Rotation> {
    let src = triad(u1, u2).ok_or(Error::DegenerateConfiguration("source directions are parallel"))?;
    let dst = triad(v1, v2).ok_or(Error::DegenerateConfiguration("target directions are parallel"))?;
    Ok(Rotation(dst * src.transpose()))
}

/// Minimal 3-point rotation: demean each triple and align with
/// [`kabsch_rotation`]. Invariant to any positive scaling of `q`.
pub fn horn_triple_rotation(p: &[Vec3; 3], q: &[Vec3; 3]) -> Result<Rotation> {
    if collinear(&p[0], &p[1], &p[2]) {
        return Err(Error::DegenerateConfiguration("source points are collinear"));
    }
    let pc = (p[0] + p[1] + p[2]) / 3.0;
    let qc = (q[0] + q[1] + q[2]) / 3.0;
    let pairs = [(p[0] - pc, q[0] - qc), (p[1] - pc, q[1] - qc), (p[2] - pc, q[2] - qc)];
    kabsch_rotation(&pairs)
}

/// True when the three points are coincident or lie (numerically) on a line.
pub fn collinear(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let ab = b - a;
    let ac = c - a;
    let (lab, lac) = (ab.norm(), ac.norm());
    if lab == 0.0 || lac == 0.0 {
        return true;
    }
    !(ab.cross(&ac).norm() >= PARALLEL_SINE * lab * lac)
}

pub fn centroid(points: &[Vec3]) -> Result<Vec3> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(points.iter().sum::<Vec3>() / points.len() as f64)
}

/// Subtracts the centroid from every point. Returns `(centered, centroid)`.
pub fn demean(points: &[Vec3]) -> Result<(Vec<Vec3>, Vec3)> {
    let c = centroid(points)?;
    Ok((points.iter().map(|p| p - c).collect(), c))
}

/// Weighted mean of the norm ratios `‖n‖/‖m‖` over demeaned pairs, with
/// weights `‖m‖²`.
pub fn weighted_scale(pairs: &[(Vec3, Vec3)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, n) in pairs {
        let lm = m.norm();
        if lm == 0.0 {
            return Err(Error::DivisionByZero("source vector has zero norm"));
        }
        let w = lm * lm;
        num += w * (n.norm() / lm);
        den += w;
    }
    Ok(num / den)
}

pub fn recover_translation(scale: f64, rotation: &Rotation, src_centroid: &Vec3, dst_centroid: &Vec3) -> Vec3 {
    dst_centroid - scale * rotation.apply(src_centroid)
}

/// Least-squares rotation over raw (not demeaned) vector pairs.
pub fn solve_rotation_nonminimal(set: &CorrespondenceSet, subset: &[usize]) -> Result<Rotation> {
    set.require_kind(CorrespondenceKind::VectorPairs)?;
    if subset.len() < 2 {
        return Err(Error::DegenerateConfiguration("fewer than two correspondences"));
    }
    kabsch_rotation(&set.subset_pairs(subset)?)
}

/// Scale (unless `known_scale` is given), rotation and translation over the
/// selected point pairs.
pub fn solve_transform_nonminimal(
    set: &CorrespondenceSet,
    subset: &[usize],
    known_scale: Option<f64>,
) -> Result<SimilarityTransform> {
    set.require_kind(CorrespondenceKind::PointPairs)?;
    if subset.len() < 3 {
        return Err(Error::DegenerateConfiguration("fewer than three correspondences"));
    }
    let pairs = set.subset_pairs(subset)?;
    let src: Vec<Vec3> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Vec3> = pairs.iter().map(|p| p.1).collect();
    let (src_c, src_mean) = demean(&src)?;
    let (dst_c, dst_mean) = demean(&dst)?;
    let centered: Vec<(Vec3, Vec3)> = src_c.into_iter().zip(dst_c).collect();

    let scale = match known_scale {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::InvalidParameter(format!("known scale must be positive, got {s}"))),
        None => weighted_scale(&centered)?,
    };
    let rotation = kabsch_rotation(&centered)?;
    let translation = recover_translation(scale, &rotation, &src_mean, &dst_mean);
    Ok(SimilarityTransform { scale, rotation, translation })
}
