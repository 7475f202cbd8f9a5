//! Self-describing JSON dump of an instance, for exact replay.
//!
//! Floats are written in shortest round-trip form, so a dump reloads to a
//! bit-identical instance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CorrespondenceKind, CorrespondenceSet, Rotation, SimilarityTransform, Vec3};
use crate::synth::{GroundTruth, Instance};

pub const DUMP_FORMAT: &str = "icos-instance";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindTag {
    VectorPairs,
    PointPairs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransformDump {
    scale: f64,
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Dump {
    format: String,
    version: u32,
    kind: KindTag,
    seed: u64,
    sigma: f64,
    outlier_ratio: f64,
    transform: TransformDump,
    src: Vec<[f64; 3]>,
    dst: Vec<[f64; 3]>,
    inlier_mask: Vec<bool>,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn to_json(instance: &Instance) -> String {
    let t = &instance.truth.transform;
    let dump = Dump {
        format: DUMP_FORMAT.into(),
        version: DUMP_VERSION,
        kind: match instance.set.kind() {
            CorrespondenceKind::VectorPairs => KindTag::VectorPairs,
            CorrespondenceKind::PointPairs => KindTag::PointPairs,
        },
        seed: instance.seed,
        sigma: instance.truth.sigma,
        outlier_ratio: instance.outlier_ratio,
        transform: TransformDump { scale: t.scale, rotation: t.rotation.to_rows(), translation: arr(&t.translation) },
        src: instance.set.iter().map(|c| arr(&c.src)).collect(),
        dst: instance.set.iter().map(|c| arr(&c.dst)).collect(),
        inlier_mask: instance.truth.inlier_mask.clone(),
    };
    serde_json::to_string_pretty(&dump).expect("instance dump serializes")
}

pub fn from_json(text: &str) -> Result<Instance> {
    let dump: Dump = serde_json::from_str(text).map_err(|e| Error::UnsupportedFormat(format!("instance dump: {e}")))?;
    if dump.format != DUMP_FORMAT || dump.version != DUMP_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "expected {DUMP_FORMAT} v{DUMP_VERSION}, got {} v{}",
            dump.format, dump.version
        )));
    }
    if dump.src.len() != dump.dst.len() || dump.src.len() != dump.inlier_mask.len() {
        return Err(Error::UnsupportedFormat("src, dst and inlier_mask lengths differ".into()));
    }
    let kind = match dump.kind {
        KindTag::VectorPairs => CorrespondenceKind::VectorPairs,
        KindTag::PointPairs => CorrespondenceKind::PointPairs,
    };
    let pairs = dump.src.iter().zip(&dump.dst).map(|(s, d)| (Vec3::from(*s), Vec3::from(*d)));
    let set = CorrespondenceSet::new(kind, pairs)?;
    let transform = SimilarityTransform::new(
        dump.transform.scale,
        Rotation::from_rows(dump.transform.rotation)?,
        Vec3::from(dump.transform.translation),
    )?;
    Ok(Instance {
        set,
        truth: GroundTruth { kind, transform, inlier_mask: dump.inlier_mask, sigma: dump.sigma },
        seed: dump.seed,
        outlier_ratio: dump.outlier_ratio,
    })
}

pub fn save(path: impl AsRef<Path>, instance: &Instance) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(instance)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
