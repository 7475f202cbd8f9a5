//! Vertex positions from PLY files.
//!
//! Reads `ascii 1.0` and `binary_little_endian 1.0` files whose first
//! element is `vertex` with scalar properties including `x`, `y`, `z`.
//! Other vertex properties (colors, normals) are skipped. List properties
//! on the vertex element and big-endian files are rejected. Elements after
//! the vertices are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    format: Format,
    vertex_count: usize,
    properties: Vec<Scalar>,
    /// Positions of x, y, z within `properties`.
    xyz: [usize; 3],
    body_offset: usize,
}

fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedFormat(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header";
    let end = bytes.windows(END.len()).position(|w| w == END).ok_or_else(|| unsupported("missing end_header"))?;
    let mut body_offset = end + END.len();
    if bytes.get(body_offset) == Some(&b'\r') {
        body_offset += 1;
    }
    if bytes.get(body_offset) != Some(&b'\n') {
        return Err(unsupported("end_header not followed by newline"));
    }
    body_offset += 1;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| unsupported("header is not UTF-8"))?;

    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(unsupported("missing ply magic"));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut properties = Vec::new();
    let mut names = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", "1.0"] => format = Some(Format::BinaryLittleEndian),
            ["format", other, ..] => return Err(unsupported(format!("format {other}"))),
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| unsupported(format!("bad element count {count}")))?;
                if vertex_count.is_none() {
                    if *name != "vertex" {
                        return Err(unsupported(format!("first element is {name}, expected vertex")));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
            }
            ["property", "list", ..] if in_vertex => return Err(unsupported("list property on vertex element")),
            ["property", ty, name] if in_vertex => {
                properties.push(Scalar::parse(ty).ok_or_else(|| unsupported(format!("property type {ty}")))?);
                names.push(*name);
            }
            ["property", ..] if vertex_count.is_some() => {}
            _ => return Err(unsupported(format!("unexpected header line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| unsupported("missing format line"))?;
    let vertex_count = vertex_count.ok_or_else(|| unsupported("missing vertex element"))?;
    let find = |axis: &str| {
        names.iter().position(|n| *n == axis).ok_or_else(|| unsupported(format!("vertex has no {axis} property")))
    };
    Ok(Header { format, vertex_count, properties, xyz: [find("x")?, find("y")?, find("z")?], body_offset })
}

/// Parses PLY bytes.
pub fn parse_ply(bytes: &[u8]) -> Result<Vec<Vec3>> {
    let h = parse_header(bytes)?;
    let body = &bytes[h.body_offset..];
    let mut points = Vec::with_capacity(h.vertex_count);
    match h.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| unsupported("ASCII body is not UTF-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for v in 0..h.vertex_count {
                let line = lines.next().ok_or_else(|| unsupported(format!("file ends at vertex {v}")))?;
                let values: Vec<&str> = line.split_whitespace().collect();
                if values.len() < h.properties.len() {
                    return Err(unsupported(format!("vertex {v} has {} values", values.len())));
                }
                let coord = |k: usize| {
                    values[h.xyz[k]]
                        .parse::<f64>()
                        .map_err(|_| unsupported(format!("vertex {v}: bad number {:?}", values[h.xyz[k]])))
                };
                points.push(Vec3::new(coord(0)?, coord(1)?, coord(2)?));
            }
        }
        Format::BinaryLittleEndian => {
            let offsets: Vec<usize> = h
                .properties
                .iter()
                .scan(0, |acc, s| {
                    let o = *acc;
                    *acc += s.size();
                    Some(o)
                })
                .collect();
            let stride: usize = h.properties.iter().map(|s| s.size()).sum();
            if body.len() < stride * h.vertex_count {
                return Err(unsupported("binary body shorter than vertex count"));
            }
            for record in body.chunks_exact(stride).take(h.vertex_count) {
                let coord = |k: usize| {
                    let p = h.xyz[k];
                    h.properties[p].read_le(&record[offsets[p]..])
                };
                points.push(Vec3::new(coord(0), coord(1), coord(2)));
            }
        }
    }
    Ok(points)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

/// ASCII PLY with coordinates at 9 significant digits.
pub fn to_ascii_ply(points: &[Vec3]) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    for p in points {
        s.push_str(&format!("{:.8e} {:.8e} {:.8e}\n", p.x, p.y, p.z));
    }
    s
}

/// Binary little-endian PLY with double coordinates.
pub fn to_binary_ply(points: &[Vec3]) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )
    .into_bytes();
    for p in points {
        for v in p.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_ply(path: impl AsRef<Path>, points: &[Vec3]) -> Result<()> {
    write_bytes(path.as_ref(), to_ascii_ply(points).as_bytes())
}

pub fn save_ply_binary(path: impl AsRef<Path>, points: &[Vec3]) -> Result<()> {
    write_bytes(path.as_ref(), &to_binary_ply(points))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vector, seeded};

    #[test]
    fn minimal_ascii() {
        let text = "ply\nformat ascii 1.0\ncomment tiny\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 2 3\n-1.5 0.25 4e2\n";
        let pts = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(pts, vec![Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.5, 0.25, 400.0)]);
    }

    #[test]
    fn skips_extra_properties_and_elements() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty uchar red\nproperty float z\nproperty float y\nproperty float x\nproperty float nx\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n255 3 2 1 0.5\n0 6 5 4 0.5\n3 0 1 1\n";
        let pts = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(pts, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn ascii_round_trip() {
        let mut rng = seeded(1);
        let pts: Vec<Vec3> = (0..1000).map(|_| gaussian_vector(&mut rng, 3.0)).collect();
        let back = parse_ply(to_ascii_ply(&pts).as_bytes()).unwrap();
        assert_eq!(back.len(), 1000);
        for (a, b) in pts.iter().zip(&back) {
            assert!((a - b).amax() <= 1e-8 * a.amax().max(1.0));
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let mut rng = seeded(2);
        let pts: Vec<Vec3> = (0..100).map(|_| gaussian_vector(&mut rng, 1.0)).collect();
        assert_eq!(parse_ply(&to_binary_ply(&pts)).unwrap(), pts);
    }

    #[test]
    fn binary_float_with_padding_properties() {
        let mut bytes = b"ply\r\nformat binary_little_endian 1.0\r\nelement vertex 2\r\nproperty float x\r\nproperty float y\r\nproperty float z\r\nproperty uchar alpha\r\nend_header\r\n".to_vec();
        for v in [[1.0f32, 2.0, 3.0], [-4.0, 0.5, 8.0]] {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            bytes.push(7);
        }
        let pts = parse_ply(&bytes).unwrap();
        assert_eq!(pts, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.0, 0.5, 8.0)]);
    }

    #[test]
    fn malformed_headers() {
        let cases: [&[u8]; 7] = [
            b"plx\nformat ascii 1.0\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n",
            b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            b"ply\nformat ascii 1.0\nelement face 1\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty list uchar float x\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n",
        ];
        for bytes in cases {
            assert!(matches!(parse_ply(bytes), Err(Error::UnsupportedFormat(_))), "{}", String::from_utf8_lossy(bytes));
        }
    }

    #[test]
    fn file_round_trip_and_missing_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        let pts = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1e-7, -2.5, 1e6)];
        save_ply(&path, &pts).unwrap();
        let back = load_ply(&path).unwrap();
        for (a, b) in pts.iter().zip(&back) {
            assert!((a - b).amax() <= 1e-8 * a.amax());
        }
        let bin = dir.path().join("cloud_bin.ply");
        save_ply_binary(&bin, &pts).unwrap();
        assert_eq!(load_ply(&bin).unwrap(), pts);

        let missing = dir.path().join("nope.ply");
        let err = load_ply(&missing).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nope.ply"));
    }
}
