//! Point-cloud ingest, quantization, and the inverse mappings.
//!
//! Supported interchange formats are the KITTI velodyne binary layout
//! (flat little-endian `f32` records of x, y, z, intensity) and PLY with
//! float x/y/z vertex properties. Intensity is parsed and discarded; the
//! codec compresses geometry only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::coords::{Coord, CoordSet};
use crate::error::{Error, Result};
use crate::morton;

/// Raw floating-point positions in meters, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCloud {
    pub points: Vec<[f32; 3]>,
}

impl RawCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    KittiBin,
    PlyAscii,
    PlyBinary,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Normalize into a 400 m cube centered at the origin, then scale to the
    /// `2^L - 1` lattice. Out-of-box points are clipped and counted.
    BboxNorm,
    /// Multiply by a fixed scale (posQ folded in) and shift non-negative.
    ScalePosq,
}

/// Invertible lattice mapping between raw coordinates and voxel indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantTransform {
    pub mode: QuantMode,
    pub scale: f64,
    pub offset: [i64; 3],
    pub precision_l: u8,
}

pub const BBOX_HALF: f64 = 200.0;
pub const BBOX_SIZE: f64 = 400.0;

impl QuantTransform {
    pub fn bbox_norm(precision_l: u8) -> QuantTransform {
        QuantTransform {
            mode: QuantMode::BboxNorm,
            scale: BBOX_SIZE,
            offset: [0; 3],
            precision_l,
        }
    }

    /// SCALE_POSQ transform with the offset chosen from the data so the
    /// minimum quantized coordinate is exactly 0 on each axis.
    pub fn scale_posq_for(cloud: &RawCloud, scale: f64, precision_l: u8) -> Result<QuantTransform> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let mut offset = [i64::MAX; 3];
        for p in &cloud.points {
            for a in 0..3 {
                let v = (p[a] as f64 * scale).floor() as i64;
                offset[a] = offset[a].min(v);
            }
        }
        Ok(QuantTransform {
            mode: QuantMode::ScalePosq,
            scale,
            offset: [-offset[0], -offset[1], -offset[2]],
            precision_l,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.precision_l < 1 || self.precision_l > morton::MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "precision L={} outside [1, {}]",
                self.precision_l,
                morton::MAX_LEVEL
            )));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        Ok(())
    }
}

/// Deduplicated voxel coordinates plus the transform that produced them.
#[derive(Debug, Clone)]
pub struct QuantizedCloud {
    pub coords: CoordSet,
    pub transform: QuantTransform,
}

impl QuantizedCloud {
    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Outcome of quantization; `clipped` counts points forced back into the box.
#[derive(Debug, Clone)]
pub struct QuantizeReport {
    pub cloud: QuantizedCloud,
    pub clipped: usize,
}

fn detect_format(path: &Path) -> Result<PointFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => Ok(PointFormat::KittiBin),
        Some("ply") => {
            // Sniff the header to pick ASCII vs binary.
            let mut head = [0u8; 256];
            let mut f = File::open(path)?;
            let n = f.read(&mut head)?;
            let text = String::from_utf8_lossy(&head[..n]);
            if text.contains("format ascii") {
                Ok(PointFormat::PlyAscii)
            } else {
                Ok(PointFormat::PlyBinary)
            }
        }
        other => Err(Error::UnknownExtension(
            other.unwrap_or("<none>").to_string(),
        )),
    }
}

pub fn load_points(path: &Path, format: PointFormat) -> Result<RawCloud> {
    let format = match format {
        PointFormat::Auto => detect_format(path)?,
        f => f,
    };
    match format {
        PointFormat::KittiBin => load_kitti_bin(path),
        PointFormat::PlyAscii | PointFormat::PlyBinary => ply::load(path),
        PointFormat::Auto => unreachable!(),
    }
}

pub fn save_points(cloud: &RawCloud, path: &Path, format: PointFormat) -> Result<()> {
    let format = match format {
        PointFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => PointFormat::KittiBin,
            Some("ply") => PointFormat::PlyBinary,
            other => return Err(Error::UnknownExtension(other.unwrap_or("<none>").into())),
        },
        f => f,
    };
    match format {
        PointFormat::KittiBin => save_kitti_bin(cloud, path),
        PointFormat::PlyAscii => ply::save_ascii(cloud, path),
        PointFormat::PlyBinary => ply::save_binary(cloud, path),
        PointFormat::Auto => unreachable!(),
    }
}

fn load_kitti_bin(path: &Path) -> Result<RawCloud> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(Error::TruncatedInput("empty KITTI .bin file".into()));
    }
    if bytes.len() % 16 != 0 {
        return Err(Error::TruncatedInput(format!(
            "KITTI .bin length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for rec in bytes.chunks_exact(16) {
        let x = f32::from_le_bytes(rec[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(rec[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(rec[8..12].try_into().unwrap());
        // rec[12..16] is intensity; dropped.
        points.push([x, y, z]);
    }
    Ok(RawCloud { points })
}

fn save_kitti_bin(cloud: &RawCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in &cloud.points {
        for v in p {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&0.0f32.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

mod ply {
    use super::*;

    #[derive(Clone, Copy)]
    enum Scalar {
        F32,
        F64,
        I8,
        U8,
        I16,
        U16,
        I32,
        U32,
    }

    impl Scalar {
        fn parse(s: &str) -> Option<Scalar> {
            Some(match s {
                "float" | "float32" => Scalar::F32,
                "double" | "float64" => Scalar::F64,
                "char" | "int8" => Scalar::I8,
                "uchar" | "uint8" => Scalar::U8,
                "short" | "int16" => Scalar::I16,
                "ushort" | "uint16" => Scalar::U16,
                "int" | "int32" => Scalar::I32,
                "uint" | "uint32" => Scalar::U32,
                _ => return None,
            })
        }
        fn size(self) -> usize {
            match self {
                Scalar::I8 | Scalar::U8 => 1,
                Scalar::I16 | Scalar::U16 => 2,
                Scalar::F32 | Scalar::I32 | Scalar::U32 => 4,
                Scalar::F64 => 8,
            }
        }
        fn read_f32(self, b: &[u8]) -> f32 {
            match self {
                Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()),
                Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()) as f32,
                Scalar::I8 => b[0] as i8 as f32,
                Scalar::U8 => b[0] as f32,
                Scalar::I16 => i16::from_le_bytes(b[..2].try_into().unwrap()) as f32,
                Scalar::U16 => u16::from_le_bytes(b[..2].try_into().unwrap()) as f32,
                Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f32,
                Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f32,
            }
        }
    }

    struct Header {
        ascii: bool,
        vertex_count: usize,
        /// (type, byte offset within record) for x, y, z
        xyz: [(Scalar, usize); 3],
        record_size: usize,
        header_len: usize,
        ascii_fields: [usize; 3],
        ascii_field_count: usize,
    }

    fn parse_header(bytes: &[u8]) -> Result<Header> {
        let mut pos = 0;
        let mut lines = Vec::new();
        // Header lines are newline-terminated ASCII up to "end_header".
        loop {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Malformed("PLY header not terminated".into()))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end])
                .map_err(|_| Error::Malformed("non-UTF8 PLY header".into()))?
                .trim_end_matches('\r')
                .to_string();
            pos += end + 1;
            let done = line == "end_header";
            lines.push(line);
            if done {
                break;
            }
            if pos >= bytes.len() {
                return Err(Error::TruncatedInput("PLY header truncated".into()));
            }
        }
        if lines.first().map(|s| s.as_str()) != Some("ply") {
            return Err(Error::Malformed("missing 'ply' magic line".into()));
        }
        let mut ascii = None;
        let mut vertex_count = None;
        let mut in_vertex = false;
        let mut props: Vec<(Scalar, String)> = Vec::new();
        for line in &lines[1..] {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("format") => match it.next() {
                    Some("ascii") => ascii = Some(true),
                    Some("binary_little_endian") => ascii = Some(false),
                    other => {
                        return Err(Error::Malformed(format!(
                            "unsupported PLY format {:?}",
                            other
                        )))
                    }
                },
                Some("element") => {
                    let name = it.next().unwrap_or("");
                    if name == "vertex" {
                        in_vertex = true;
                        let n = it
                            .next()
                            .and_then(|v| v.parse::<usize>().ok())
                            .ok_or_else(|| Error::Malformed("bad vertex count".into()))?;
                        vertex_count = Some(n);
                    } else {
                        in_vertex = false;
                    }
                }
                Some("property") if in_vertex => {
                    let ty = it.next().unwrap_or("");
                    if ty == "list" {
                        return Err(Error::Malformed(
                            "list properties in vertex element are unsupported".into(),
                        ));
                    }
                    let sc = Scalar::parse(ty)
                        .ok_or_else(|| Error::Malformed(format!("unknown PLY type {ty}")))?;
                    let name = it.next().unwrap_or("").to_string();
                    props.push((sc, name));
                }
                _ => {}
            }
        }
        let ascii = ascii.ok_or_else(|| Error::Malformed("missing PLY format line".into()))?;
        let vertex_count =
            vertex_count.ok_or_else(|| Error::Malformed("missing vertex element".into()))?;
        let mut xyz = [None; 3];
        let mut fields = [0usize; 3];
        let mut off = 0;
        for (i, (sc, name)) in props.iter().enumerate() {
            let axis = match name.as_str() {
                "x" => Some(0),
                "y" => Some(1),
                "z" => Some(2),
                _ => None,
            };
            if let Some(a) = axis {
                xyz[a] = Some((*sc, off));
                fields[a] = i;
            }
            off += sc.size();
        }
        let xyz = match (xyz[0], xyz[1], xyz[2]) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => return Err(Error::Malformed("PLY vertex lacks x/y/z".into())),
        };
        Ok(Header {
            ascii,
            vertex_count,
            xyz,
            record_size: off,
            header_len: pos,
            ascii_fields: fields,
            ascii_field_count: props.len(),
        })
    }

    pub fn load(path: &Path) -> Result<RawCloud> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let h = parse_header(&bytes)?;
        let body = &bytes[h.header_len..];
        let mut points = Vec::with_capacity(h.vertex_count);
        if h.ascii {
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::Malformed("non-UTF8 PLY body".into()))?;
            for line in text.lines().take(h.vertex_count) {
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() < h.ascii_field_count {
                    return Err(Error::TruncatedInput("short PLY ASCII record".into()));
                }
                let mut p = [0f32; 3];
                for a in 0..3 {
                    p[a] = vals[h.ascii_fields[a]]
                        .parse::<f32>()
                        .map_err(|_| Error::Malformed("bad PLY ASCII number".into()))?;
                }
                points.push(p);
            }
            if points.len() < h.vertex_count {
                return Err(Error::TruncatedInput("missing PLY ASCII records".into()));
            }
        } else {
            let need = h.record_size * h.vertex_count;
            if body.len() < need {
                return Err(Error::TruncatedInput(format!(
                    "PLY body has {} bytes, need {}",
                    body.len(),
                    need
                )));
            }
            for rec in body.chunks_exact(h.record_size).take(h.vertex_count) {
                let mut p = [0f32; 3];
                for a in 0..3 {
                    let (sc, off) = h.xyz[a];
                    p[a] = sc.read_f32(&rec[off..]);
                }
                points.push(p);
            }
        }
        Ok(RawCloud { points })
    }

    fn header(cloud: &RawCloud, ascii: bool) -> String {
        format!(
            "ply\nformat {} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            if ascii { "ascii" } else { "binary_little_endian" },
            cloud.points.len()
        )
    }

    pub fn save_ascii(cloud: &RawCloud, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(header(cloud, true).as_bytes())?;
        for p in &cloud.points {
            // `{}` on f32 prints the shortest round-trip representation.
            writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_binary(cloud: &RawCloud, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(header(cloud, false).as_bytes())?;
        for p in &cloud.points {
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Quantizes a raw cloud onto the transform's lattice, deduplicating and
/// Morton-sorting the result. Rounding is half-to-even throughout.
pub fn quantize_points(cloud: &RawCloud, transform: &QuantTransform) -> Result<QuantizeReport> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    transform.validate()?;
    let max = (1u64 << transform.precision_l) - 1;
    let mut clipped = 0usize;
    let mut coords = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let mut c = [0u32; 3];
        let mut was_clipped = false;
        for a in 0..3 {
            let v = match transform.mode {
                QuantMode::BboxNorm => {
                    ((p[a] as f64 + BBOX_HALF) / BBOX_SIZE * max as f64).round_ties_even() as i64
                }
                QuantMode::ScalePosq => {
                    (p[a] as f64 * transform.scale).floor() as i64 + transform.offset[a]
                }
            };
            let vc = v.clamp(0, max as i64);
            if vc != v {
                was_clipped = true;
            }
            c[a] = vc as u32;
        }
        if was_clipped {
            clipped += 1;
        }
        coords.push(Coord(c));
    }
    Ok(QuantizeReport {
        cloud: QuantizedCloud {
            coords: CoordSet::from_unsorted(coords),
            transform: *transform,
        },
        clipped,
    })
}

/// Exact inverse of the lattice mapping (cell centers under BBOX_NORM).
pub fn dequantize_points(cloud: &QuantizedCloud) -> RawCloud {
    let t = &cloud.transform;
    let max = ((1u64 << t.precision_l) - 1) as f64;
    let points = cloud
        .coords
        .iter()
        .map(|c| {
            let mut p = [0f32; 3];
            for a in 0..3 {
                p[a] = match t.mode {
                    QuantMode::BboxNorm => {
                        (c.0[a] as f64 / max * BBOX_SIZE - BBOX_HALF) as f32
                    }
                    QuantMode::ScalePosq => {
                        ((c.0[a] as i64 - t.offset[a]) as f64 / t.scale) as f32
                    }
                };
            }
            p
        })
        .collect();
    RawCloud { points }
}
