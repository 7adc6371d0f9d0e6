//! Binary and text formats for cubes, signatures, masks and detection maps.
//!
//! All binary formats are little-endian with a four-byte ASCII magic:
//!
//! | format | header                   | payload                                  |
//! |--------|--------------------------|------------------------------------------|
//! | `HSC1` | `h`, `v`, `d` as `u32`   | `h*v*d` `f32`, band-sequential           |
//! | `DMP1` | `h`, `v` as `u32`        | `h*v` `f32`, row-major                   |
//! | `GTM1` | `h`, `v` as `u32`        | `h*v` label bytes (0/1/2), row-major     |
//!
//! Values are held as `f64` in memory and narrowed to `f32` on disk.

mod envi;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use envi::read_envi;

use crate::data::{DetectionMap, Grid, GroundTruthMask, Hypercube, Label, Signature};
use crate::error::{Error, Result};

pub const HSC1_MAGIC: &[u8; 4] = b"HSC1";
pub const DMP1_MAGIC: &[u8; 4] = b"DMP1";
pub const GTM1_MAGIC: &[u8; 4] = b"GTM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Binary,
    Csv,
    Pgm16,
}

impl std::str::FromStr for MapFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "dmp1" => Ok(MapFormat::Binary),
            "csv" => Ok(MapFormat::Csv),
            "pgm16" | "pgm" => Ok(MapFormat::Pgm16),
            other => Err(Error::UnparseableValue {
                key: "format".into(),
                value: other.into(),
            }),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn dim(value: u32, name: &str) -> Result<usize> {
    if value == 0 {
        return Err(Error::MalformedHeader(format!("{name} must be positive")));
    }
    Ok(value as usize)
}

fn dim_u32(value: usize, name: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::InvalidParameter(format!("{name}={value} exceeds u32")))
}

/// Decodes `count` little-endian `f32` values, widening to `f64`.
fn decode_f32(payload: &[u8], count: usize) -> Result<Vec<f64>> {
    let found = payload.len() / 4;
    if found < count {
        return Err(Error::TruncatedData {
            expected: count,
            found,
        });
    }
    let values: Vec<f64> = payload[..count * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue(i));
    }
    Ok(values)
}

/// Narrows to `f32`; values that overflow to infinity are rejected.
fn encode_f32(out: &mut Vec<u8>, values: &[f64]) -> Result<()> {
    out.reserve(values.len() * 4);
    for (i, &x) in values.iter().enumerate() {
        let y = x as f32;
        if !y.is_finite() {
            return Err(Error::NonFiniteValue(i));
        }
        out.extend_from_slice(&y.to_le_bytes());
    }
    Ok(())
}

pub fn encode_hypercube(cube: &Hypercube) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + cube.data().len() * 4);
    out.extend_from_slice(HSC1_MAGIC);
    out.extend_from_slice(&dim_u32(cube.height(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(cube.width(), "width")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(cube.bands(), "bands")?.to_le_bytes());
    encode_f32(&mut out, cube.data())?;
    Ok(out)
}

pub fn decode_hypercube(bytes: &[u8]) -> Result<Hypercube> {
    if bytes.len() < 16 || &bytes[..4] != HSC1_MAGIC {
        return Err(Error::MalformedHeader("missing HSC1 magic or short header".into()));
    }
    let h = dim(u32_at(bytes, 4), "height")?;
    let v = dim(u32_at(bytes, 8), "width")?;
    let d = dim(u32_at(bytes, 12), "bands")?;
    let count = h
        .checked_mul(v)
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let data = decode_f32(&bytes[16..], count)?;
    Hypercube::new(h, v, d, data)
}

/// Reads a cube from either a native HSC1 file or an ENVI band-sequential
/// file (the data file or its `.hdr` sidecar).
pub fn read_hypercube(path: impl AsRef<Path>) -> Result<Hypercube> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.starts_with(HSC1_MAGIC) {
        return decode_hypercube(&bytes);
    }
    if bytes.starts_with(b"ENVI") {
        return read_envi(path);
    }
    if envi::sidecar_header(path).is_some() {
        return read_envi(path);
    }
    Err(Error::MalformedHeader(format!(
        "{} is neither HSC1 nor ENVI",
        path.display()
    )))
}

pub fn write_hypercube(cube: &Hypercube, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_hypercube(cube)?;
    write_bytes(path.as_ref(), &bytes)
}

pub fn parse_signature(text: &str) -> Result<Signature> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = match line.split_once(',') {
            Some((index, value)) => {
                index
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::UnparseableLine(lineno))?;
                value.trim()
            }
            None => line,
        };
        let x: f64 = field.parse().map_err(|_| Error::UnparseableLine(lineno))?;
        if !x.is_finite() {
            return Err(Error::UnparseableLine(lineno));
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(Error::EmptyFile);
    }
    Signature::new(values)
}

pub fn read_signature(path: impl AsRef<Path>) -> Result<Signature> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signature(&text)
}

/// Writes one value per line with round-trip precision.
pub fn write_signature(sig: &Signature, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::new();
    for x in sig.values() {
        text.push_str(&format!("{x:e}\n"));
    }
    write_bytes(path.as_ref(), text.as_bytes())
}

pub fn encode_mask(mask: &GroundTruthMask) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + mask.labels().len());
    out.extend_from_slice(GTM1_MAGIC);
    out.extend_from_slice(&dim_u32(mask.rows(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(mask.cols(), "width")?.to_le_bytes());
    out.extend(mask.labels().iter().map(|&l| l as u8));
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<GroundTruthMask> {
    if bytes.len() < 12 || &bytes[..4] != GTM1_MAGIC {
        return Err(Error::MalformedHeader("missing GTM1 magic or short header".into()));
    }
    let h = dim(u32_at(bytes, 4), "height")?;
    let v = dim(u32_at(bytes, 8), "width")?;
    let payload = &bytes[12..];
    if payload.len() < h * v {
        return Err(Error::TruncatedData {
            expected: h * v,
            found: payload.len(),
        });
    }
    let labels = payload[..h * v]
        .iter()
        .map(|&b| Label::try_from(b))
        .collect::<Result<Vec<_>>>()?;
    GroundTruthMask::new(h, v, labels)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<GroundTruthMask> {
    decode_mask(&read_bytes(path.as_ref())?)
}

pub fn write_mask(mask: &GroundTruthMask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask)?)
}

pub fn encode_detection_map(map: &DetectionMap) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + map.len() * 4);
    out.extend_from_slice(DMP1_MAGIC);
    out.extend_from_slice(&dim_u32(map.rows(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(map.cols(), "width")?.to_le_bytes());
    encode_f32(&mut out, map.data())?;
    Ok(out)
}

pub fn decode_detection_map(bytes: &[u8]) -> Result<DetectionMap> {
    if bytes.len() < 12 || &bytes[..4] != DMP1_MAGIC {
        return Err(Error::MalformedHeader("missing DMP1 magic or short header".into()));
    }
    let h = dim(u32_at(bytes, 4), "height")?;
    let v = dim(u32_at(bytes, 8), "width")?;
    let data = decode_f32(&bytes[12..], h * v)?;
    Grid::new(h, v, data)
}

pub fn read_detection_map(path: impl AsRef<Path>) -> Result<DetectionMap> {
    decode_detection_map(&read_bytes(path.as_ref())?)
}

/// Reads a map stored either as DMP1 or as CSV text.
pub fn read_map_any(path: impl AsRef<Path>) -> Result<DetectionMap> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.starts_with(DMP1_MAGIC) {
        return decode_detection_map(&bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::MalformedHeader(format!("{} is neither DMP1 nor CSV", path.display())))?;
    parse_map_csv(&text)
}

pub fn map_to_csv(map: &DetectionMap) -> String {
    let mut text = String::new();
    for r in 0..map.rows() {
        let line: Vec<String> = map.row(r).iter().map(|x| format!("{x}")).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    text
}

pub fn parse_map_csv(text: &str) -> Result<DetectionMap> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::UnparseableLine(i + 1))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(Error::UnparseableLine(i + 1)),
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or(Error::EmptyFile)?;
    Grid::new(rows, cols, data)
}

/// Binary 16-bit PGM (`P5`, big-endian samples) with the map linearly
/// rescaled from its `[min, max]` to `[0, 65535]`. A constant map renders
/// as all zeros.
pub fn map_to_pgm16(map: &DetectionMap) -> Vec<u8> {
    let (lo, hi) = map.min_max();
    let range = hi - lo;
    let mut out = format!("P5\n{} {}\n65535\n", map.cols(), map.rows()).into_bytes();
    out.reserve(map.len() * 2);
    for &x in map.data() {
        let level = if range > 0.0 {
            (((x - lo) / range) * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn write_detection_map(map: &DetectionMap, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MapFormat::Binary => encode_detection_map(map)?,
        MapFormat::Csv => map_to_csv(map).into_bytes(),
        MapFormat::Pgm16 => map_to_pgm16(map),
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}
