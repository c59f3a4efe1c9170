//! Binary image stacks with key=value sidecar metadata.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `ASPI`               |
//! | 4      | 2    | format version (1)         |
//! | 6      | 4    | plane count                |
//! | 10     | 4    | width                      |
//! | 14     | 4    | height                     |
//! | 18     | 1    | dtype (0 = f32)            |
//! | 19     | 13   | reserved, zero             |
//! | 32     | ...  | planes, row-major f32 LE   |
//!
//! Metadata lives next to the stack in `<path>.meta`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{AspiError, Result};
use crate::frame::Frame;

pub const MAGIC: &[u8; 4] = b"ASPI";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const DTYPE_F32: u8 = 0;

/// Ordered key=value metadata.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata(BTreeMap<String, String>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| AspiError::Metadata(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| AspiError::Metadata(format!("cannot parse `{key}` = `{raw}`")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        if self.contains(key) {
            self.parse(key)
        } else {
            Ok(default)
        }
    }

    pub fn extend(&mut self, other: &Metadata) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| AspiError::Metadata(format!("line {}: expected key=value", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }
}

/// Planes of equal size plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f32>>,
    pub metadata: Metadata,
}

impl Stack {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f32>>, metadata: Metadata) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AspiError::arg("stack dimensions must be >= 1"));
        }
        if let Some(p) = planes.iter().position(|p| p.len() != width * height) {
            return Err(AspiError::arg(format!("plane {p} does not hold {width}x{height} values")));
        }
        Ok(Self {
            width,
            height,
            planes,
            metadata,
        })
    }

    pub fn from_frames(frames: &[Frame], metadata: Metadata) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| AspiError::arg("stack needs at least one frame"))?;
        let (w, h) = first.dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != (w, h)) {
            return Err(AspiError::dims((w, h), f.dims()));
        }
        Self::new(w, h, frames.iter().map(|f| f.data().to_vec()).collect(), metadata)
    }

    /// Planes as strict frames (finite, non-negative).
    pub fn to_frames(&self) -> Result<Vec<Frame>> {
        self.planes
            .iter()
            .map(|p| Frame::new(self.width, self.height, p.clone()))
            .collect()
    }

    /// Planes as frames that may carry the reconstruction sentinel.
    pub fn to_frames_with_sentinel(&self) -> Result<Vec<Frame>> {
        self.planes
            .iter()
            .map(|p| Frame::with_sentinel(self.width, self.height, p.clone()))
            .collect()
    }
}

fn format_err(offset: u64, message: impl Into<String>) -> AspiError {
    AspiError::Format {
        offset,
        message: message.into(),
    }
}

fn payload_len(planes: u64, width: u64, height: u64) -> Option<u64> {
    planes.checked_mul(width)?.checked_mul(height)?.checked_mul(4)
}

pub fn encode_stack(stack: &Stack) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| AspiError::arg(format!("{what} {v} does not fit in u32")))
    };
    let planes = to_u32(stack.planes.len(), "plane count")?;
    let width = to_u32(stack.width, "width")?;
    let height = to_u32(stack.height, "height")?;
    let len = payload_len(planes as u64, width as u64, height as u64)
        .ok_or_else(|| AspiError::arg("stack size overflows"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + len as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&planes.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.push(DTYPE_F32);
    out.resize(HEADER_LEN, 0);
    for plane in &stack.planes {
        for v in plane {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes the binary part of a stack; metadata is left empty.
pub fn decode_stack(bytes: &[u8]) -> Result<Stack> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len() as u64,
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(0, format!("bad magic {:?}, expected \"ASPI\"", &bytes[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let planes = u32_at(6) as u64;
    let width = u32_at(10) as u64;
    let height = u32_at(14) as u64;
    if width == 0 || height == 0 {
        return Err(format_err(10, format!("zero dimension {width}x{height}")));
    }
    if bytes[18] != DTYPE_F32 {
        return Err(format_err(18, format!("unsupported dtype code {}", bytes[18])));
    }
    let expected = payload_len(planes, width, height)
        .and_then(|p| p.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| format_err(6, format!("{planes} planes of {width}x{height} overflow")))?;
    if bytes.len() as u64 != expected {
        return Err(format_err(
            bytes.len().min(expected as usize) as u64,
            format!(
                "expected {expected} bytes for {planes} planes of {width}x{height}, file has {}",
                bytes.len()
            ),
        ));
    }
    let plane_len = (width * height) as usize;
    let planes = bytes[HEADER_LEN..]
        .chunks_exact(plane_len * 4)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect()
        })
        .collect();
    Stack::new(width as usize, height as usize, planes, Metadata::new())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the stack and its `.meta` sidecar.
pub fn write_stack(path: &Path, stack: &Stack) -> Result<()> {
    let bytes = encode_stack(stack)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    fs::write(sidecar_path(path), stack.metadata.to_text())?;
    Ok(())
}

/// Reads a stack; a missing sidecar yields empty metadata.
pub fn read_stack(path: &Path) -> Result<Stack> {
    let bytes = fs::read(path)?;
    let mut stack = decode_stack(&bytes)?;
    let meta = sidecar_path(path);
    if meta.exists() {
        stack.metadata = Metadata::from_text(&fs::read_to_string(meta)?)?;
    }
    Ok(stack)
}

/// 16-bit binary PGM (P5). Values are mapped linearly from `[lo, hi]` to
/// `[0, 65535]`; NaN and values below `lo` map to 0.
pub fn write_pgm16(path: &Path, width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.len() != width * height {
        return Err(AspiError::arg("pgm pixel count does not match dimensions"));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        let level = if v.is_nan() {
            0
        } else {
            (((v - lo) / span).clamp(0.0, 1.0) * 65535.0).round() as u16
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}
