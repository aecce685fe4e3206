//! File formats: PGM/PPM maps and images, and the `NASW` weight file.
//!
//! `NASW` layout (little-endian): magic `NASW`, `u32` version, `u32` length
//! and UTF-8 JSON header, `u32` tensor count, then per tensor a `u16` name
//! length, the UTF-8 name, a `u8` rank, `u32` dims, and `f32` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use nastar_core::diff_astar::{ExpansionMode, SearchVariant};
use nastar_core::encoder::{EncoderConfig, EncoderWeights, Param};
use nastar_core::{GridMap, MapKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"NASW";
pub const WEIGHTS_VERSION: u32 = 1;

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::format(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Binary maps as P5: 255 passable, 0 obstacle.
pub fn encode_pgm(map: &GridMap) -> Option<Vec<u8>> {
    let cells = map.binary_cells()?;
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(cells.iter().map(|&c| if c == 1 { 255u8 } else { 0 }));
    Some(out)
}

/// Interleaved 8-bit RGB as P6.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    debug_assert_eq!(rgb.len(), 3 * width * height);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Image maps as P6, each channel scaled to `0..=255`.
pub fn encode_image_map(map: &GridMap) -> Option<Vec<u8>> {
    let planes = map.image_planes()?;
    let n = map.len();
    let mut rgb = Vec::with_capacity(3 * n);
    for i in 0..n {
        for ch in 0..3 {
            rgb.push((planes[ch * n + i] * 255.0).round() as u8);
        }
    }
    Some(encode_ppm(map.width(), map.height(), &rgb))
}

pub fn encode_map(map: &GridMap) -> Vec<u8> {
    match map.kind() {
        MapKind::Binary => encode_pgm(map),
        MapKind::Image => encode_image_map(map),
    }
    .expect("kind checked")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pnm {
    /// 5 for grayscale, 6 for RGB.
    pub magic: u8,
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u8>,
}

/// Parses binary PGM/PPM with 8-bit samples. Comments in the header are skipped.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Pnm> {
    let bad = |msg: &str| Error::format(path, msg.to_string());
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'6') {
        return Err(bad("not a binary PGM or PPM file"));
    }
    let magic = bytes[1] - b'0';
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("malformed header"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 255 {
        return Err(bad("unsupported dimensions or sample depth"));
    }
    let channels = if magic == 5 { 1 } else { 3 };
    let need = width * height * channels;
    if bytes.len() - pos < need {
        return Err(bad("truncated pixel data"));
    }
    Ok(Pnm { magic, width, height, maxval: maxval as u16, data: bytes[pos..pos + need].to_vec() })
}

/// P5 becomes a binary map (samples above half the maximum are passable);
/// P6 becomes an image map.
pub fn decode_map(bytes: &[u8], path: &Path) -> Result<GridMap> {
    let p = decode_pnm(bytes, path)?;
    let max = p.maxval as f64;
    let map = if p.magic == 5 {
        let cells = p.data.iter().map(|&v| u8::from(v as f64 > max / 2.0)).collect();
        GridMap::binary(p.height, p.width, cells)
    } else {
        let n = p.width * p.height;
        let mut planes = vec![0.0; 3 * n];
        for i in 0..n {
            for ch in 0..3 {
                planes[ch * n + i] = p.data[3 * i + ch] as f64 / max;
            }
        }
        GridMap::image(p.height, p.width, planes)
    };
    map.map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_map(path: &Path) -> Result<GridMap> {
    decode_map(&read_file(path)?, path)
}

/// JSON header of a weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub config: EncoderConfig,
    pub parameter_count: usize,
    #[serde(default)]
    pub variant: Option<SearchVariant>,
    #[serde(default)]
    pub mode: Option<ExpansionMode>,
    #[serde(default)]
    pub epoch: Option<usize>,
    #[serde(default)]
    pub val_hmean: Option<f64>,
}

impl WeightsHeader {
    pub fn new(config: EncoderConfig) -> Self {
        Self {
            config,
            parameter_count: config.parameter_count(),
            variant: None,
            mode: None,
            epoch: None,
            val_hmean: None,
        }
    }
}

pub fn encode_weights(header: &WeightsHeader, weights: &EncoderWeights) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let params = weights.parameter_list();
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(p.shape.len() as u8);
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u16(&mut self) -> Option<u16> {
        Some(u16::from_le_bytes(self.take(2)?.try_into().ok()?))
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<(WeightsHeader, EncoderWeights)> {
    let bad = |msg: &str| Error::format(path, msg.to_string());
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4) != Some(WEIGHTS_MAGIC.as_slice()) {
        return Err(bad("missing NASW magic"));
    }
    let version = r.u32().ok_or_else(|| bad("truncated header"))?;
    if version != WEIGHTS_VERSION {
        return Err(bad(&format!("unsupported weight file version {version}")));
    }
    let len = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let json = r.take(len).ok_or_else(|| bad("truncated header"))?;
    let header: WeightsHeader = serde_json::from_slice(json).map_err(|e| bad(&format!("invalid header: {e}")))?;
    let count = r.u32().ok_or_else(|| bad("truncated tensor table"))? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let trunc = || bad("truncated tensor");
        let nlen = r.u16().ok_or_else(trunc)? as usize;
        let name = std::str::from_utf8(r.take(nlen).ok_or_else(trunc)?)
            .map_err(|_| bad("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8().ok_or_else(trunc)? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Option<Vec<_>>>().ok_or_else(trunc)?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("tensor too large"))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| bad("tensor too large"))?).ok_or_else(trunc)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        tensors.push((name, Param { shape, values }));
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after tensors"));
    }
    let weights = EncoderWeights::from_parameters(header.config, tensors).map_err(|e| bad(&e.to_string()))?;
    if header.parameter_count != header.config.parameter_count() {
        return Err(bad("parameter count in header does not match the encoder config"));
    }
    Ok((header, weights))
}

pub fn read_weights(path: &Path) -> Result<(WeightsHeader, EncoderWeights)> {
    decode_weights(&read_file(path)?, path)
}

pub fn write_weights(path: &Path, header: &WeightsHeader, weights: &EncoderWeights) -> Result<()> {
    write_atomic(path, &encode_weights(header, weights))
}
