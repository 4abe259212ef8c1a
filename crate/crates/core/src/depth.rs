//! Dense depth maps and their on-disk encodings.
//!
//! Two encodings are supported: PFM (single channel, little-endian, rows
//! stored bottom-to-top) and 16-bit grayscale PNG whose raw values are
//! multiplied by a scale factor kept in a `<file>.meta` sidecar. In both,
//! invalid pixels are stored as 0.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map where every finite, strictly positive value is valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} depth map",
                values.len()
            )));
        }
        let valid = values.iter().map(|&v| v.is_finite() && v > 0.0).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() && v > 0.0 { v } else { 0.0 })
            .collect();
        Ok(DepthMap {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    /// Row-major values; invalid entries hold 0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(&v, &ok)| ok.then_some(v))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.valid[i] = false;
        self.values[i] = 0.0;
    }

    /// Applies `f` to every valid value; results that are not finite and
    /// positive become invalid.
    pub fn map_valid(&self, f: impl Fn(f64) -> f64) -> DepthMap {
        let mut out = self.clone();
        for (v, ok) in out.values.iter_mut().zip(out.valid.iter_mut()) {
            if !*ok {
                continue;
            }
            let nv = f(*v);
            if nv.is_finite() && nv > 0.0 {
                *v = nv;
            } else {
                *v = 0.0;
                *ok = false;
            }
        }
        out
    }

    /// Reciprocal of every valid value, for disparity-valued inputs.
    pub fn inverted(&self) -> DepthMap {
        self.map_valid(|v| 1.0 / v)
    }
}

pub fn write_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    let mut buf = format!("Pf\n{} {}\n-1.0\n", depth.width, depth.height).into_bytes();
    buf.reserve(depth.width * depth.height * 4);
    for y in (0..depth.height).rev() {
        for x in 0..depth.width {
            let v = depth.get(x, y).unwrap_or(0.0) as f32;
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: msg.to_string(),
    };
    // Header: three whitespace-separated tokens after the magic, each
    // terminated by a single whitespace byte.
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PFM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err(bad("colour PFM is not a depth map")),
        _ => return Err(bad("missing PFM magic")),
    }
    let width: usize = tokens[1].parse().map_err(|_| bad("invalid width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("invalid height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("invalid scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("invalid scale"));
    }
    let little = scale < 0.0;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| bad("dimensions overflow"))?;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < n * 4 {
        return Err(Error::Truncated {
            file: path.display().to_string(),
            detail: format!("expected {} bytes of samples, found {}", n * 4, data.len()),
        });
    }
    let mut values = vec![0.0; n];
    for (i, chunk) in data[..n * 4].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (i / width, i % width);
        values[(height - 1 - row) * width + col] = v as f64;
    }
    DepthMap::from_values(width, height, values)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes raw = round(depth / scale); valid values that would round to 0
/// are stored as 1 so they stay valid.
pub fn write_png16(depth: &DepthMap, path: &Path, scale: f64) -> Result<()> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("depth scale {scale} must be positive")));
    }
    let mut img = ImageBuffer::<Luma<u16>, Vec<u16>>::new(depth.width as u32, depth.height as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let Some(v) = depth.get(x as usize, y as usize) else {
            continue;
        };
        let raw = (v / scale).round();
        if raw > u16::MAX as f64 {
            return Err(Error::InvalidInput(format!(
                "depth {v} exceeds the 16-bit range at scale {scale}"
            )));
        }
        px.0[0] = (raw as u16).max(1);
    }
    img.save(path)?;
    let meta = sidecar_path(path);
    fs::write(&meta, format!("depth_scale={scale:e}\n")).map_err(|e| Error::io(&meta, e))
}

pub fn read_png16(path: &Path) -> Result<DepthMap> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let scale = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "depth_scale")
        .and_then(|(_, v)| v.trim().parse::<f64>().ok())
        .filter(|s| *s > 0.0 && s.is_finite())
        .ok_or_else(|| Error::Parse {
            path: meta.clone(),
            line: 0,
            msg: "missing or invalid depth_scale".into(),
        })?;
    let img = image::open(path)?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.pixels().map(|p| p.0[0] as f64 * scale).collect();
    DepthMap::from_values(w, h, values)
}

/// Reads by extension: `.pfm` or `.png` (with sidecar).
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pfm") => read_pfm(path),
        Some("png") => read_png16(path),
        _ => Err(Error::InvalidInput(format!(
            "unsupported depth file {}",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DepthMap {
        let values = (0..12).map(|i| if i == 5 { 0.0 } else { 0.5 + i as f64 * 0.25 }).collect();
        DepthMap::from_values(4, 3, values).unwrap()
    }

    #[test]
    fn validity_follows_values() {
        let d = DepthMap::from_values(2, 2, vec![1.0, 0.0, -1.0, f64::NAN]).unwrap();
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 1), None);
        assert!(DepthMap::from_values(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn pfm_roundtrip_and_row_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let d = sample();
        write_pfm(&d, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"Pf\n4 3\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        // First stored row is the bottom image row.
        let first = f32::from_le_bytes(bytes[header.len()..header.len() + 4].try_into().unwrap());
        assert_eq!(first as f64, d.get(0, 2).unwrap());
        assert_eq!(read_pfm(&path).unwrap(), d);
    }

    #[test]
    fn pfm_big_endian_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.0f32.to_be_bytes());
        bytes.extend_from_slice(&3.0f32.to_be_bytes());
        fs::write(&path, &bytes).unwrap();
        let d = read_pfm(&path).unwrap();
        assert_eq!((d.get(0, 0), d.get(1, 0)), (Some(2.0), Some(3.0)));
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_pfm(&path), Err(Error::Truncated { .. })));
    }

    #[test]
    fn png16_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let d = sample();
        write_png16(&d, &path, 0.25).unwrap();
        let back = read_depth(&path).unwrap();
        assert_eq!(back, d);
        assert!(write_png16(&d, &path, 1e-6).is_err());
    }

    #[test]
    fn inverted_is_reciprocal() {
        let d = sample().inverted();
        assert_eq!(d.get(1, 0), Some(1.0 / 0.75));
        assert_eq!(d.get(1, 1), None);
    }
}
