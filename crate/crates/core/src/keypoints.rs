//! Keypoint files and watermark border masking.
//!
//! File format: a header line `W H N` followed by `N` lines `x y`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub width: u32,
    pub height: u32,
    pub points: Vec<(f64, f64)>,
}

impl KeypointSet {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })
    }

    fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or((1, "missing header".to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let num = |s: &str, line: usize| s.parse::<u64>().map_err(|_| (line, format!("invalid integer {s:?}")));
        if h.len() != 3 {
            return Err((1, "header must be `W H N`".into()));
        }
        let (width, height, n) = (num(h[0], 1)?, num(h[1], 1)?, num(h[2], 1)?);
        if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
            return Err((1, "invalid image dimensions".into()));
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let coord = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or((i + 1, format!("invalid coordinate {s:?}")))
            };
            if t.len() != 2 {
                return Err((i + 1, "expected `x y`".into()));
            }
            points.push((coord(t[0])?, coord(t[1])?));
        }
        if points.len() as u64 != n {
            return Err((1, format!("header declares {n} keypoints, found {}", points.len())));
        }
        Ok(KeypointSet {
            width: width as u32,
            height: height as u32,
            points,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.width, self.height, self.points.len());
        for (x, y) in &self.points {
            let _ = writeln!(s, "{x} {y}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Distance from a keypoint center to the nearest image edge.
pub fn edge_distance(width: u32, height: u32, x: f64, y: f64) -> f64 {
    let (w, h) = (width as f64, height as f64);
    x.min(y).min(w - 1.0 - x).min(h - 1.0 - y)
}

/// Drops keypoints closer than `border_fraction` of the image diagonal to
/// any edge; survivors keep their order.
pub fn mask_border_keypoints(kps: &KeypointSet, border_fraction: f64) -> Result<KeypointSet> {
    if !(0.0..0.5).contains(&border_fraction) {
        return Err(Error::InvalidInput(format!(
            "border fraction {border_fraction} outside [0, 0.5)"
        )));
    }
    let band = border_fraction * (kps.width as f64).hypot(kps.height as f64);
    Ok(KeypointSet {
        width: kps.width,
        height: kps.height,
        points: kps
            .points
            .iter()
            .copied()
            .filter(|&(x, y)| edge_distance(kps.width, kps.height, x, y) >= band)
            .collect(),
    })
}

/// True when at least 10% of the labelled pairs are watermark pairs.
pub fn watermark_trigger<T>(pair_labels: &[(T, bool)]) -> Result<bool> {
    if pair_labels.is_empty() {
        return Err(Error::InvalidInput("no pair labels".into()));
    }
    let hits = pair_labels.iter().filter(|(_, w)| *w).count();
    Ok(hits * 10 >= pair_labels.len())
}
