//! RGBD-to-mesh unprojection and target-view rendering.

mod mesh;
mod raster;

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::RgbImage;

use crate::colmap::{CameraIntrinsics, Pose};
use crate::depth::{write_pfm, DepthMap};
use crate::error::{Error, Result};

pub use mesh::{build_mesh, depth_spread, MeshVertex, WarpMesh};
pub use raster::{rasterize, rasterize_with_ids};

#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutput {
    pub width: usize,
    pub height: usize,
    pub rgb: RgbImage,
    /// True where some triangle covers the pixel center.
    pub mask: Vec<bool>,
    /// Target-camera depth where covered, 0 elsewhere.
    pub depth: Vec<f64>,
}

impl WarpOutput {
    pub fn coverage(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    pub fn depth_map(&self) -> DepthMap {
        DepthMap::from_values(self.width, self.height, self.depth.clone())
            .expect("depth buffer matches output size")
    }

    /// Writes `<stem>.png`, `<stem>_mask.png` and `<stem>_depth.pfm`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.rgb.save(dir.join(format!("{stem}.png")))?;
        write_mask_png(&self.mask, self.width, self.height, &dir.join(format!("{stem}_mask.png")))?;
        write_pfm(&self.depth_map(), &dir.join(format!("{stem}_depth.pfm")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpConfig {
    /// Maximum relative depth spread per triangle; `f64::INFINITY` keeps all.
    pub discontinuity_threshold: f64,
    pub sentinel: [u8; 3],
}

impl Default for WarpConfig {
    fn default() -> Self {
        WarpConfig {
            discontinuity_threshold: 0.1,
            sentinel: [0, 0, 0],
        }
    }
}

pub fn warp(
    ref_rgb: &RgbImage,
    aligned_depth: &DepthMap,
    ref_camera: &CameraIntrinsics,
    ref_pose: &Pose,
    tgt_camera: &CameraIntrinsics,
    tgt_pose: &Pose,
    config: &WarpConfig,
) -> Result<WarpOutput> {
    if aligned_depth.valid_count() == 0 {
        return Err(Error::InvalidInput("aligned depth has no valid pixels".into()));
    }
    if config.discontinuity_threshold.is_nan() || config.discontinuity_threshold < 0.0 {
        return Err(Error::InvalidInput(format!(
            "discontinuity threshold {} must be non-negative",
            config.discontinuity_threshold
        )));
    }
    let mesh = build_mesh(ref_rgb, aligned_depth, ref_camera, ref_pose, config.discontinuity_threshold)?;
    Ok(rasterize(&mesh, tgt_camera, tgt_pose, config.sentinel))
}

/// Writes a 1-bit grayscale PNG, white where `mask` is true.
pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} mask entries for {width}x{height}",
            mask.len()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let stride = width.div_ceil(8);
    let mut data = vec![0u8; stride * height];
    for y in 0..height {
        for x in 0..width {
            if mask[y * width + x] {
                data[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    let to_err = |e: png::EncodingError| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut writer = enc.write_header().map_err(to_err)?;
    writer.write_image_data(&data).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

/// Reads a grayscale mask PNG of any bit depth; nonzero samples are true.
pub fn read_mask_png(path: &Path) -> Result<(Vec<bool>, usize, usize)> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((img.pixels().map(|p| p.0[0] != 0).collect(), w, h))
}

/// Writes `key=value` lines in the given order.
pub fn write_key_values(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let body: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected key=value".into(),
                })
        })
        .collect()
}
