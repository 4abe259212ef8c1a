use image::RgbImage;
use nalgebra::{Vector2, Vector3};

use crate::camera::unproject;
use crate::colmap::{CameraIntrinsics, Pose};
use crate::depth::DepthMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVertex {
    pub xyz: Vector3<f64>,
    pub rgb: [u8; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarpMesh {
    pub vertices: Vec<MeshVertex>,
    pub triangles: Vec<[u32; 3]>,
}

impl WarpMesh {
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        match self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            Some(t) => Err(Error::InvalidInput(format!("triangle {t:?} indexes past {n} vertices"))),
            None => Ok(()),
        }
    }
}

/// Relative depth spread `(max - min) / min` of a triangle.
pub fn depth_spread(depths: [f64; 3]) -> f64 {
    let lo = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

/// One vertex per valid depth pixel, unprojected from the pixel center.
/// Each 2x2 block of valid pixels yields the triangles
/// `(tl, bl, br)` and `(tl, br, tr)`, dropped when their depth spread
/// exceeds `discontinuity_threshold` (pass `f64::INFINITY` to keep all).
pub fn build_mesh(
    rgb: &RgbImage,
    depth: &DepthMap,
    camera: &CameraIntrinsics,
    pose: &Pose,
    discontinuity_threshold: f64,
) -> Result<WarpMesh> {
    let (w, h) = (depth.width(), depth.height());
    if rgb.width() as usize != w || rgb.height() as usize != h {
        return Err(Error::DimensionMismatch(format!(
            "rgb {}x{} vs depth {w}x{h}",
            rgb.width(),
            rgb.height()
        )));
    }
    let mut index = vec![u32::MAX; w * h];
    let mut vertex_depth = Vec::new();
    let mut mesh = WarpMesh::default();
    for y in 0..h {
        for x in 0..w {
            let Some(d) = depth.get(x, y) else { continue };
            let center = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let xyz = unproject(camera, pose, &center, d)?;
            index[y * w + x] = mesh.vertices.len() as u32;
            vertex_depth.push(d);
            mesh.vertices.push(MeshVertex {
                xyz,
                rgb: rgb.get_pixel(x as u32, y as u32).0,
            });
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let tl = index[y * w + x];
            let tr = index[y * w + x + 1];
            let bl = index[(y + 1) * w + x];
            let br = index[(y + 1) * w + x + 1];
            if [tl, tr, bl, br].contains(&u32::MAX) {
                continue;
            }
            for tri in [[tl, bl, br], [tl, br, tr]] {
                let ds = tri.map(|i| vertex_depth[i as usize]);
                if depth_spread(ds) <= discontinuity_threshold {
                    mesh.triangles.push(tri);
                }
            }
        }
    }
    Ok(mesh)
}
