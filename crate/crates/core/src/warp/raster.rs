//! Scanline-free z-buffer rasterizer.
//!
//! Projected vertices are snapped to a fixed-point grid with 16 fractional
//! bits and edge functions are evaluated exactly in `i128`, so coverage
//! decisions never depend on floating-point rounding. Depth and color
//! weights use the unsnapped projections. Edges shared by two
//! triangles use the top-left fill rule; edges on the mesh boundary are
//! inclusive, so a pixel center lying exactly on the outline is still
//! covered.

use std::collections::HashMap;

use image::{Rgb, RgbImage};

use super::mesh::WarpMesh;
use super::WarpOutput;
use crate::camera::{project, Projected};
use crate::colmap::{CameraIntrinsics, Pose};

const FRAC_BITS: u32 = 16;
const ONE: i64 = 1 << FRAC_BITS;
const HALF: i64 = ONE / 2;
/// Vertices projecting further than this from the origin are discarded.
const MAX_COORD: f64 = (1u64 << 40) as f64;

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: i64,
    y: i64,
    fx: f64,
    fy: f64,
    inv_z: f64,
}

fn snap(v: f64) -> Option<i64> {
    (v.is_finite() && v.abs() <= MAX_COORD).then(|| (v * ONE as f64).round() as i64)
}

fn project_vertex(camera: &CameraIntrinsics, pose: &Pose, xyz: &nalgebra::Vector3<f64>) -> Option<ScreenVertex> {
    match project(camera, pose, xyz).ok()? {
        Projected::InFront { pixel, depth } => Some(ScreenVertex {
            x: snap(pixel.x)?,
            y: snap(pixel.y)?,
            fx: pixel.x,
            fy: pixel.y,
            inv_z: 1.0 / depth,
        }),
        Projected::Behind { .. } => None,
    }
}

/// Twice the signed area of `(a, b, p)`; positive when `p` lies on the
/// interior side of `a -> b` for a counter-clockwise (y-down) triangle.
fn edge(a: (i64, i64), b: (i64, i64), p: (i64, i64)) -> i128 {
    (b.0 - a.0) as i128 * (p.1 - a.1) as i128 - (b.1 - a.1) as i128 * (p.0 - a.0) as i128
}

fn is_top_left(a: (i64, i64), b: (i64, i64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    (dy == 0 && dx > 0) || dy < 0
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Rasterizes `mesh` from `(camera, pose)` and also returns, per pixel,
/// the index of the winning triangle.
pub fn rasterize_with_ids(
    mesh: &WarpMesh,
    camera: &CameraIntrinsics,
    pose: &Pose,
    sentinel: [u8; 3],
) -> (WarpOutput, Vec<Option<u32>>) {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut ids: Vec<Option<u32>> = vec![None; w * h];
    let mut rgb = RgbImage::from_pixel(w as u32, h as u32, Rgb(sentinel));

    let screen: Vec<Option<ScreenVertex>> = mesh
        .vertices
        .iter()
        .map(|v| project_vertex(camera, pose, &v.xyz))
        .collect();
    let live: Vec<(usize, [u32; 3])> = mesh
        .triangles
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, t)| t.iter().all(|&i| screen.get(i as usize).is_some_and(|s| s.is_some())))
        .collect();

    let mut edge_uses: HashMap<(u32, u32), u32> = HashMap::with_capacity(live.len() * 3);
    for (_, t) in &live {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_uses.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let shared = |a: u32, b: u32| edge_uses.get(&(a.min(b), a.max(b))).copied().unwrap_or(0) > 1;

    for (tri_id, t) in live {
        let mut idx = t;
        let mut sv = idx.map(|i| screen[i as usize].unwrap());
        let p = |s: &ScreenVertex| (s.x, s.y);
        let mut area = edge(p(&sv[0]), p(&sv[1]), p(&sv[2]));
        if area == 0 {
            continue;
        }
        if area < 0 {
            idx.swap(1, 2);
            sv.swap(1, 2);
            area = -area;
        }
        let v = sv.map(|s| (s.x, s.y));
        // Edge k runs from vertex k+1 to k+2 and weights vertex k.
        let mut bias = [0i128; 3];
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let inclusive = !shared(idx[a], idx[b]) || is_top_left(v[a], v[b]);
            bias[k] = if inclusive { 1 } else { 0 };
        }

        let min_x = v.iter().map(|q| q.0).min().unwrap();
        let max_x = v.iter().map(|q| q.0).max().unwrap();
        let min_y = v.iter().map(|q| q.1).min().unwrap();
        let max_y = v.iter().map(|q| q.1).max().unwrap();
        let x0 = ceil_div(min_x - HALF, ONE).max(0);
        let x1 = (max_x - HALF).div_euclid(ONE).min(w as i64 - 1);
        let y0 = ceil_div(min_y - HALF, ONE).max(0);
        let y1 = (max_y - HALF).div_euclid(ONE).min(h as i64 - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }

        let inv_z = sv.map(|s| s.inv_z);
        let color = idx.map(|i| mesh.vertices[i as usize].rgb.map(f64::from));
        let fv = sv.map(|s| (s.fx, s.fy));
        let edge_f = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let area_f = edge_f(fv[0], fv[1], fv[2]);
        if area_f == 0.0 {
            continue;
        }
        for py in y0..=y1 {
            let sy = py * ONE + HALF;
            for px in x0..=x1 {
                let s = (px * ONE + HALF, sy);
                let e = [edge(v[1], v[2], s), edge(v[2], v[0], s), edge(v[0], v[1], s)];
                if (0..3).any(|k| e[k] + bias[k] <= 0) {
                    continue;
                }
                let c = (px as f64 + 0.5, py as f64 + 0.5);
                let ef = [edge_f(fv[1], fv[2], c), edge_f(fv[2], fv[0], c), edge_f(fv[0], fv[1], c)];
                let wts = [0, 1, 2].map(|k| ef[k] / area_f * inv_z[k]);
                let sum = wts[0] + wts[1] + wts[2];
                let depth = 1.0 / sum;
                let pix = py as usize * w + px as usize;
                if !(depth < zbuf[pix]) {
                    continue;
                }
                zbuf[pix] = depth;
                ids[pix] = Some(tri_id as u32);
                let mut out = [0u8; 3];
                for (c, o) in out.iter_mut().enumerate() {
                    let val = (wts[0] * color[0][c] + wts[1] * color[1][c] + wts[2] * color[2][c]) / sum;
                    *o = val.round().clamp(0.0, 255.0) as u8;
                }
                rgb.put_pixel(px as u32, py as u32, Rgb(out));
            }
        }
    }

    let mask: Vec<bool> = ids.iter().map(Option::is_some).collect();
    let depth = zbuf
        .into_iter()
        .map(|z| if z.is_finite() { z } else { 0.0 })
        .collect();
    (
        WarpOutput {
            width: w,
            height: h,
            rgb,
            mask,
            depth,
        },
        ids,
    )
}

/// Z-buffered rasterization with perspective-correct interpolation and no
/// backface culling. Triangles with a vertex behind the camera are skipped.
pub fn rasterize(mesh: &WarpMesh, camera: &CameraIntrinsics, pose: &Pose, sentinel: [u8; 3]) -> WarpOutput {
    rasterize_with_ids(mesh, camera, pose, sentinel).0
}
