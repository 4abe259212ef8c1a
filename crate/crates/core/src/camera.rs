//! Projection and unprojection through the supported camera models.
//!
//! Pixel coordinates follow the reconstruction convention: the top-left
//! pixel spans `[0, 1) x [0, 1)`, so its center is `(0.5, 0.5)`.
//! Distortion is applied in normalized image coordinates:
//!
//! ```text
//! r2     = u^2 + v^2
//! radial = k1 r2 + k2 r2^2
//! du     = u radial + 2 p1 u v + p2 (r2 + 2 u^2)
//! dv     = v radial + 2 p2 u v + p1 (r2 + 2 v^2)
//! ```

use nalgebra::{Vector2, Vector3};

use crate::colmap::{CameraIntrinsics, CameraModel, Pose};
use crate::error::{Error, Result};

const MAX_UNDISTORT_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projected {
    InFront { pixel: Vector2<f64>, depth: f64 },
    /// Camera-frame depth `<= 0`; no meaningful pixel exists.
    Behind { depth: f64 },
}

impl Projected {
    pub fn in_front(self) -> Option<(Vector2<f64>, f64)> {
        match self {
            Projected::InFront { pixel, depth } => Some((pixel, depth)),
            Projected::Behind { .. } => None,
        }
    }

    pub fn depth(self) -> f64 {
        match self {
            Projected::InFront { depth, .. } | Projected::Behind { depth } => depth,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Distortion {
    k1: f64,
    k2: f64,
    p1: f64,
    p2: f64,
}

impl Distortion {
    fn of(cam: &CameraIntrinsics) -> Self {
        let p = &cam.params;
        match cam.model {
            CameraModel::SimplePinhole | CameraModel::Pinhole => Distortion::default(),
            CameraModel::SimpleRadial => Distortion {
                k1: p[3],
                ..Default::default()
            },
            CameraModel::Radial => Distortion {
                k1: p[3],
                k2: p[4],
                ..Default::default()
            },
            CameraModel::OpenCv => Distortion {
                k1: p[4],
                k2: p[5],
                p1: p[6],
                p2: p[7],
            },
        }
    }

    fn is_identity(&self) -> bool {
        *self == Distortion::default()
    }

    fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let r2 = u * u + v * v;
        let radial = self.k1 * r2 + self.k2 * r2 * r2;
        let du = u * radial + 2.0 * self.p1 * u * v + self.p2 * (r2 + 2.0 * u * u);
        let dv = v * radial + 2.0 * self.p2 * u * v + self.p1 * (r2 + 2.0 * v * v);
        (u + du, v + dv)
    }

    /// Newton iteration on the forward model with its analytic Jacobian.
    fn invert(&self, ud: f64, vd: f64) -> Result<(f64, f64)> {
        if self.is_identity() {
            return Ok((ud, vd));
        }
        let (mut u, mut v) = (ud, vd);
        for _ in 0..MAX_UNDISTORT_ITERS {
            let (fu, fv) = self.apply(u, v);
            let (ru, rv) = (fu - ud, fv - vd);
            if ru.abs().max(rv.abs()) < 1e-15 * (1.0 + ud.abs().max(vd.abs())) {
                return Ok((u, v));
            }
            let r2 = u * u + v * v;
            let radial = self.k1 * r2 + self.k2 * r2 * r2;
            let dr = 2.0 * (self.k1 + 2.0 * self.k2 * r2);
            let (dr_du, dr_dv) = (dr * u, dr * v);
            let j00 = 1.0 + radial + u * dr_du + 2.0 * self.p1 * v + 6.0 * self.p2 * u;
            let j01 = u * dr_dv + 2.0 * self.p1 * u + 2.0 * self.p2 * v;
            let j10 = v * dr_du + 2.0 * self.p2 * v + 2.0 * self.p1 * u;
            let j11 = 1.0 + radial + v * dr_dv + 2.0 * self.p2 * u + 6.0 * self.p1 * v;
            let det = j00 * j11 - j01 * j10;
            if det.abs() < 1e-300 || !det.is_finite() {
                break;
            }
            let su = (j11 * ru - j01 * rv) / det;
            let sv = (-j10 * ru + j00 * rv) / det;
            u -= su;
            v -= sv;
            if !(u.is_finite() && v.is_finite()) {
                break;
            }
        }
        // Accept a final state that reproduces the input to 1e-12.
        let (fu, fv) = self.apply(u, v);
        if u.is_finite() && v.is_finite() && (fu - ud).abs().max((fv - vd).abs()) < 1e-12 {
            Ok((u, v))
        } else {
            Err(Error::UndistortionDiverged(MAX_UNDISTORT_ITERS))
        }
    }
}

impl CameraIntrinsics {
    /// Camera-frame point to pixel; `None` if `z <= 0`.
    pub fn cam_to_pixel(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        let (u, v) = Distortion::of(self).apply(p.x / p.z, p.y / p.z);
        let (fx, fy) = self.focal();
        let (cx, cy) = self.principal_point();
        Some(Vector2::new(fx * u + cx, fy * v + cy))
    }

    /// Pixel to the camera-frame point at depth `z`.
    pub fn pixel_to_cam(&self, pixel: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::NonPositiveDepth(depth));
        }
        let (fx, fy) = self.focal();
        let (cx, cy) = self.principal_point();
        let (u, v) = Distortion::of(self).invert((pixel.x - cx) / fx, (pixel.y - cy) / fy)?;
        Ok(Vector3::new(u * depth, v * depth, depth))
    }
}

/// Projects a world point; `Behind` when the camera-frame depth is `<= 0`.
pub fn project(camera: &CameraIntrinsics, pose: &Pose, xyz_world: &Vector3<f64>) -> Result<Projected> {
    if !xyz_world.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite world point".into()));
    }
    let p = pose.transform_point(xyz_world);
    if p == Vector3::zeros() {
        return Err(Error::InvalidInput("point coincides with the camera center".into()));
    }
    Ok(match camera.cam_to_pixel(&p) {
        Some(pixel) => Projected::InFront { pixel, depth: p.z },
        None => Projected::Behind { depth: p.z },
    })
}

pub fn unproject(
    camera: &CameraIntrinsics,
    pose: &Pose,
    pixel: &Vector2<f64>,
    depth: f64,
) -> Result<Vector3<f64>> {
    if !(pixel.x.is_finite() && pixel.y.is_finite()) {
        return Err(Error::InvalidInput("non-finite pixel".into()));
    }
    let p = camera.pixel_to_cam(pixel, depth)?;
    Ok(pose.inverse_transform_point(&p))
}
