//! Sparse SfM depth extraction and robust affine alignment of monocular
//! depth to it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colmap::{ImageId, Point3dId, SparseModel};
use crate::depth::DepthMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDepthEntry {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub point3d_id: Point3dId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDepth {
    pub entries: Vec<SparseDepthEntry>,
}

/// One entry per observed 3D point in front of the camera, at the stored 2D
/// observation (not the reprojection). Observations outside the image are
/// dropped.
pub fn sparse_depth_for_image(model: &SparseModel, image_id: ImageId) -> Result<SparseDepth> {
    let image = model.image(image_id)?;
    let camera = model.camera_for(image)?;
    let (w, h) = (camera.width as f64, camera.height as f64);
    let r = image.pose.rotation_matrix();
    let t = image.pose.translation;
    let entries: Vec<_> = image
        .points2d
        .iter()
        .filter_map(|obs| {
            let pid = obs.point3d_id?;
            let point = model.points.get(&pid)?;
            let depth = (r * point.xyz + t).z;
            let inside = obs.x >= 0.0 && obs.x < w && obs.y >= 0.0 && obs.y < h;
            (depth > 0.0 && inside).then_some(SparseDepthEntry {
                x: obs.x,
                y: obs.y,
                depth,
                point3d_id: pid,
            })
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::NoObservations(image_id));
    }
    Ok(SparseDepth { entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Relative residual `|a m + b - s| / s` below which a sample is an inlier.
    pub inlier_threshold: f64,
    /// `None` means `max(10, ceil(0.2 n))` for `n` correspondences.
    pub min_inliers: Option<usize>,
    pub seed: u64,
    /// Fit `s = a m` only.
    pub scale_only: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 1000,
            inlier_threshold: 0.05,
            min_inliers: None,
            seed: 0,
            scale_only: false,
        }
    }
}

impl RansacParams {
    pub fn min_inliers_for(&self, n: usize) -> usize {
        self.min_inliers
            .unwrap_or_else(|| 10.max((n as f64 * 0.2).ceil() as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub scale: f64,
    pub shift: f64,
    pub inlier_count: usize,
    /// One flag per sparse entry; entries with no valid monocular depth at
    /// their pixel are never inliers.
    pub inlier_flags: Vec<bool>,
    /// Absolute RMS residual of the refit over its inliers.
    pub residual_rms: f64,
    /// Number of usable correspondences.
    pub correspondences: usize,
}

/// `(mono, sfm, entry index)` triples with a valid mono sample at the
/// nearest pixel.
pub fn correspondences(mono: &DepthMap, sparse: &SparseDepth) -> Vec<(f64, f64, usize)> {
    sparse
        .entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            if !(e.x >= 0.0 && e.y >= 0.0) {
                return None;
            }
            let m = mono.get(e.x.floor() as usize, e.y.floor() as usize)?;
            Some((m, e.depth, i))
        })
        .collect()
}

fn count_inliers(corr: &[(f64, f64, usize)], a: f64, b: f64, thr: f64) -> usize {
    corr.iter()
        .filter(|&&(m, s, _)| ((a * m + b - s) / s).abs() < thr)
        .count()
}

/// Least-squares affine (or scale-only) fit `s ~ a m + b`.
pub fn least_squares_fit(pairs: impl Iterator<Item = (f64, f64)> + Clone, scale_only: bool) -> Option<(f64, f64)> {
    let n = pairs.clone().count() as f64;
    if n == 0.0 {
        return None;
    }
    if scale_only {
        let (smm, sms) = pairs.fold((0.0, 0.0), |(a, b), (m, s)| (a + m * m, b + m * s));
        return (smm > 0.0).then(|| (sms / smm, 0.0));
    }
    let (sm, ss) = pairs.clone().fold((0.0, 0.0), |(a, b), (m, s)| (a + m, b + s));
    let (mm, ms) = (sm / n, ss / n);
    let (cov, var) = pairs.fold((0.0, 0.0), |(c, v), (m, s)| {
        (c + (m - mm) * (s - ms), v + (m - mm) * (m - mm))
    });
    if var <= 0.0 {
        return None;
    }
    let a = cov / var;
    Some((a, ms - a * mm))
}

fn rms(pairs: impl Iterator<Item = (f64, f64)>, a: f64, b: f64) -> f64 {
    let (sum, n) = pairs.fold((0.0, 0usize), |(acc, n), (m, s)| {
        let r = a * m + b - s;
        (acc + r * r, n + 1)
    });
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Minimal-sample RANSAC over affine hypotheses followed by a least-squares
/// refit on the best consensus set. Deterministic for a given seed.
pub fn ransac_align(mono: &DepthMap, sparse: &SparseDepth, params: &RansacParams) -> Result<AlignmentResult> {
    let corr = correspondences(mono, sparse);
    let n = corr.len();
    let sample_size = if params.scale_only { 1 } else { 2 };
    if n < sample_size.max(2) {
        return Err(Error::TooFewCorrespondences { found: n, needed: 2 });
    }
    let (lo, hi) = corr
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
    let spread_eps = 1e-12 * hi.abs().max(1.0);
    if !params.scale_only && hi - lo <= spread_eps {
        return Err(Error::Degenerate(
            "all correspondences share one monocular depth".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, f64, f64)> = None;
    for _ in 0..params.iterations {
        let (a, b) = if params.scale_only {
            let (m, s, _) = corr[rng.random_range(0..n)];
            (s / m, 0.0)
        } else {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let ((mi, si, _), (mj, sj, _)) = (corr[i], corr[j]);
            if (mi - mj).abs() <= spread_eps {
                continue;
            }
            let a = (si - sj) / (mi - mj);
            (a, si - a * mi)
        };
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            continue;
        }
        let count = count_inliers(&corr, a, b, params.inlier_threshold);
        if best.is_none_or(|(c, _, _)| count > c) {
            best = Some((count, a, b));
        }
    }
    let (best_count, ha, hb) = best.ok_or_else(|| {
        Error::Degenerate("no non-degenerate positive-scale hypothesis".into())
    })?;
    let needed = params.min_inliers_for(n);
    if best_count < needed {
        return Err(Error::NoConsensus {
            best: best_count,
            needed,
        });
    }

    let mut inlier_flags = vec![false; sparse.entries.len()];
    let mut inliers = Vec::with_capacity(best_count);
    for &(m, s, idx) in &corr {
        if ((ha * m + hb - s) / s).abs() < params.inlier_threshold {
            inlier_flags[idx] = true;
            inliers.push((m, s));
        }
    }
    let (scale, shift) = least_squares_fit(inliers.iter().copied(), params.scale_only)
        .ok_or_else(|| Error::Degenerate("inlier set has no depth spread".into()))?;
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    Ok(AlignmentResult {
        scale,
        shift,
        inlier_count: inliers.len(),
        inlier_flags,
        residual_rms: rms(inliers.iter().copied(), scale, shift),
        correspondences: n,
    })
}

/// `scale * d + shift` on valid pixels; results `<= 0` become invalid.
pub fn apply_alignment(mono: &DepthMap, alignment: &AlignmentResult) -> DepthMap {
    let (a, b) = (alignment.scale, alignment.shift);
    mono.map_valid(|v| a * v + b)
}
