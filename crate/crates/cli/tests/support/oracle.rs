//! Independent reference computations for the desk scene goldens.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use image::RgbImage;
use nvskit::depth::DepthMap;
use nvskit::warp::{warp, WarpConfig};
use rayon::prelude::*;

use super::desk::{mono_values, view_index, Scene};

pub const MIN_SHARED: usize = 50;
pub const MAX_DT: i64 = 10800;
pub const ASPECT_TOL: f64 = 0.01;

/// Whole seconds of a `YYYY:MM:DD HH:MM:SS` stamp, by days-from-civil.
pub fn seconds(stamp: &str) -> i64 {
    let n: Vec<i64> = stamp
        .split([':', ' '])
        .map(|p| p.parse().unwrap())
        .collect();
    let (y, m, d) = (n[0] - (n[1] <= 2) as i64, n[1], n[2]);
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let doy = (153 * (m + if m > 2 { -3 } else { 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146097 + doe - 719468;
    days * 86400 + n[3] * 3600 + n[4] * 60 + n[5]
}

/// `(ref, tgt, shared)` for every accepted ordered pair, by brute force over
/// point tracks.
pub fn pairs(scene: &Scene) -> Vec<(u32, u32, usize)> {
    let mut seen: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
    for p in scene.model.points.values() {
        for t in &p.track {
            seen.entry(t.image_id).or_default().insert(p.point3d_id);
        }
    }
    let mut out = Vec::new();
    for a in &scene.views {
        for b in &scene.views {
            if a.id == b.id {
                continue;
            }
            let shared = seen[&a.id].intersection(&seen[&b.id]).count();
            let dt = (seconds(&a.time) - seconds(&b.time)).abs();
            let ar = |v: &super::desk::View| v.camera.width as f64 / v.camera.height as f64;
            let (ra, rb) = (ar(a), ar(b));
            let aspect_ok = (ra - rb).abs() / ra.max(rb) <= ASPECT_TOL;
            if shared >= MIN_SHARED && dt <= MAX_DT && aspect_ok {
                out.push((a.id, b.id, shared));
            }
        }
    }
    out
}

/// Closed-form least-squares `(scale, shift)` over every observation with a
/// valid monocular sample at its nearest pixel, and the largest relative
/// residual under that fit.
pub fn alignment(scene: &Scene, id: u32) -> (f64, f64, f64) {
    let v = &scene.views[view_index(scene)[&id]];
    let mono = mono_values(v);
    let w = v.camera.width as usize;
    let img = &scene.model.images[&id];
    let mut samples = Vec::new();
    for obs in &img.points2d {
        let p = &scene.model.points[&obs.point3d_id.unwrap()];
        let z = (v.pose.rotation * p.xyz + v.pose.translation).z;
        let m = mono[obs.y.floor() as usize * w + obs.x.floor() as usize];
        if m > 0.0 && z > 0.0 {
            samples.push((m, z));
        }
    }
    let n = samples.len() as f64;
    let (sm, ss) = samples.iter().fold((0.0, 0.0), |(a, b), (m, s)| (a + m, b + s));
    let (smm, sms) = samples.iter().fold((0.0, 0.0), |(a, b), (m, s)| (a + m * m, b + m * s));
    let scale = (n * sms - sm * ss) / (n * smm - sm * sm);
    let shift = (ss - scale * sm) / n;
    let worst = samples
        .iter()
        .map(|(m, s)| ((scale * m + shift - s) / s).abs())
        .fold(0.0, f64::max);
    (scale, shift, worst)
}

pub fn masked_psnr(a: &RgbImage, b: &RgbImage, mask: &[bool]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (i, (pa, pb)) in a.pixels().zip(b.pixels()).enumerate() {
        if mask[i] {
            for c in 0..3 {
                sum += (pa.0[c] as f64 - pb.0[c] as f64).powi(2);
            }
            n += 3.0;
        }
    }
    (n > 0.0).then(|| if sum == 0.0 { 100.0 } else { 10.0 * (255.0f64.powi(2) * n / sum).log10() })
}

/// Direct-sum SSIM over every 11x11 window lying wholly inside the mask.
pub fn masked_ssim(a: &RgbImage, b: &RgbImage, mask: &[bool]) -> Option<f64> {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = [0.0; 3];
    let mut count = 0usize;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            if !(0..11).all(|j| (0..11).all(|i| mask[(y0 + j) * w + x0 + i])) {
                continue;
            }
            count += 1;
            for (c, t) in total.iter_mut().enumerate() {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let wt = g[i] * g[j] / (gs * gs);
                        let pa = a.get_pixel((x0 + i) as u32, (y0 + j) as u32).0[c] as f64;
                        let pb = b.get_pixel((x0 + i) as u32, (y0 + j) as u32).0[c] as f64;
                        ma += wt * pa;
                        mb += wt * pb;
                        aa += wt * pa * pa;
                        bb += wt * pb * pb;
                        ab += wt * pa * pb;
                    }
                }
                let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
                *t += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
    }
    (count > 0).then(|| total.iter().map(|t| t / count as f64).sum::<f64>() / 3.0)
}

pub struct PairMetrics {
    pub ref_id: u32,
    pub tgt_id: u32,
    pub masked_psnr: Option<f64>,
    pub masked_ssim: Option<f64>,
}

/// Renders each pair from depth aligned with the oracle fit (rounded to the
/// stored f32 precision) and scores the masked region against the target
/// render.
pub fn metrics(scene: &Scene, pairs: &[(u32, u32, usize)]) -> Vec<PairMetrics> {
    let idx = view_index(scene);
    let aligned: BTreeMap<u32, DepthMap> = scene
        .views
        .iter()
        .map(|v| {
            let (a, b, _) = alignment(scene, v.id);
            let vals = mono_values(v)
                .iter()
                .map(|&m| if m > 0.0 { (a * m + b) as f32 as f64 } else { 0.0 })
                .collect();
            (v.id, DepthMap::from_values(v.camera.width as usize, v.camera.height as usize, vals).unwrap())
        })
        .collect();
    pairs
        .par_iter()
        .map(|&(r, t, _)| {
            let (rv, tv) = (&scene.views[idx[&r]], &scene.views[idx[&t]]);
            let out = warp(&rv.rgb, &aligned[&r], &rv.camera, &rv.pose, &tv.camera, &tv.pose, &WarpConfig::default())
                .unwrap();
            PairMetrics {
                ref_id: r,
                tgt_id: t,
                masked_psnr: masked_psnr(&out.rgb, &tv.rgb, &out.mask),
                masked_ssim: masked_ssim(&out.rgb, &tv.rgb, &out.mask),
            }
        })
        .collect()
}
