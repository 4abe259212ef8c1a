//! Covisibility, pair mining, resize-and-pad, score filtering and splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::sparse_depth_for_image;
use crate::colmap::{CameraIntrinsics, CameraModel, ImageId, SparseModel};
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::geometry::{depth_quantile_scale, quantile_nearest_rank, relative_pose, RelativePose};

/// Shared 3D point counts keyed by `(a, b)` with `a < b`.
pub type Covisibility = BTreeMap<(ImageId, ImageId), u32>;

pub fn covisibility_graph(model: &SparseModel) -> Covisibility {
    let mut graph = Covisibility::new();
    let mut ids = Vec::new();
    for point in model.points.values() {
        ids.clear();
        ids.extend(point.track.iter().map(|t| t.image_id));
        ids.sort_unstable();
        ids.dedup();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                *graph.entry((a, b)).or_default() += 1;
            }
        }
    }
    graph
}

/// Symmetric lookup; 0 when the images share nothing.
pub fn shared_points(graph: &Covisibility, a: ImageId, b: ImageId) -> u32 {
    graph.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub name: String,
    /// Capture time in seconds; `None` when unknown.
    pub timestamp: Option<i64>,
    pub width: u32,
    pub height: u32,
}

impl ImageMeta {
    pub fn aspect_ratio(&self) -> f64 {
        self.width as f64 / self.height as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    pub min_shared: u32,
    pub max_dt: i64,
    pub aspect_tol: f64,
    pub quantile: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_shared: 50,
            max_dt: 10800,
            aspect_tol: 0.01,
            quantile: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub scene_id: String,
    pub ref_image_id: ImageId,
    pub tgt_image_id: ImageId,
    pub shared_points: u32,
    /// Target capture time minus reference capture time.
    pub timestamp_delta: Option<i64>,
    pub relative: RelativePose,
    pub translation_scale: f64,
    /// Reference image width over height.
    pub aspect_ratio: f64,
}

/// Relative aspect difference `|a - b| / max(a, b)`.
pub fn aspect_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

/// Passes the lighting-proxy window only if both times are known.
pub fn within_time_window(a: Option<i64>, b: Option<i64>, max_dt: i64) -> bool {
    matches!((a, b), (Some(a), Some(b)) if (b - a).abs() <= max_dt)
}

/// Supplies the per-reference translation scale.
pub trait DepthScaleSource: Sync {
    fn translation_scale(&self, model: &SparseModel, image_id: ImageId, q: f64) -> Result<f64>;
}

/// Quantile over the reference's sparse SfM depths.
pub struct SparseDepthScale;

impl DepthScaleSource for SparseDepthScale {
    fn translation_scale(&self, model: &SparseModel, image_id: ImageId, q: f64) -> Result<f64> {
        let sparse = sparse_depth_for_image(model, image_id)?;
        let mut depths: Vec<f64> = sparse.entries.iter().map(|e| e.depth).collect();
        quantile_nearest_rank(&mut depths, q)
    }
}

/// Quantile over aligned dense depth maps, falling back to sparse depths
/// for images without one.
pub struct AlignedDepthScale<'a>(pub &'a HashMap<ImageId, DepthMap>);

impl DepthScaleSource for AlignedDepthScale<'_> {
    fn translation_scale(&self, model: &SparseModel, image_id: ImageId, q: f64) -> Result<f64> {
        match self.0.get(&image_id) {
            Some(d) => depth_quantile_scale(d, q),
            None => SparseDepthScale.translation_scale(model, image_id, q),
        }
    }
}

pub fn mine_pairs(
    scene_id: &str,
    model: &SparseModel,
    metas: &BTreeMap<ImageId, ImageMeta>,
    config: &MiningConfig,
) -> Result<Vec<PairRecord>> {
    mine_pairs_with(scene_id, model, metas, config, &SparseDepthScale)
}

/// Emits both orderings of every image pair passing the shared-point,
/// capture-time and aspect-ratio filters, sorted by `(ref, tgt)`.
pub fn mine_pairs_with(
    scene_id: &str,
    model: &SparseModel,
    metas: &BTreeMap<ImageId, ImageMeta>,
    config: &MiningConfig,
    scales: &dyn DepthScaleSource,
) -> Result<Vec<PairRecord>> {
    if let Some(&id) = model.images.keys().find(|id| !metas.contains_key(id)) {
        return Err(Error::MissingMetadata(id));
    }
    let graph = covisibility_graph(model);
    let accepted: Vec<(ImageId, ImageId, u32)> = graph
        .iter()
        .filter(|(&(a, b), &n)| {
            let (ma, mb) = (&metas[&a], &metas[&b]);
            n >= config.min_shared
                && within_time_window(ma.timestamp, mb.timestamp, config.max_dt)
                && aspect_difference(ma.aspect_ratio(), mb.aspect_ratio()) <= config.aspect_tol
        })
        .map(|(&(a, b), &n)| (a, b, n))
        .collect();

    let refs: BTreeSet<ImageId> = accepted.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    let scale: BTreeMap<ImageId, f64> = refs
        .into_par_iter()
        .map(|id| scales.translation_scale(model, id, config.quantile).map(|s| (id, s)))
        .collect::<Result<_>>()?;

    let mut records: Vec<PairRecord> = accepted
        .par_iter()
        .flat_map_iter(|&(a, b, n)| [(a, b, n), (b, a, n)])
        .map(|(r, t, n)| {
            let (ri, ti) = (&model.images[&r], &model.images[&t]);
            let (mr, mt) = (&metas[&r], &metas[&t]);
            PairRecord {
                scene_id: scene_id.to_string(),
                ref_image_id: r,
                tgt_image_id: t,
                shared_points: n,
                timestamp_delta: mr.timestamp.zip(mt.timestamp).map(|(a, b)| b - a),
                relative: relative_pose(&ri.pose, &ti.pose),
                translation_scale: scale[&r],
                aspect_ratio: mr.aspect_ratio(),
            }
        })
        .collect();
    records.sort_by_key(|p| (p.ref_image_id, p.tgt_image_id));
    Ok(records)
}

pub const PAIR_HEADER: &str = "scene_id\tref_image_id\ttgt_image_id\tshared_points\ttimestamp_delta\tqw\tqx\tqy\tqz\ttx\tty\ttz\ttranslation_scale\taspect_ratio";

impl PairRecord {
    pub fn to_tsv(&self) -> String {
        let q = self.relative.rotation.quaternion();
        let t = &self.relative.translation;
        let dt = self.timestamp_delta.map_or("NONE".to_string(), |d| d.to_string());
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scene_id,
            self.ref_image_id,
            self.tgt_image_id,
            self.shared_points,
            dt,
            q.w,
            q.i,
            q.j,
            q.k,
            t.x,
            t.y,
            t.z,
            self.translation_scale,
            self.aspect_ratio
        )
    }

    pub fn from_tsv(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 14 {
            return Err(format!("expected 14 fields, found {}", f.len()));
        }
        let real = |i: usize| f[i].parse::<f64>().map_err(|_| format!("field {} is not a number: {:?}", i + 1, f[i]));
        let int = |i: usize| f[i].parse::<u32>().map_err(|_| format!("field {} is not an integer: {:?}", i + 1, f[i]));
        let timestamp_delta = match f[4] {
            "NONE" => None,
            s => Some(s.parse::<i64>().map_err(|_| format!("invalid timestamp delta {s:?}"))?),
        };
        Ok(PairRecord {
            scene_id: f[0].to_string(),
            ref_image_id: int(1)?,
            tgt_image_id: int(2)?,
            shared_points: int(3)?,
            timestamp_delta,
            relative: RelativePose {
                rotation: UnitQuaternion::new_unchecked(Quaternion::new(real(5)?, real(6)?, real(7)?, real(8)?)),
                translation: Vector3::new(real(9)?, real(10)?, real(11)?),
            },
            translation_scale: real(12)?,
            aspect_ratio: real(13)?,
        })
    }
}

pub fn write_pairs(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    let mut s = String::with_capacity(64 * (pairs.len() + 1));
    s.push_str(PAIR_HEADER);
    s.push('\n');
    for p in pairs {
        let _ = writeln!(s, "{}", p.to_tsv());
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == PAIR_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "missing pair header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            PairRecord::from_tsv(l).map_err(|msg| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            })
        })
        .collect()
}

/// Where the resized content sits inside the padded square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub scale: f64,
    pub offset_x: u32,
    pub offset_y: u32,
    pub content_width: u32,
    pub content_height: u32,
    pub source_width: u32,
    pub source_height: u32,
    pub target: u32,
}

impl Placement {
    pub fn new(width: u32, height: u32, target: u32) -> Result<Self> {
        if width == 0 || height == 0 || target == 0 {
            return Err(Error::InvalidInput(format!(
                "cannot place a {width}x{height} image in a {target} square"
            )));
        }
        let long = width.max(height);
        let scale = target as f64 / long as f64;
        let side = |v: u32| if v == long { target } else { ((v as f64 * scale).round() as u32).clamp(1, target) };
        let (cw, ch) = (side(width), side(height));
        Ok(Placement {
            scale,
            offset_x: (target - cw) / 2,
            offset_y: (target - ch) / 2,
            content_width: cw,
            content_height: ch,
            source_width: width,
            source_height: height,
            target,
        })
    }

    /// Per-axis factors; they differ from `scale` only by rounding.
    pub fn axis_scales(&self) -> (f64, f64) {
        (
            self.content_width as f64 / self.source_width as f64,
            self.content_height as f64 / self.source_height as f64,
        )
    }

    pub fn to_target(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.axis_scales();
        (x * sx + self.offset_x as f64, y * sy + self.offset_y as f64)
    }

    pub fn to_source(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.axis_scales();
        ((x - self.offset_x as f64) / sx, (y - self.offset_y as f64) / sy)
    }

    /// Camera whose image is the padded square. Single-focal models are
    /// promoted to their two-focal equivalent.
    pub fn apply_to_camera(&self, camera: &CameraIntrinsics) -> Result<CameraIntrinsics> {
        let (sx, sy) = self.axis_scales();
        let (fx, fy) = camera.focal();
        let (cx, cy) = camera.principal_point();
        let (ox, oy) = (self.offset_x as f64, self.offset_y as f64);
        let lin = [fx * sx, fy * sy, cx * sx + ox, cy * sy + oy];
        let p = &camera.params;
        let (model, params) = match camera.model {
            CameraModel::SimplePinhole | CameraModel::Pinhole => (CameraModel::Pinhole, lin.to_vec()),
            CameraModel::SimpleRadial => (CameraModel::OpenCv, [&lin[..], &[p[3], 0.0, 0.0, 0.0]].concat()),
            CameraModel::Radial => (CameraModel::OpenCv, [&lin[..], &[p[3], p[4], 0.0, 0.0]].concat()),
            CameraModel::OpenCv => (CameraModel::OpenCv, [&lin[..], &p[4..8]].concat()),
        };
        CameraIntrinsics::new(camera.camera_id, model, self.target as u64, self.target as u64, params)
    }
}

/// Scales the long side to `target` with bilinear filtering and centers the
/// result in a `target` square filled with `pad`.
pub fn resize_pad(image: &RgbImage, target: u32, pad: [u8; 3]) -> Result<(RgbImage, Placement)> {
    let pl = Placement::new(image.width(), image.height(), target)?;
    let content = if (pl.content_width, pl.content_height) == image.dimensions() {
        image.clone()
    } else {
        imageops::resize(image, pl.content_width, pl.content_height, FilterType::Triangle)
    };
    let mut out = RgbImage::from_pixel(target, target, Rgb(pad));
    imageops::replace(&mut out, &content, pl.offset_x as i64, pl.offset_y as i64);
    Ok((out, pl))
}

/// Per-pair classifier scores keyed by scene and unordered image pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairScores(pub HashMap<(String, ImageId, ImageId), f64>);

impl PairScores {
    pub fn insert(&mut self, scene: &str, a: ImageId, b: ImageId, score: f64) {
        self.0.insert((scene.to_string(), a.min(b), a.max(b)), score);
    }

    pub fn get(&self, scene: &str, a: ImageId, b: ImageId) -> Option<f64> {
        self.0.get(&(scene.to_string(), a.min(b), a.max(b))).copied()
    }

    /// Lines `scene_id<TAB>image_a<TAB>image_b<TAB>score`; `#` starts a
    /// comment.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scores = PairScores::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad("expected scene, image, image, score"));
            }
            let a = f[1].parse().map_err(|_| bad("invalid image id"))?;
            let b = f[2].parse().map_err(|_| bad("invalid image id"))?;
            let s: f64 = f[3].parse().map_err(|_| bad("invalid score"))?;
            scores.insert(f[0], a, b, s);
        }
        Ok(scores)
    }
}

/// Keeps exactly the pairs whose score is `>= threshold`.
pub fn filter_pairs_by_score(pairs: &[PairRecord], scores: &PairScores, threshold: f64) -> Result<Vec<PairRecord>> {
    let mut kept = Vec::with_capacity(pairs.len());
    for p in pairs {
        let s = scores
            .get(&p.scene_id, p.ref_image_id, p.tgt_image_id)
            .ok_or(Error::MissingScore(p.ref_image_id, p.tgt_image_id))?;
        if s >= threshold {
            kept.push(p.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<PairRecord>,
    pub val: Vec<PairRecord>,
    pub test: Vec<PairRecord>,
    pub holdout_scenes: Vec<String>,
}

fn pair_key(p: &PairRecord) -> (&str, ImageId, ImageId) {
    (&p.scene_id, p.ref_image_id, p.tgt_image_id)
}

/// Holds out a seeded random subset of scenes; the first `val_pairs`
/// holdout pairs in `(scene, ref, tgt)` order form validation.
pub fn split_holdout(pairs: &[PairRecord], holdout_scenes: usize, val_pairs: usize, seed: u64) -> Result<Split> {
    let scenes: BTreeSet<&str> = pairs.iter().map(|p| p.scene_id.as_str()).collect();
    if holdout_scenes > scenes.len() {
        return Err(Error::InvalidInput(format!(
            "cannot hold out {holdout_scenes} of {} scenes",
            scenes.len()
        )));
    }
    let mut order: Vec<&str> = scenes.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held: Vec<String> = order[..holdout_scenes].iter().map(|s| s.to_string()).collect();
    held.sort();
    let held_set: BTreeSet<&str> = held.iter().map(String::as_str).collect();

    let mut sorted: Vec<&PairRecord> = pairs.iter().collect();
    sorted.sort_by(|a, b| pair_key(a).cmp(&pair_key(b)));
    let mut split = Split::default();
    for p in sorted {
        if !held_set.contains(p.scene_id.as_str()) {
            split.train.push(p.clone());
        } else if split.val.len() < val_pairs {
            split.val.push(p.clone());
        } else {
            split.test.push(p.clone());
        }
    }
    split.holdout_scenes = held;
    Ok(split)
}

/// One scene id per line; blank lines and `#` comments are skipped.
pub fn read_scene_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
