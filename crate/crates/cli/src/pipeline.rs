//! Per-stage commands over sparse models, depth maps and images.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::Args;
use image::RgbImage;
use nvskit::align::{apply_alignment, ransac_align, sparse_depth_for_image, AlignmentResult, RansacParams};
use nvskit::colmap::{parse_model_with, write_model, ImageId, ModelFormat, ParseOptions, Pose, SparseModel};
use nvskit::depth::{read_depth, write_pfm, DepthMap};
use nvskit::geometry::gravity_align;
use nvskit::keypoints::{mask_border_keypoints, watermark_trigger, KeypointSet};
use nvskit::metrics::{report, MetricReport, MetricSummary};
use nvskit::pairs::{
    filter_pairs_by_score, mine_pairs_with, read_pairs, read_scene_list, split_holdout, write_pairs, AlignedDepthScale,
    DepthScaleSource, ImageMeta, MiningConfig, PairRecord, PairScores, SparseDepthScale,
};
use nvskit::timestamp::{image_timestamp, parse_timestamp_text};
use nvskit::warp::{read_mask_png, warp as warp_pair, write_key_values, WarpConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::run::{create_dir, data_err, read_text, sibling, write_text, CmdResult, Ctx, Failure};

#[derive(Args)]
pub struct ParseArgs {
    /// Model directory (cameras/images/points3D).
    #[arg(long)]
    model: PathBuf,
    /// Write the parsed model here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "binary")]
    out_format: String,
    /// Rotate the model so the mean camera up vector is +z.
    #[arg(long)]
    gravity_align: bool,
}

#[derive(Args)]
pub struct AlignArgs {
    #[arg(long)]
    model: PathBuf,
    /// Monocular depth maps named after the images (`.pfm` or `.png`).
    #[arg(long)]
    mono: PathBuf,
    /// Aligned depth maps and `alignments.tsv` go here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct MineArgs {
    #[arg(long)]
    model: PathBuf,
    /// Image files; capture times come from embedded metadata or a
    /// `<image>.meta` sidecar.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scene id recorded in every pair (defaults to the model directory
    /// name).
    #[arg(long)]
    scene: Option<String>,
    /// Aligned depth maps to take translation scales from.
    #[arg(long)]
    aligned: Option<PathBuf>,
    /// Pair scores (scene, a, b, score); pairs below score_threshold are
    /// dropped.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
pub struct PairSelection {
    /// Pair list written by `mine`.
    #[arg(long, conflicts_with = "pair")]
    pairs: Option<PathBuf>,
    /// A single pair as REF:TGT image ids.
    #[arg(long)]
    pair: Option<String>,
}

#[derive(Args)]
pub struct WarpArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    images: PathBuf,
    /// Aligned depth maps written by `align`.
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    select: PairSelection,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Target images.
    #[arg(long)]
    images: PathBuf,
    /// Output of `warp` (masks, and generated images unless --generated).
    #[arg(long)]
    warps: PathBuf,
    /// Generated images named `<ref>_<tgt>.png`.
    #[arg(long)]
    generated: Option<PathBuf>,
    /// Per-pair metrics (defaults to `<warps>/metrics.tsv`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    select: PairSelection,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Pair lists to pool.
    #[arg(long, num_args = 1.., required = true)]
    pairs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Scene ids to drop before splitting.
    #[arg(long)]
    exclude: Option<PathBuf>,
}

#[derive(Args)]
pub struct MaskArgs {
    /// A keypoint file or a directory of `.txt` keypoint files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pair labels (pair id, 0/1 watermark flag); masking only runs when
    /// the watermark share reaches the trigger.
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn load_model(ctx: &Ctx, dir: &Path) -> Result<SparseModel, Failure> {
    let (model, repair) = parse_model_with(
        dir,
        ParseOptions {
            format: ctx.cfg.model_format,
            lenient: ctx.cfg.lenient,
        },
    )?;
    if !repair.is_clean() {
        ctx.log(format!("repaired {}: {repair:?}", dir.display()));
    }
    Ok(model)
}

pub fn parse(ctx: &Ctx, args: &ParseArgs) -> CmdResult {
    let out_format: ModelFormat = args
        .out_format
        .parse()
        .map_err(|e: nvskit::Error| Failure::Config(e.to_string()))?;
    let (model, repair) = parse_model_with(
        &args.model,
        ParseOptions {
            format: ctx.cfg.model_format,
            lenient: ctx.cfg.lenient,
        },
    )?;
    let (model, aligned) = if args.gravity_align {
        let (m, _) = gravity_align(&model)?;
        (m, true)
    } else {
        (model, false)
    };
    let observations: usize = model.points.values().map(|p| p.track.len()).sum();
    let summary = json!({
        "cameras": model.cameras.len(),
        "images": model.images.len(),
        "points": model.points.len(),
        "observations": observations,
        "dropped_track_elements": repair.dropped_track_elements,
        "dropped_observations": repair.dropped_observations,
        "dropped_points": repair.dropped_points,
        "gravity_aligned": aligned,
    });
    if let Some(out) = &args.out {
        if ctx.dry_run {
            return Ok(ctx.plan(std::slice::from_ref(&out), summary));
        }
        write_model(&model, out, out_format)?;
    }
    Ok(summary)
}

fn mono_path(dir: &Path, name: &str) -> Option<PathBuf> {
    ["pfm", "png"].iter().map(|e| sibling(dir, name, e)).find(|p| p.is_file())
}

fn align_one(ctx: &Ctx, model: &SparseModel, id: ImageId, mono_dir: &Path) -> Result<(AlignmentResult, DepthMap), Failure> {
    let name = &model.image(id)?.name;
    let path = mono_path(mono_dir, name).ok_or_else(|| Failure::Data(format!("no monocular depth for {name}")))?;
    let mut mono = read_depth(&path)?;
    if ctx.cfg.invert_input {
        mono = mono.inverted();
    }
    let sparse = sparse_depth_for_image(model, id)?;
    let params = RansacParams {
        iterations: ctx.cfg.ransac_iterations,
        inlier_threshold: ctx.cfg.inlier_threshold,
        min_inliers: ctx.cfg.min_inliers,
        seed: ctx.cfg.seed.wrapping_add(id as u64),
        scale_only: ctx.cfg.scale_only,
    };
    let a = ransac_align(&mono, &sparse, &params)?;
    let aligned = apply_alignment(&mono, &a);
    Ok((a, aligned))
}

const ALIGN_HEADER: &str = "image_id\tname\tscale\tshift\tinliers\tcorrespondences\tresidual_rms";

pub fn align(ctx: &Ctx, args: &AlignArgs) -> CmdResult {
    let model = load_model(ctx, &args.model)?;
    let ids: Vec<ImageId> = model.images.keys().copied().collect();
    let table = args.out.join("alignments.tsv");
    if ctx.dry_run {
        let mut outs: Vec<PathBuf> = model.images.values().map(|i| sibling(&args.out, &i.name, "pfm")).collect();
        outs.push(table);
        return Ok(ctx.plan(&outs, json!({"images": ids.len()})));
    }
    create_dir(&args.out)?;
    let results: Vec<_> = ids
        .par_iter()
        .map(|&id| {
            let r = align_one(ctx, &model, id, &args.mono);
            if let Ok((_, depth)) = &r {
                let path = sibling(&args.out, &model.images[&id].name, "pfm");
                if let Some(parent) = path.parent() {
                    create_dir(parent)?;
                }
                write_pfm(depth, &path)?;
            }
            Ok::<_, Failure>(r)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = format!("{ALIGN_HEADER}\n");
    let mut failed = Vec::new();
    for (&id, r) in ids.iter().zip(&results) {
        let name = &model.images[&id].name;
        match r {
            Ok((a, _)) => {
                ctx.log(format!(
                    "{name}: scale {} shift {} inliers {}/{}",
                    a.scale, a.shift, a.inlier_count, a.correspondences
                ));
                rows.push_str(&format!(
                    "{id}\t{name}\t{}\t{}\t{}\t{}\t{}\n",
                    a.scale, a.shift, a.inlier_count, a.correspondences, a.residual_rms
                ));
            }
            Err(e) => {
                ctx.log(format!("{name}: skipped: {}", e.message()));
                failed.push(json!({"image_id": id, "error": e.message()}));
            }
        }
    }
    write_text(&table, &rows)?;
    Ok(json!({"images": ids.len(), "aligned": ids.len() - failed.len(), "failed": failed}))
}

/// Alignment rows keyed by image id: (scale, shift).
fn read_alignments(path: &Path) -> Result<HashMap<ImageId, (String, String)>, Failure> {
    let mut out = HashMap::new();
    if !path.is_file() {
        return Ok(out);
    }
    for (i, line) in read_text(path)?.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let id = f
            .first()
            .and_then(|s| s.parse().ok())
            .filter(|_| f.len() == 7)
            .ok_or_else(|| data_err(path, format!("line {}: malformed alignment row", i + 1)))?;
        out.insert(id, (f[2].to_string(), f[3].to_string()));
    }
    Ok(out)
}

fn image_meta(images: &Path, name: &str) -> Result<ImageMeta, Failure> {
    let path = images.join(name);
    let (width, height) = image::image_dimensions(&path).map_err(|e| data_err(&path, e))?;
    let sidecar = PathBuf::from(format!("{}.meta", path.display()));
    let timestamp = image_timestamp(&path).or_else(|| {
        std::fs::read_to_string(&sidecar)
            .ok()
            .and_then(|t| parse_timestamp_text(&t))
    });
    Ok(ImageMeta {
        name: name.to_string(),
        timestamp,
        width,
        height,
    })
}

pub fn mine(ctx: &Ctx, args: &MineArgs) -> CmdResult {
    let model = load_model(ctx, &args.model)?;
    let scene = match &args.scene {
        Some(s) => s.clone(),
        None => args
            .model
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "scene".into()),
    };
    let metas: BTreeMap<ImageId, ImageMeta> = model
        .images
        .par_iter()
        .map(|(&id, img)| image_meta(&args.images, &img.name).map(|m| (id, m)))
        .collect::<Result<_, _>>()?;
    for m in metas.values() {
        let t = m.timestamp.map_or("none".to_string(), |t| t.to_string());
        ctx.log(format!("{}: {}x{} time {t}", m.name, m.width, m.height));
    }
    let aligned: HashMap<ImageId, DepthMap> = match &args.aligned {
        Some(dir) => model
            .images
            .iter()
            .filter_map(|(&id, img)| {
                let p = sibling(dir, &img.name, "pfm");
                p.is_file().then(|| read_depth(&p).map(|d| (id, d)))
            })
            .collect::<Result<_, _>>()?,
        None => HashMap::new(),
    };
    let scales: &dyn DepthScaleSource = if args.aligned.is_some() {
        &AlignedDepthScale(&aligned)
    } else {
        &SparseDepthScale
    };
    let config = MiningConfig {
        min_shared: ctx.cfg.min_shared,
        max_dt: ctx.cfg.max_dt,
        aspect_tol: ctx.cfg.aspect_tol,
        quantile: ctx.cfg.quantile,
    };
    let mut pairs = mine_pairs_with(&scene, &model, &metas, &config, scales)?;
    let mined = pairs.len();
    if let Some(path) = &args.scores {
        pairs = filter_pairs_by_score(&pairs, &PairScores::read(path)?, ctx.cfg.score_threshold)?;
    }
    if ctx.dry_run {
        return Ok(ctx.plan(std::slice::from_ref(&args.out), json!({"scene": scene, "pairs": pairs.len()})));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_pairs(&args.out, &pairs)?;
    Ok(json!({"scene": scene, "images": metas.len(), "mined": mined, "pairs": pairs.len()}))
}

fn parse_pair(s: &str) -> Result<(ImageId, ImageId), Failure> {
    s.split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .ok_or_else(|| Failure::Config(format!("--pair expects REF:TGT, got '{s}'")))
}

/// Selected (ref, tgt) ids in canonical order.
fn selected_pairs(sel: &PairSelection) -> Result<Vec<(ImageId, ImageId)>, Failure> {
    let mut ids: Vec<(ImageId, ImageId)> = match (&sel.pairs, &sel.pair) {
        (Some(p), None) => read_pairs(p)?
            .iter()
            .map(|r: &PairRecord| (r.ref_image_id, r.tgt_image_id))
            .collect(),
        (None, Some(p)) => vec![parse_pair(p)?],
        _ => return Err(Failure::Config("give exactly one of --pairs or --pair".into())),
    };
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

fn stem(r: ImageId, t: ImageId) -> String {
    format!("{r}_{t}")
}

fn load_rgb(path: &Path) -> Result<RgbImage, Failure> {
    Ok(image::open(path).map_err(|e| data_err(path, e))?.into_rgb8())
}

fn pose_fields(prefix: &str, pose: &Pose) -> Vec<(String, String)> {
    let q = pose.wxyz();
    let t = pose.translation;
    vec![
        (format!("{prefix}_qvec"), format!("{} {} {} {}", q[0], q[1], q[2], q[3])),
        (format!("{prefix}_tvec"), format!("{} {} {}", t.x, t.y, t.z)),
    ]
}

pub fn warp(ctx: &Ctx, args: &WarpArgs) -> CmdResult {
    let model = load_model(ctx, &args.model)?;
    let pairs = selected_pairs(&args.select)?;
    if ctx.dry_run {
        let outs: Vec<PathBuf> = pairs
            .iter()
            .flat_map(|&(r, t)| {
                let s = stem(r, t);
                ["png", "txt"]
                    .map(|e| args.out.join(format!("{s}.{e}")))
                    .into_iter()
                    .chain([args.out.join(format!("{s}_mask.png")), args.out.join(format!("{s}_depth.pfm"))])
            })
            .collect();
        return Ok(ctx.plan(&outs, json!({"pairs": pairs.len()})));
    }
    create_dir(&args.out)?;
    let alignments = read_alignments(&args.depth.join("alignments.tsv"))?;
    let cfg = WarpConfig {
        discontinuity_threshold: ctx.cfg.discontinuity_threshold,
        sentinel: ctx.cfg.sentinel,
    };
    let coverage: Vec<f64> = pairs
        .par_iter()
        .map(|&(r, t)| {
            let (ri, ti) = (model.image(r)?, model.image(t)?);
            let (rc, tc) = (model.camera_for(ri)?, model.camera_for(ti)?);
            let rgb = load_rgb(&args.images.join(&ri.name))?;
            let depth = read_depth(&sibling(&args.depth, &ri.name, "pfm"))?;
            let out = warp_pair(&rgb, &depth, rc, &ri.pose, tc, &ti.pose, &cfg)?;
            let s = stem(r, t);
            out.save(&args.out, &s)?;
            let (scale, shift) = alignments.get(&r).cloned().unwrap_or(("none".into(), "none".into()));
            let mut meta = vec![
                ("ref_image_id".to_string(), r.to_string()),
                ("tgt_image_id".to_string(), t.to_string()),
                ("alignment_scale".to_string(), scale),
                ("alignment_shift".to_string(), shift),
                ("discontinuity_threshold".to_string(), cfg.discontinuity_threshold.to_string()),
                ("sentinel".to_string(), cfg.sentinel.map(|c| c.to_string()).join(",")),
                ("coverage".to_string(), out.coverage().to_string()),
            ];
            meta.extend(pose_fields("ref", &ri.pose));
            meta.extend(pose_fields("tgt", &ti.pose));
            write_key_values(&args.out.join(format!("{s}.txt")), &meta)?;
            Ok::<_, Failure>(out.coverage())
        })
        .collect::<Result<_, _>>()?;
    for (&(r, t), c) in pairs.iter().zip(&coverage) {
        ctx.log(format!("warp {r} -> {t}: coverage {c:.4}"));
    }
    let mean = if coverage.is_empty() { 0.0 } else { coverage.iter().sum::<f64>() / coverage.len() as f64 };
    Ok(json!({"pairs": pairs.len(), "mean_coverage": mean}))
}

const METRIC_HEADER: &str = "ref_image_id\ttgt_image_id\tpsnr\tssim\tmasked_psnr\tmasked_ssim\tcoverage";

fn opt(v: Option<f64>) -> String {
    v.map_or("NONE".to_string(), |v| v.to_string())
}

pub fn eval(ctx: &Ctx, args: &EvalArgs) -> CmdResult {
    let model = load_model(ctx, &args.model)?;
    let pairs = selected_pairs(&args.select)?;
    let out = args.out.clone().unwrap_or_else(|| args.warps.join("metrics.tsv"));
    if ctx.dry_run {
        return Ok(ctx.plan(&[out], json!({"pairs": pairs.len()})));
    }
    let generated = args.generated.as_ref().unwrap_or(&args.warps);
    let reports: Vec<MetricReport> = pairs
        .par_iter()
        .map(|&(r, t)| {
            let s = stem(r, t);
            let gen = load_rgb(&generated.join(format!("{s}.png")))?;
            let target = load_rgb(&args.images.join(&model.image(t)?.name))?;
            let (mask, w, h) = read_mask_png(&args.warps.join(format!("{s}_mask.png")))?;
            if (w as u32, h as u32) != target.dimensions() {
                return Err(Failure::Data(format!("mask {s} is {w}x{h}, target is {:?}", target.dimensions())));
            }
            Ok(report(&gen, &target, &mask)?)
        })
        .collect::<Result<_, _>>()?;
    let mut rows = format!("{METRIC_HEADER}\n");
    let mut summary = MetricSummary::default();
    for (&(r, t), m) in pairs.iter().zip(&reports) {
        ctx.log(format!(
            "eval {r} -> {t}: masked psnr {} ssim {}",
            opt(m.masked_psnr),
            opt(m.masked_ssim)
        ));
        rows.push_str(&format!(
            "{r}\t{t}\t{}\t{}\t{}\t{}\t{}\n",
            m.psnr,
            m.ssim,
            opt(m.masked_psnr),
            opt(m.masked_ssim),
            m.mask_coverage
        ));
        summary.add(m);
    }
    write_text(&out, &rows)?;
    ctx.log(summary.table().trim_end());
    let mean = |s: f64, n: usize| if n == 0 { None } else { Some(s / n as f64) };
    Ok(json!({
        "pairs": summary.pairs,
        "psnr": mean(summary.psnr_sum, summary.pairs),
        "ssim": mean(summary.ssim_sum, summary.pairs),
        "masked_psnr": mean(summary.masked_psnr_sum, summary.masked_psnr_count),
        "masked_ssim": mean(summary.masked_ssim_sum, summary.masked_ssim_count),
        "coverage": mean(summary.coverage_sum, summary.pairs),
    }))
}

pub fn split(ctx: &Ctx, args: &SplitArgs) -> CmdResult {
    let mut pairs = Vec::new();
    for p in &args.pairs {
        pairs.extend(read_pairs(p)?);
    }
    let total = pairs.len();
    if let Some(path) = &args.exclude {
        let excluded = read_scene_list(path)?;
        pairs.retain(|p| !excluded.contains(&p.scene_id));
    }
    let s = split_holdout(&pairs, ctx.cfg.holdout_scenes, ctx.cfg.val_pairs, ctx.cfg.seed)?;
    let names = ["train.tsv", "val.tsv", "test.tsv", "holdout_scenes.txt"];
    let outs: Vec<PathBuf> = names.iter().map(|n| args.out.join(n)).collect();
    let summary = json!({
        "input_pairs": total,
        "excluded_pairs": total - pairs.len(),
        "train": s.train.len(),
        "val": s.val.len(),
        "test": s.test.len(),
        "holdout_scenes": s.holdout_scenes.len(),
    });
    if ctx.dry_run {
        return Ok(ctx.plan(&outs, summary));
    }
    create_dir(&args.out)?;
    write_pairs(&outs[0], &s.train)?;
    write_pairs(&outs[1], &s.val)?;
    write_pairs(&outs[2], &s.test)?;
    let mut held = s.holdout_scenes.join("\n");
    held.push('\n');
    write_text(&outs[3], &held)?;
    Ok(summary)
}

fn read_labels(path: &Path) -> Result<Vec<(String, bool)>, Failure> {
    let mut out = Vec::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || data_err(path, format!("line {}: expected '<pair id>\\t<0|1>'", i + 1));
        let (id, flag) = line.rsplit_once(['\t', ' ']).ok_or_else(bad)?;
        let flag = match flag.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad()),
        };
        out.push((id.trim().to_string(), flag));
    }
    Ok(out)
}

pub fn mask_keypoints(ctx: &Ctx, args: &MaskArgs) -> CmdResult {
    let files: Vec<PathBuf> = if args.input.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(&args.input)
            .map_err(|e| data_err(&args.input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        v.sort();
        v
    } else {
        vec![args.input.clone()]
    };
    let triggered = match &args.labels {
        Some(p) => watermark_trigger(&read_labels(p)?)?,
        None => true,
    };
    let outs: Vec<PathBuf> = files
        .iter()
        .map(|f| args.out.join(f.file_name().expect("listed files have names")))
        .collect();
    if ctx.dry_run {
        return Ok(ctx.plan(&outs, json!({"files": files.len(), "triggered": triggered})));
    }
    create_dir(&args.out)?;
    let (mut kept, mut removed) = (0, 0);
    for (src, dst) in files.iter().zip(&outs) {
        let kps = KeypointSet::read(src)?;
        let masked = if triggered {
            mask_border_keypoints(&kps, ctx.cfg.border_fraction)?
        } else {
            kps.clone()
        };
        ctx.log(format!(
            "{}: kept {} of {}",
            src.display(),
            masked.points.len(),
            kps.points.len()
        ));
        kept += masked.points.len();
        removed += kps.points.len() - masked.points.len();
        masked.write(dst)?;
    }
    Ok(json!({"files": files.len(), "triggered": triggered, "kept": kept, "removed": removed}))
}
