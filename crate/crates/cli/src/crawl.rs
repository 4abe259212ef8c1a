//! `identify` and `manifest`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use nvskit_crawler::scenes::expand_glam_classes;
use nvskit_crawler::{
    build_manifest, cyclic_link_filter, from_jsonl, glam_filter, identify_scenes, read_list, recurse_subcategories,
    to_jsonl, CachingTransport, Client, DenyAll, LiveConfig, LiveTransport, RecursionRules, SceneCategory, Transport,
};
use serde_json::json;

use crate::run::{read_text, write_text, CmdResult, Ctx, Failure};

#[derive(Args)]
pub struct IdentifyArgs {
    /// Scene class ids, one per line (defaults to the shipped list).
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Output scene list, one JSON record per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ManifestArgs {
    /// Scene list written by `identify`.
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Where to list files lacking license metadata.
    #[arg(long)]
    unlicensed: Option<PathBuf>,
}

/// Runs `f` with the transport the configuration selects.
fn with_transport<R>(ctx: &Ctx, f: impl FnOnce(&dyn Transport) -> Result<R, Failure>) -> Result<R, Failure> {
    let cfg = &ctx.cfg;
    if cfg.offline {
        let dir = cfg
            .cache_dir
            .clone()
            .ok_or_else(|| Failure::Config("offline mode needs cache_dir".into()))?;
        return f(&CachingTransport::new(DenyAll::default(), dir));
    }
    let ua = cfg
        .user_agent
        .clone()
        .ok_or_else(|| Failure::Config("live crawling needs user_agent (or offline=true)".into()))?;
    let live = LiveTransport::new(LiveConfig::new(ua))?;
    match &cfg.cache_dir {
        Some(dir) => f(&CachingTransport::new(live, dir.clone())),
        None => f(&live),
    }
}

fn list_or(path: &Option<PathBuf>, default: Vec<String>) -> Result<Vec<String>, Failure> {
    match path {
        Some(p) => Ok(read_list(p)?),
        None => Ok(default),
    }
}

pub fn identify(ctx: &Ctx, args: &IdentifyArgs) -> CmdResult {
    let classes = match &args.classes {
        Some(p) => read_list(p)?,
        None => list_or(&ctx.cfg.scene_classes, nvskit_crawler::default_scene_classes())?,
    };
    let glam: BTreeSet<String> =
        list_or(&ctx.cfg.glam_classes, nvskit_crawler::default_glam_classes().into_iter().collect())?
            .into_iter()
            .collect();
    if ctx.dry_run {
        return Ok(ctx.plan(std::slice::from_ref(&args.out), json!({"classes": classes})));
    }
    with_transport(ctx, |t| {
        let client = Client::new(t);
        let glam = if ctx.cfg.expand_glam {
            expand_glam_classes(&client, &glam)?
        } else {
            glam
        };
        let candidates = identify_scenes(&classes, &client)?;
        ctx.log(format!("{} candidate scenes", candidates.len()));
        let linked = cyclic_link_filter(&candidates, &client)?;
        let outcome = glam_filter(&linked, &glam);
        for s in &outcome.kept {
            ctx.log(format!("scene {} ({})", s.commons_category, s.entity_id));
        }
        write_text(&args.out, &to_jsonl(&outcome.kept))?;
        Ok(json!({
            "candidates": candidates.len(),
            "cyclic_dropped": candidates.len() - linked.len(),
            "glam_dropped": outcome.dropped,
            "vacuous_classes": outcome.vacuous,
            "scenes": outcome.kept.len(),
        }))
    })
}

pub fn manifest(ctx: &Ctx, args: &ManifestArgs) -> CmdResult {
    let scenes: Vec<SceneCategory> =
        from_jsonl(&read_text(&args.scenes)?).map_err(|e| Failure::Data(format!("{}: {e}", args.scenes.display())))?;
    let keywords = list_or(&ctx.cfg.excluded_keywords, nvskit_crawler::default_excluded_keywords())?;
    if ctx.dry_run {
        let mut outs = vec![args.out.clone()];
        outs.extend(args.unlicensed.clone());
        return Ok(ctx.plan(&outs, json!({"scenes": scenes.len()})));
    }
    let workers = match ctx.cfg.jobs {
        0 => rayon::current_num_threads(),
        j => j,
    };
    with_transport(ctx, |t| {
        let client = Client::new(t);
        let (mut entries, mut unlicensed) = (Vec::new(), Vec::new());
        for s in &scenes {
            let rules = RecursionRules::for_scene(s, keywords.clone(), ctx.cfg.max_depth);
            let tree = recurse_subcategories(s, &client, &rules)?;
            let m = build_manifest(&s.commons_category, &tree, &client, workers)?;
            ctx.log(format!(
                "{}: {} categories, {} files, {} unlicensed",
                s.commons_category,
                tree.nodes.len(),
                m.entries.len(),
                m.unlicensed.len()
            ));
            entries.extend(m.entries);
            unlicensed.extend(m.unlicensed);
        }
        write_text(&args.out, &to_jsonl(&entries))?;
        if let Some(p) = &args.unlicensed {
            write_text(p, &to_jsonl(&unlicensed))?;
        }
        Ok(json!({"scenes": scenes.len(), "files": entries.len(), "unlicensed": unlicensed.len()}))
    })
}
