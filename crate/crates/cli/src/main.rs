//! `nvskit`: command-line entry point for the pipeline stages.

mod config;
mod crawl;
mod pipeline;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::run::{Ctx, Failure};

#[derive(Parser)]
#[command(name = "nvskit", version, about = "Novel-view-synthesis data pipeline over sparse reconstructions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for RANSAC sampling and holdout selection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch stages; 0 picks the core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the resolved config and planned work without writing files.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Find scene categories from the knowledge graph.
    Identify(crawl::IdentifyArgs),
    /// Build image manifests for identified scenes.
    Manifest(crawl::ManifestArgs),
    /// Parse (and optionally convert) a sparse model.
    Parse(pipeline::ParseArgs),
    /// Align monocular depth maps to sparse model depth.
    Align(pipeline::AlignArgs),
    /// Mine image pairs from a sparse model.
    Mine(pipeline::MineArgs),
    /// Render reference images from target poses.
    Warp(pipeline::WarpArgs),
    /// Masked PSNR/SSIM between generated and target images.
    Eval(pipeline::EvalArgs),
    /// Hold out scenes into validation and test splits.
    Split(pipeline::SplitArgs),
    /// Drop keypoints near the image border.
    MaskKeypoints(pipeline::MaskArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Identify(_) => "identify",
            Command::Manifest(_) => "manifest",
            Command::Parse(_) => "parse",
            Command::Align(_) => "align",
            Command::Mine(_) => "mine",
            Command::Warp(_) => "warp",
            Command::Eval(_) => "eval",
            Command::Split(_) => "split",
            Command::MaskKeypoints(_) => "mask-keypoints",
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig, Failure> {
    let mut overrides = Vec::new();
    for o in &g.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(s) = g.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(j) = g.jobs {
        overrides.push(("jobs".into(), j.to_string()));
    }
    PipelineConfig::load(g.config.as_deref(), &overrides).map_err(Failure::Config)
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value, Failure> {
    let cfg = load_config(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg,
        dry_run: cli.global.dry_run,
    };
    match &cli.command {
        Command::Identify(a) => crawl::identify(&ctx, a),
        Command::Manifest(a) => crawl::manifest(&ctx, a),
        Command::Parse(a) => pipeline::parse(&ctx, a),
        Command::Align(a) => pipeline::align(&ctx, a),
        Command::Mine(a) => pipeline::mine(&ctx, a),
        Command::Warp(a) => pipeline::warp(&ctx, a),
        Command::Eval(a) => pipeline::eval(&ctx, a),
        Command::Split(a) => pipeline::split(&ctx, a),
        Command::MaskKeypoints(a) => pipeline::mask_keypoints(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match dispatch(&cli) {
        Ok(mut summary) => {
            summary["command"] = name.into();
            summary["status"] = "ok".into();
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            let report = serde_json::json!({
                "command": name,
                "status": "error",
                "kind": f.kind(),
                "message": f.message(),
            });
            println!("{report}");
            ExitCode::from(f.exit_code())
        }
    }
}
