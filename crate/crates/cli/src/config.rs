//! Flat `key=value` pipeline configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nvskit::colmap::ModelFormat;

pub const CACHE_DIR_ENV: &str = "NVSKIT_CACHE_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub model_format: ModelFormat,
    pub lenient: bool,

    pub min_shared: u32,
    pub max_dt: i64,
    pub aspect_tol: f64,
    pub quantile: f64,
    pub score_threshold: f64,
    pub target_size: u32,
    pub holdout_scenes: usize,
    pub val_pairs: usize,

    pub ransac_iterations: usize,
    pub inlier_threshold: f64,
    /// `None` selects `max(10, 20%)` of the correspondences.
    pub min_inliers: Option<usize>,
    pub scale_only: bool,
    pub invert_input: bool,

    pub discontinuity_threshold: f64,
    pub sentinel: [u8; 3],

    pub border_fraction: f64,

    pub seed: u64,
    /// 0 lets the thread pool pick.
    pub jobs: usize,

    pub max_depth: usize,
    pub user_agent: Option<String>,
    pub cache_dir: Option<PathBuf>,
    /// Serve every request from `cache_dir`; never touch the network.
    pub offline: bool,
    pub scene_classes: Option<PathBuf>,
    pub glam_classes: Option<PathBuf>,
    pub excluded_keywords: Option<PathBuf>,
    pub expand_glam: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model_format: ModelFormat::Auto,
            lenient: false,
            min_shared: 50,
            max_dt: 10800,
            aspect_tol: 0.01,
            quantile: 0.2,
            score_threshold: 0.8,
            target_size: 256,
            holdout_scenes: 800,
            val_pairs: 10000,
            ransac_iterations: 1000,
            inlier_threshold: 0.05,
            min_inliers: None,
            scale_only: false,
            invert_input: false,
            discontinuity_threshold: 0.1,
            sentinel: [0, 0, 0],
            border_fraction: 0.05,
            seed: 0,
            jobs: 0,
            max_depth: 4,
            user_agent: None,
            cache_dir: None,
            offline: false,
            scene_classes: None,
            glam_classes: None,
            excluded_keywords: None,
            expand_glam: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for {key}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("invalid value '{value}' for {key}; expected true or false")),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_opt<T: std::fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), |v| v.to_string())
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "model_format" => self.model_format = v.parse().map_err(|e: nvskit::Error| e.to_string())?,
            "lenient" => self.lenient = parse_bool(key, v)?,
            "min_shared" => self.min_shared = parse(key, v)?,
            "max_dt" => self.max_dt = parse(key, v)?,
            "aspect_tol" => self.aspect_tol = parse(key, v)?,
            "quantile" => self.quantile = parse(key, v)?,
            "score_threshold" => self.score_threshold = parse(key, v)?,
            "target_size" => self.target_size = parse(key, v)?,
            "holdout_scenes" => self.holdout_scenes = parse(key, v)?,
            "val_pairs" => self.val_pairs = parse(key, v)?,
            "ransac_iterations" => self.ransac_iterations = parse(key, v)?,
            "inlier_threshold" => self.inlier_threshold = parse(key, v)?,
            "min_inliers" => {
                self.min_inliers = match v {
                    "auto" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "scale_only" => self.scale_only = parse_bool(key, v)?,
            "invert_input" => self.invert_input = parse_bool(key, v)?,
            "discontinuity_threshold" => {
                self.discontinuity_threshold = match v {
                    "inf" | "none" => f64::INFINITY,
                    _ => parse(key, v)?,
                }
            }
            "sentinel" => {
                let parts: Vec<u8> = v.split(',').map(|c| parse(key, c.trim())).collect::<Result<_, _>>()?;
                self.sentinel = parts
                    .try_into()
                    .map_err(|_| format!("sentinel needs three components, got '{v}'"))?;
            }
            "border_fraction" => self.border_fraction = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "jobs" => self.jobs = parse(key, v)?,
            "max_depth" => self.max_depth = parse(key, v)?,
            "user_agent" => self.user_agent = (!v.is_empty()).then(|| v.to_string()),
            "cache_dir" => self.cache_dir = opt_path(v),
            "offline" => self.offline = parse_bool(key, v)?,
            "scene_classes" => self.scene_classes = opt_path(v),
            "glam_classes" => self.glam_classes = opt_path(v),
            "excluded_keywords" => self.excluded_keywords = opt_path(v),
            "expand_glam" => self.expand_glam = parse_bool(key, v)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model_format", format!("{:?}", self.model_format).to_ascii_lowercase()),
            ("lenient", self.lenient.to_string()),
            ("min_shared", self.min_shared.to_string()),
            ("max_dt", self.max_dt.to_string()),
            ("aspect_tol", self.aspect_tol.to_string()),
            ("quantile", self.quantile.to_string()),
            ("score_threshold", self.score_threshold.to_string()),
            ("target_size", self.target_size.to_string()),
            ("holdout_scenes", self.holdout_scenes.to_string()),
            ("val_pairs", self.val_pairs.to_string()),
            ("ransac_iterations", self.ransac_iterations.to_string()),
            ("inlier_threshold", self.inlier_threshold.to_string()),
            ("min_inliers", show_opt(&self.min_inliers, "auto")),
            ("scale_only", self.scale_only.to_string()),
            ("invert_input", self.invert_input.to_string()),
            ("discontinuity_threshold", self.discontinuity_threshold.to_string()),
            ("sentinel", self.sentinel.map(|c| c.to_string()).join(",")),
            ("border_fraction", self.border_fraction.to_string()),
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
            ("max_depth", self.max_depth.to_string()),
            ("user_agent", self.user_agent.clone().unwrap_or_default()),
            ("cache_dir", show_path(&self.cache_dir)),
            ("offline", self.offline.to_string()),
            ("scene_classes", show_path(&self.scene_classes)),
            ("glam_classes", show_path(&self.glam_classes)),
            ("excluded_keywords", show_path(&self.excluded_keywords)),
            ("expand_glam", self.expand_glam.to_string()),
        ]
    }

    /// The resolved configuration in the same format it is read from.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected key=value", i + 1))?;
            self.set(k, v).map_err(|e| format!("{origin}:{}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        check(self.max_dt >= 0, "max_dt must be non-negative")?;
        check(self.aspect_tol >= 0.0, "aspect_tol must be non-negative")?;
        check(self.quantile > 0.0 && self.quantile < 1.0, "quantile must lie in (0, 1)")?;
        check(self.score_threshold.is_finite(), "score_threshold must be finite")?;
        check(self.target_size > 0, "target_size must be positive")?;
        check(self.ransac_iterations > 0, "ransac_iterations must be positive")?;
        check(self.inlier_threshold > 0.0, "inlier_threshold must be positive")?;
        check(self.discontinuity_threshold >= 0.0, "discontinuity_threshold must be non-negative")?;
        check(
            (0.0..0.5).contains(&self.border_fraction),
            "border_fraction must lie in [0, 0.5)",
        )?;
        check(self.max_depth > 0, "max_depth must be positive")?;
        Ok(())
    }

    /// Defaults, then the file, then the cache-dir environment variable,
    /// then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, String> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
            cfg.cache_dir = opt_path(&dir);
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
