//! Shared command plumbing: failures, logging and output paths.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::PipelineConfig;

#[derive(Debug)]
pub enum Failure {
    /// Exit status 2.
    Config(String),
    /// Exit status 1.
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Data(_) => "data",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) => m,
        }
    }
}

impl From<nvskit::Error> for Failure {
    fn from(e: nvskit::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<nvskit_crawler::CrawlError> for Failure {
    fn from(e: nvskit_crawler::CrawlError) -> Self {
        match e {
            nvskit_crawler::CrawlError::Config(m) => Failure::Config(m),
            e => Failure::Data(e.to_string()),
        }
    }
}

pub type CmdResult = Result<Value, Failure>;

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub dry_run: bool,
}

impl Ctx {
    pub fn log(&self, msg: impl AsRef<str>) {
        eprintln!("{}", msg.as_ref());
    }

    /// The dry-run summary: resolved config plus the files that would be
    /// written.
    pub fn plan(&self, outputs: &[PathBuf], extra: Value) -> Value {
        eprint!("{}", self.cfg.to_text());
        let config: serde_json::Map<String, Value> =
            self.cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v.into())).collect();
        let mut v = json!({
            "dry_run": true,
            "config": config,
            "planned_outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        if let Value::Object(m) = extra {
            for (k, x) in m {
                v[k] = x;
            }
        }
        v
    }
}

pub fn data_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| data_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| data_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| data_err(path, e))
}

/// `name` with its extension replaced, kept relative to `dir`.
pub fn sibling(dir: &Path, name: &str, ext: &str) -> PathBuf {
    dir.join(Path::new(name).with_extension(ext))
}
