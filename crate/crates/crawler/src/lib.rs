//! Scene discovery over the Wikidata class hierarchy and Wikimedia Commons
//! categories, producing scene lists and image manifests.
//!
//! All logic above [`transport`] is shared between live runs and offline
//! runs against a fixture directory.

pub mod client;
pub mod error;
pub mod fixture;
pub mod manifest;
pub mod recurse;
pub mod request;
pub mod scenes;
pub mod transport;

use std::collections::BTreeSet;
use std::path::Path;

pub use client::{Client, EntityRecord, FileRecord};
pub use error::{CrawlError, Result};
pub use manifest::{build_manifest, ImageManifestEntry, Manifest};
pub use recurse::{recurse_subcategories, CategoryTree, RecursionRules, DEFAULT_MAX_DEPTH};
pub use request::{Endpoints, MemberKind, Request};
pub use transport::{CachingTransport, DenyAll, FixtureTransport, LiveConfig, LiveTransport, Transport};
pub use scenes::{cyclic_link_filter, glam_filter, identify_scenes, GlamOutcome, SceneCategory};

pub const DEFAULT_GLAM_CLASSES: &str = include_str!("../data/glam_classes.txt");
pub const DEFAULT_EXCLUDED_KEYWORDS: &str = include_str!("../data/excluded_keywords.txt");
pub const DEFAULT_SCENE_CLASSES: &str = include_str!("../data/scene_classes.txt");

/// One entry per line; `#` starts a comment; surrounding space is dropped.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn read_list(path: &Path) -> Result<Vec<String>> {
    std::fs::read_to_string(path)
        .map(|t| parse_list(&t))
        .map_err(|e| error::io(path, e))
}

pub fn default_glam_classes() -> BTreeSet<String> {
    parse_list(DEFAULT_GLAM_CLASSES).into_iter().collect()
}

pub fn default_excluded_keywords() -> Vec<String> {
    parse_list(DEFAULT_EXCLUDED_KEYWORDS)
}

pub fn default_scene_classes() -> Vec<String> {
    parse_list(DEFAULT_SCENE_CLASSES)
}

/// Serializes each item as one JSON line.
pub fn to_jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> std::result::Result<Vec<T>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
