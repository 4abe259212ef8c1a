//! Image manifests built from a traversed category tree.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::client::{Client, FileRecord};
use crate::error::Result;
use crate::recurse::CategoryTree;
use crate::request::MemberKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageManifestEntry {
    pub scene: String,
    pub file_title: String,
    pub url: Option<String>,
    pub license: Option<String>,
    pub capture_time: Option<String>,
    pub upload_time: Option<String>,
    /// Categories from the scene root to the one listing the file.
    pub category_path: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Manifest {
    /// Licensed files, in first-seen traversal order.
    pub entries: Vec<ImageManifestEntry>,
    /// Files lacking license metadata; left out of the default manifest.
    pub unlicensed: Vec<ImageManifestEntry>,
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
fn ordered_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// One entry per distinct file title in the tree; no bytes are downloaded.
pub fn build_manifest(scene: &str, tree: &CategoryTree, client: &Client, workers: usize) -> Result<Manifest> {
    let mut seen = BTreeSet::new();
    let mut files: Vec<(String, usize)> = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        for title in client.members(&node.title, MemberKind::File)? {
            if seen.insert(title.clone()) {
                files.push((title, i));
            }
        }
    }
    let infos: Vec<Result<Option<FileRecord>>> = ordered_map(&files, workers, |(t, _)| client.file_info(t));
    let mut manifest = Manifest::default();
    for ((title, node), info) in files.into_iter().zip(infos) {
        let info = info?;
        let entry = ImageManifestEntry {
            scene: scene.to_string(),
            file_title: title,
            url: info.as_ref().and_then(|i| i.url.clone()),
            license: info.as_ref().and_then(|i| i.license.clone()),
            capture_time: info.as_ref().and_then(|i| i.capture_time.clone()),
            upload_time: info.as_ref().and_then(|i| i.upload_time.clone()),
            category_path: tree.path(node),
        };
        if entry.license.is_some() {
            manifest.entries.push(entry);
        } else {
            manifest.unlicensed.push(entry);
        }
    }
    Ok(manifest)
}
