//! Scene identification and the candidate filters.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::client::Client;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneCategory {
    pub commons_category: String,
    pub entity_id: String,
    pub label: Option<String>,
    pub aliases: Vec<String>,
    /// Direct instance-of classes of the entity.
    pub class_ids: Vec<String>,
}

/// A class together with all of its transitive subclasses.
pub fn class_closure(client: &Client, class: &str) -> Result<BTreeSet<String>> {
    let mut seen = BTreeSet::from([class.to_string()]);
    let mut queue = VecDeque::from([class.to_string()]);
    while let Some(c) = queue.pop_front() {
        for sub in client.subclasses(&c)? {
            if seen.insert(sub.clone()) {
                queue.push_back(sub);
            }
        }
    }
    Ok(seen)
}

/// Entities that are instances of any listed class (through the subclass
/// hierarchy) and link to a media-catalog category. Sorted by category,
/// then entity id.
pub fn identify_scenes(class_ids: &[String], client: &Client) -> Result<Vec<SceneCategory>> {
    let mut classes = BTreeSet::new();
    for c in class_ids {
        classes.extend(class_closure(client, c)?);
    }
    let mut entities = BTreeSet::new();
    for c in &classes {
        entities.extend(client.instances(c)?);
    }
    let mut scenes = BTreeMap::new();
    for id in entities {
        let Some(e) = client.entity(&id)? else { continue };
        let Some(category) = e.commons_category.clone().filter(|c| !c.trim().is_empty()) else {
            continue;
        };
        scenes.insert(
            (category.clone(), id),
            SceneCategory {
                commons_category: category,
                entity_id: e.id,
                label: e.label,
                aliases: e.aliases,
                class_ids: e.instance_of,
            },
        );
    }
    Ok(scenes.into_values().collect())
}

/// True iff the category links back to the entity and the entity links to
/// the category.
pub fn is_cyclic(scene: &SceneCategory, client: &Client) -> Result<bool> {
    if client.category_item(&scene.commons_category)?.as_deref() != Some(scene.entity_id.as_str()) {
        return Ok(false);
    }
    let forward = client.entity(&scene.entity_id)?.and_then(|e| e.commons_category);
    Ok(forward.as_deref() == Some(scene.commons_category.as_str()))
}

pub fn cyclic_link_filter(candidates: &[SceneCategory], client: &Client) -> Result<Vec<SceneCategory>> {
    let mut kept = Vec::new();
    for c in candidates {
        if is_cyclic(c, client)? {
            kept.push(c.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GlamOutcome {
    pub kept: Vec<SceneCategory>,
    /// Entity ids dropped as exclusively GLAM.
    pub dropped: Vec<String>,
    /// Kept entity ids with no instance-of classes at all.
    pub vacuous: Vec<String>,
}

/// True when every instance-of class is a GLAM class. An empty class list
/// is not exclusively GLAM.
pub fn is_exclusively_glam(scene: &SceneCategory, glam: &BTreeSet<String>) -> bool {
    !scene.class_ids.is_empty() && scene.class_ids.iter().all(|c| glam.contains(c))
}

pub fn glam_filter(candidates: &[SceneCategory], glam: &BTreeSet<String>) -> GlamOutcome {
    let mut out = GlamOutcome::default();
    for c in candidates {
        if is_exclusively_glam(c, glam) {
            out.dropped.push(c.entity_id.clone());
        } else {
            if c.class_ids.is_empty() {
                out.vacuous.push(c.entity_id.clone());
            }
            out.kept.push(c.clone());
        }
    }
    out
}

/// Closes a GLAM class list over the subclass hierarchy.
pub fn expand_glam_classes(client: &Client, glam: &BTreeSet<String>) -> Result<BTreeSet<String>> {
    let mut all = BTreeSet::new();
    for c in glam {
        all.extend(class_closure(client, c)?);
    }
    Ok(all)
}
