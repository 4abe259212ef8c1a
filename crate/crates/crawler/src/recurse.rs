//! Subcategory traversal under keyword and name rules.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::client::Client;
use crate::error::Result;
use crate::request::MemberKind;
use crate::scenes::SceneCategory;

pub const DEFAULT_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionRules {
    pub max_depth: usize,
    pub excluded_keywords: Vec<String>,
    pub name_substrings: Vec<String>,
}

impl RecursionRules {
    /// Name substrings from the category, the entity label and its aliases.
    pub fn for_scene(scene: &SceneCategory, excluded_keywords: Vec<String>, max_depth: usize) -> Self {
        let mut names: Vec<String> = Vec::new();
        let candidates = std::iter::once(scene.commons_category.clone())
            .chain(scene.label.clone())
            .chain(scene.aliases.iter().cloned());
        for n in candidates {
            let n = n.trim().to_string();
            if !n.is_empty() && !names.contains(&n) {
                names.push(n);
            }
        }
        RecursionRules {
            max_depth,
            excluded_keywords,
            name_substrings: names,
        }
    }

    /// Case-insensitive: no excluded keyword and at least one name occur in
    /// the title.
    pub fn allows(&self, title: &str) -> bool {
        let t = title.to_lowercase();
        let excluded = self.excluded_keywords.iter().any(|k| t.contains(&k.to_lowercase()));
        let named = self.name_substrings.iter().any(|n| t.contains(&n.to_lowercase()));
        !excluded && named
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryNode {
    pub title: String,
    pub depth: usize,
    pub parent: Option<usize>,
}

/// Visited categories in depth-first order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryTree {
    pub nodes: Vec<CategoryNode>,
}

impl CategoryTree {
    /// Titles from the root down to node `i`.
    pub fn path(&self, i: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = Some(i);
        while let Some(j) = cur {
            out.push(self.nodes[j].title.clone());
            cur = self.nodes[j].parent;
        }
        out.reverse();
        out
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

/// Depth-first from the scene's category (depth 0); a subcategory is
/// entered at depth `d <= max_depth` when the rules allow its title and it
/// has not been visited.
pub fn recurse_subcategories(root: &SceneCategory, client: &Client, rules: &RecursionRules) -> Result<CategoryTree> {
    let mut tree = CategoryTree {
        nodes: vec![CategoryNode {
            title: root.commons_category.clone(),
            depth: 0,
            parent: None,
        }],
    };
    let mut visited = BTreeSet::from([root.commons_category.clone()]);
    descend(0, client, rules, &mut tree, &mut visited)?;
    Ok(tree)
}

fn descend(
    node: usize,
    client: &Client,
    rules: &RecursionRules,
    tree: &mut CategoryTree,
    visited: &mut BTreeSet<String>,
) -> Result<()> {
    let depth = tree.nodes[node].depth;
    if depth >= rules.max_depth {
        return Ok(());
    }
    let title = tree.nodes[node].title.clone();
    for child in client.members(&title, MemberKind::Subcat)? {
        if !rules.allows(&child) || !visited.insert(child.clone()) {
            continue;
        }
        tree.nodes.push(CategoryNode {
            title: child,
            depth: depth + 1,
            parent: Some(node),
        });
        descend(tree.nodes.len() - 1, client, rules, tree, visited)?;
    }
    Ok(())
}
