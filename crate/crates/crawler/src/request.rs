//! The typed requests the crawler issues and their stable cache keys.

use url::Url;

use crate::error::{CrawlError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MemberKind {
    Subcat,
    File,
}

impl MemberKind {
    fn as_str(&self) -> &'static str {
        match self {
            MemberKind::Subcat => "subcat",
            MemberKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Request {
    /// Labels, aliases and claims of one knowledge-graph item.
    Entity { id: String },
    /// Direct subclasses (P279) of a class.
    SubclassesOf { class: String },
    /// Direct instances (P31) of a class.
    InstancesOf { class: String },
    /// The item linked from a media-catalog category page.
    CategoryInfo { category: String },
    /// One page of category members.
    CategoryMembers {
        category: String,
        kind: MemberKind,
        cont: Option<String>,
    },
    /// URL, license and capture metadata of one file page.
    FileInfo { title: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub sparql: String,
    pub wikidata_api: String,
    pub commons_api: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            sparql: "https://query.wikidata.org/sparql".into(),
            wikidata_api: "https://www.wikidata.org/w/api.php".into(),
            commons_api: "https://commons.wikimedia.org/w/api.php".into(),
        }
    }
}

/// Percent-style escaping that yields a portable file name. Spaces become
/// underscores, as in wiki titles.
fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'-' | b'.' => out.push(b as char),
            b' ' => out.push('_'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    if out.len() > 180 {
        let digest = fnv1a(s.as_bytes());
        out.truncate(160);
        while out.ends_with('%') || out.as_bytes()[out.len().saturating_sub(2)] == b'%' {
            out.pop();
        }
        out.push_str(&format!("~{digest:016x}"));
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn sparql_query(property: &str, class: &str) -> String {
    format!("SELECT ?item WHERE {{ ?item wdt:{property} wd:{class} . }}")
}

impl Request {
    /// File-name-safe key shared by the disk cache and fixture directories.
    pub fn cache_key(&self) -> String {
        match self {
            Request::Entity { id } => format!("entity_{}", escape(id)),
            Request::SubclassesOf { class } => format!("subclasses_{}", escape(class)),
            Request::InstancesOf { class } => format!("instances_{}", escape(class)),
            Request::CategoryInfo { category } => format!("catinfo_{}", escape(category)),
            Request::CategoryMembers { category, kind, cont } => {
                let base = format!("members_{}_{}", kind.as_str(), escape(category));
                match cont {
                    Some(c) => format!("{base}_cont_{}", escape(c)),
                    None => base,
                }
            }
            Request::FileInfo { title } => format!("fileinfo_{}", escape(title)),
        }
    }

    pub fn url(&self, endpoints: &Endpoints) -> Result<String> {
        let (base, params): (&str, Vec<(&str, String)>) = match self {
            Request::Entity { id } => (
                &endpoints.wikidata_api,
                vec![
                    ("action", "wbgetentities".into()),
                    ("ids", id.clone()),
                    ("props", "labels|aliases|claims".into()),
                    ("languages", "en".into()),
                    ("format", "json".into()),
                ],
            ),
            Request::SubclassesOf { class } => (
                &endpoints.sparql,
                vec![("query", sparql_query("P279", class)), ("format", "json".into())],
            ),
            Request::InstancesOf { class } => (
                &endpoints.sparql,
                vec![("query", sparql_query("P31", class)), ("format", "json".into())],
            ),
            Request::CategoryInfo { category } => (
                &endpoints.commons_api,
                vec![
                    ("action", "query".into()),
                    ("prop", "pageprops".into()),
                    ("ppprop", "wikibase_item".into()),
                    ("titles", format!("Category:{category}")),
                    ("format", "json".into()),
                    ("formatversion", "2".into()),
                ],
            ),
            Request::CategoryMembers { category, kind, cont } => {
                let mut p = vec![
                    ("action", "query".into()),
                    ("list", "categorymembers".into()),
                    ("cmtitle", format!("Category:{category}")),
                    ("cmtype", kind.as_str().into()),
                    ("cmlimit", "500".into()),
                    ("format", "json".into()),
                    ("formatversion", "2".into()),
                ];
                if let Some(c) = cont {
                    p.push(("cmcontinue", c.clone()));
                }
                (&endpoints.commons_api, p)
            }
            Request::FileInfo { title } => (
                &endpoints.commons_api,
                vec![
                    ("action", "query".into()),
                    ("prop", "imageinfo".into()),
                    ("iiprop", "url|extmetadata|timestamp".into()),
                    ("titles", title.clone()),
                    ("format", "json".into()),
                    ("formatversion", "2".into()),
                ],
            ),
        };
        Url::parse_with_params(base, &params)
            .map(String::from)
            .map_err(|e| CrawlError::Config(format!("endpoint {base}: {e}")))
    }
}
