//! Typed access to the knowledge-graph and media-catalog responses.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CrawlError, Result};
use crate::request::{MemberKind, Request};
use crate::transport::Transport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub label: Option<String>,
    pub aliases: Vec<String>,
    /// Direct instance-of classes.
    pub instance_of: Vec<String>,
    /// Linked media-catalog category name, without the namespace prefix.
    pub commons_category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub title: String,
    pub url: Option<String>,
    pub license: Option<String>,
    pub capture_time: Option<String>,
    pub upload_time: Option<String>,
}

pub struct Client<'a> {
    transport: &'a dyn Transport,
}

fn malformed(req: &Request, msg: impl Into<String>) -> CrawlError {
    CrawlError::Malformed {
        key: req.cache_key(),
        msg: msg.into(),
    }
}

fn str_at<'v>(v: &'v Value, path: &[&str]) -> Option<&'v str> {
    path.iter().try_fold(v, |v, k| v.get(k))?.as_str()
}

fn strip_prefix<'s>(s: &'s str, prefix: &str) -> &'s str {
    s.strip_prefix(prefix).unwrap_or(s)
}

impl<'a> Client<'a> {
    pub fn new(transport: &'a dyn Transport) -> Self {
        Client { transport }
    }

    fn json(&self, req: &Request) -> Result<Value> {
        let body = self.transport.fetch(req)?;
        serde_json::from_str(&body).map_err(|e| malformed(req, e.to_string()))
    }

    /// `None` when the item does not exist.
    pub fn entity(&self, id: &str) -> Result<Option<EntityRecord>> {
        let req = Request::Entity { id: id.to_string() };
        let v = self.json(&req)?;
        let e = v
            .get("entities")
            .and_then(|m| m.get(id))
            .ok_or_else(|| malformed(&req, "no entity record"))?;
        if e.get("missing").is_some() {
            return Ok(None);
        }
        let label = str_at(e, &["labels", "en", "value"]).map(str::to_string);
        let aliases = e
            .pointer("/aliases/en")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|x| str_at(x, &["value"]).map(str::to_string)).collect())
            .unwrap_or_default();
        let claims = |prop: &str| -> Vec<&Value> {
            e.pointer(&format!("/claims/{prop}"))
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|c| c.pointer("/mainsnak/datavalue/value")).collect())
                .unwrap_or_default()
        };
        let mut instance_of: Vec<String> = claims("P31")
            .into_iter()
            .filter_map(|v| str_at(v, &["id"]).map(str::to_string))
            .collect();
        instance_of.sort();
        instance_of.dedup();
        let commons_category = claims("P373").into_iter().find_map(|v| v.as_str().map(str::to_string));
        Ok(Some(EntityRecord {
            id: id.to_string(),
            label,
            aliases,
            instance_of,
            commons_category,
        }))
    }

    fn sparql_items(&self, req: Request) -> Result<Vec<String>> {
        let v = self.json(&req)?;
        let bindings = v
            .pointer("/results/bindings")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(&req, "no SPARQL bindings"))?;
        let mut items: Vec<String> = bindings
            .iter()
            .filter_map(|b| str_at(b, &["item", "value"]))
            .filter_map(|uri| uri.rsplit('/').next())
            .map(str::to_string)
            .collect();
        items.sort();
        items.dedup();
        Ok(items)
    }

    pub fn subclasses(&self, class: &str) -> Result<Vec<String>> {
        self.sparql_items(Request::SubclassesOf { class: class.to_string() })
    }

    pub fn instances(&self, class: &str) -> Result<Vec<String>> {
        self.sparql_items(Request::InstancesOf { class: class.to_string() })
    }

    /// Item linked from a category page, if any.
    pub fn category_item(&self, category: &str) -> Result<Option<String>> {
        let req = Request::CategoryInfo {
            category: category.to_string(),
        };
        let v = self.json(&req)?;
        let pages = v
            .pointer("/query/pages")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(&req, "no pages"))?;
        Ok(pages
            .iter()
            .find_map(|p| str_at(p, &["pageprops", "wikibase_item"]))
            .map(str::to_string))
    }

    /// All members of one kind, following continuation tokens. Subcategory
    /// names lose their namespace prefix; file titles keep theirs.
    pub fn members(&self, category: &str, kind: MemberKind) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let mut cont = None;
        loop {
            let req = Request::CategoryMembers {
                category: category.to_string(),
                kind: kind.clone(),
                cont: cont.take(),
            };
            let v = self.json(&req)?;
            let list = v
                .pointer("/query/categorymembers")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed(&req, "no categorymembers"))?;
            for m in list {
                let title = str_at(m, &["title"]).ok_or_else(|| malformed(&req, "member without title"))?;
                out.push(match kind {
                    MemberKind::Subcat => strip_prefix(title, "Category:").to_string(),
                    MemberKind::File => title.to_string(),
                });
            }
            match str_at(&v, &["continue", "cmcontinue"]) {
                Some(c) => cont = Some(c.to_string()),
                None => return Ok(out),
            }
        }
    }

    /// `None` when the file page is missing.
    pub fn file_info(&self, title: &str) -> Result<Option<FileRecord>> {
        let req = Request::FileInfo { title: title.to_string() };
        let v = self.json(&req)?;
        let page = v
            .pointer("/query/pages/0")
            .ok_or_else(|| malformed(&req, "no pages"))?;
        if page.get("missing").is_some_and(|m| m.as_bool() != Some(false)) {
            return Ok(None);
        }
        let info = page.pointer("/imageinfo/0");
        let meta = |k: &str| {
            info.and_then(|i| i.pointer(&format!("/extmetadata/{k}/value")))
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        Ok(Some(FileRecord {
            title: title.to_string(),
            url: info.and_then(|i| str_at(i, &["url"])).map(str::to_string),
            license: meta("LicenseShortName"),
            capture_time: meta("DateTimeOriginal"),
            upload_time: info.and_then(|i| str_at(i, &["timestamp"])).map(str::to_string),
        }))
    }
}
