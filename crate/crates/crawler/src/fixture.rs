//! Writes offline records in the same shape as live responses, so a
//! fixture directory can stand in for the services.

use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::error::{io, Result};
use crate::request::{MemberKind, Request};

pub struct FixtureWriter {
    dir: PathBuf,
}

impl FixtureWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(FixtureWriter { dir })
    }

    fn put(&self, req: Request, body: Value) -> Result<()> {
        let path = self.dir.join(format!("{}.json", req.cache_key()));
        let mut text = serde_json::to_string_pretty(&body).expect("json values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io(path, e))
    }

    pub fn entity(
        &self,
        id: &str,
        label: &str,
        aliases: &[&str],
        instance_of: &[&str],
        commons_category: Option<&str>,
    ) -> Result<()> {
        let item = |q: &str| {
            json!({"mainsnak": {"snaktype": "value", "property": "P31",
                "datavalue": {"type": "wikibase-entityid", "value": {"entity-type": "item", "id": q}}}})
        };
        let mut claims = serde_json::Map::new();
        if !instance_of.is_empty() {
            claims.insert("P31".into(), instance_of.iter().map(|q| item(q)).collect());
        }
        if let Some(c) = commons_category {
            claims.insert(
                "P373".into(),
                json!([{"mainsnak": {"snaktype": "value", "property": "P373",
                    "datavalue": {"type": "string", "value": c}}}]),
            );
        }
        let aliases: Vec<Value> = aliases.iter().map(|a| json!({"language": "en", "value": a})).collect();
        let record = json!({
            "type": "item",
            "id": id,
            "labels": {"en": {"language": "en", "value": label}},
            "aliases": if aliases.is_empty() { json!({}) } else { json!({"en": aliases}) },
            "claims": claims,
        });
        self.put(Request::Entity { id: id.into() }, json!({"entities": {id: record}, "success": 1}))
    }

    pub fn missing_entity(&self, id: &str) -> Result<()> {
        self.put(
            Request::Entity { id: id.into() },
            json!({"entities": {id: {"id": id, "missing": ""}}, "success": 1}),
        )
    }

    fn bindings(items: &[&str]) -> Value {
        let rows: Vec<Value> = items
            .iter()
            .map(|q| json!({"item": {"type": "uri", "value": format!("http://www.wikidata.org/entity/{q}")}}))
            .collect();
        json!({"head": {"vars": ["item"]}, "results": {"bindings": rows}})
    }

    pub fn subclasses(&self, class: &str, items: &[&str]) -> Result<()> {
        self.put(Request::SubclassesOf { class: class.into() }, Self::bindings(items))
    }

    pub fn instances(&self, class: &str, items: &[&str]) -> Result<()> {
        self.put(Request::InstancesOf { class: class.into() }, Self::bindings(items))
    }

    pub fn category_info(&self, category: &str, item: Option<&str>) -> Result<()> {
        let mut page = json!({"ns": 14, "title": format!("Category:{category}"), "pageid": 1});
        if let Some(q) = item {
            page["pageprops"] = json!({"wikibase_item": q});
        }
        self.put(
            Request::CategoryInfo {
                category: category.into(),
            },
            json!({"batchcomplete": true, "query": {"pages": [page]}}),
        )
    }

    /// Members split into pages of `page_size`, chained by continuation
    /// tokens.
    pub fn members(&self, category: &str, kind: MemberKind, titles: &[&str], page_size: usize) -> Result<()> {
        let ns = match kind {
            MemberKind::Subcat => 14,
            MemberKind::File => 6,
        };
        let chunks: Vec<&[&str]> = if titles.is_empty() {
            vec![&[]]
        } else {
            titles.chunks(page_size.max(1)).collect()
        };
        for (i, chunk) in chunks.iter().enumerate() {
            let list: Vec<Value> = chunk
                .iter()
                .map(|t| {
                    let title = match kind {
                        MemberKind::Subcat => format!("Category:{t}"),
                        MemberKind::File => t.to_string(),
                    };
                    json!({"ns": ns, "title": title})
                })
                .collect();
            let mut body = json!({"batchcomplete": true, "query": {"categorymembers": list}});
            if i + 1 < chunks.len() {
                body["continue"] = json!({"cmcontinue": format!("page|{}", i + 1), "continue": "-||"});
            }
            let cont = (i > 0).then(|| format!("page|{i}"));
            self.put(
                Request::CategoryMembers {
                    category: category.into(),
                    kind: kind.clone(),
                    cont,
                },
                body,
            )?;
        }
        Ok(())
    }

    pub fn file_info(&self, title: &str, url: &str, license: Option<&str>, capture: Option<&str>) -> Result<()> {
        let mut meta = serde_json::Map::new();
        if let Some(l) = license {
            meta.insert("LicenseShortName".into(), json!({"value": l, "source": "commons-desc-page"}));
        }
        if let Some(c) = capture {
            meta.insert("DateTimeOriginal".into(), json!({"value": c, "source": "commons-desc-page"}));
        }
        let page = json!({
            "ns": 6,
            "title": title,
            "imageinfo": [{"url": url, "timestamp": "2020-01-01T00:00:00Z", "extmetadata": meta}],
        });
        self.put(
            Request::FileInfo { title: title.into() },
            json!({"batchcomplete": true, "query": {"pages": [page]}}),
        )
    }
}
