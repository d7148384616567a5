use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    News,
    Reply,
}

/// One news post or one reply to a news post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub kind: PostKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub retweets: u64,
    #[serde(default)]
    pub reply_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    /// Set on replies whose parent is not a news record of the same corpus.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub orphan: bool,
}

impl PostRecord {
    pub fn news(id: impl Into<String>, text: impl Into<String>) -> Self {
        PostRecord {
            id: id.into(),
            kind: PostKind::News,
            text: text.into(),
            created_at: None,
            likes: 0,
            retweets: 0,
            reply_count: 0,
            parent_id: None,
            orphan: false,
        }
    }

    pub fn reply(id: impl Into<String>, parent: impl Into<String>, text: impl Into<String>) -> Self {
        PostRecord {
            kind: PostKind::Reply,
            parent_id: Some(parent.into()),
            ..PostRecord::news(id, text)
        }
    }
}

/// Maps the export's field names onto [`PostRecord`] fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub id: String,
    pub kind: String,
    pub text: String,
    pub created_at: String,
    pub likes: String,
    pub retweets: String,
    pub reply_count: String,
    pub parent_id: String,
    /// Value of the kind field denoting a news post (case-insensitive).
    pub news_value: String,
    /// Value of the kind field denoting a reply (case-insensitive).
    pub reply_value: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            kind: "kind".into(),
            text: "text".into(),
            created_at: "created_at".into(),
            likes: "likes".into(),
            retweets: "retweets".into(),
            reply_count: "reply_count".into(),
            parent_id: "parent_id".into(),
            news_value: "news".into(),
            reply_value: "reply".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<PostRecord>,
    pub errors: Vec<LineError>,
    pub orphans: Vec<String>,
}

/// Reads JSON Lines, one record per line, in file order.
///
/// Malformed lines are collected in the report and skipped; the load fails
/// only if the file is unreadable or more than half of the non-blank lines
/// are malformed.
pub fn load_corpus(path: &Path, schema: &FieldMap) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut report = LoadReport::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut total = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(&line, schema) {
            Ok(rec) => {
                if let Some(prev) = seen.get(&rec.id) {
                    report.errors.push(LineError {
                        line: line_no,
                        message: format!("duplicate id {:?} (first seen on line {prev})", rec.id),
                    });
                    continue;
                }
                seen.insert(rec.id.clone(), line_no);
                report.records.push(rec);
            }
            Err(message) => report.errors.push(LineError { line: line_no, message }),
        }
    }

    for err in &report.errors {
        log::warn!("{}:{}: {}", path.display(), err.line, err.message);
    }
    if total > 0 && report.errors.len() * 2 > total {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: report.errors.len(),
            total,
            first: format!("line {}: {}", report.errors[0].line, report.errors[0].message),
        });
    }

    report.orphans = flag_orphans(&mut report.records);
    for id in &report.orphans {
        log::warn!("reply {id} has no news parent in the corpus; kept as orphan");
    }
    Ok(report)
}

/// Marks every reply whose parent is missing or is not a news record, and
/// returns their ids in input order.
pub fn flag_orphans(records: &mut [PostRecord]) -> Vec<String> {
    let news: std::collections::HashSet<String> = records
        .iter()
        .filter(|r| r.kind == PostKind::News)
        .map(|r| r.id.clone())
        .collect();
    let mut orphans = Vec::new();
    for r in records.iter_mut() {
        if r.kind == PostKind::Reply {
            let linked = r.parent_id.as_ref().is_some_and(|p| news.contains(p));
            r.orphan = !linked;
            if r.orphan {
                orphans.push(r.id.clone());
            }
        }
    }
    orphans
}

fn parse_line(line: &str, schema: &FieldMap) -> std::result::Result<PostRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "line is not a JSON object".to_string())?;

    let id = match obj.get(&schema.id) {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(format!("field {:?} must be a non-empty string", schema.id)),
        None => return Err(format!("missing mandatory field {:?}", schema.id)),
    };
    let text = match obj.get(&schema.text) {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(format!("field {:?} must be a string", schema.text)),
        None => return Err(format!("missing mandatory field {:?}", schema.text)),
    };
    let kind = match obj.get(&schema.kind) {
        Some(Value::String(s)) if s.eq_ignore_ascii_case(&schema.news_value) => PostKind::News,
        Some(Value::String(s)) if s.eq_ignore_ascii_case(&schema.reply_value) => PostKind::Reply,
        Some(other) => return Err(format!("unrecognised kind {other}")),
        None => return Err(format!("missing mandatory field {:?}", schema.kind)),
    };
    let parent_id = match obj.get(&schema.parent_id) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(_) => return Err(format!("field {:?} must be a string", schema.parent_id)),
    };
    match (kind, &parent_id) {
        (PostKind::Reply, None) => return Err("reply without parent id".into()),
        (PostKind::News, Some(_)) => return Err("news record carries a parent id".into()),
        _ => {}
    }
    let created_at = match obj.get(&schema.created_at) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            DateTime::parse_from_rfc3339(s)
                .map_err(|e| format!("bad timestamp {s:?}: {e}"))?
                .with_timezone(&Utc),
        ),
        Some(Value::Number(n)) => {
            let secs = n.as_i64().ok_or_else(|| format!("bad timestamp {n}"))?;
            Some(DateTime::from_timestamp(secs, 0).ok_or_else(|| format!("bad timestamp {n}"))?)
        }
        Some(other) => return Err(format!("bad timestamp {other}")),
    };

    Ok(PostRecord {
        id,
        kind,
        text,
        created_at,
        likes: count(obj.get(&schema.likes), &schema.likes)?,
        retweets: count(obj.get(&schema.retweets), &schema.retweets)?,
        reply_count: count(obj.get(&schema.reply_count), &schema.reply_count)?,
        parent_id,
        orphan: false,
    })
}

fn count(v: Option<&Value>, name: &str) -> std::result::Result<u64, String> {
    match v {
        None | Some(Value::Null) => Ok(0),
        Some(Value::Number(n)) => n
            .as_u64()
            .ok_or_else(|| format!("field {name:?} must be a non-negative integer, got {n}")),
        Some(other) => Err(format!("field {name:?} must be a count, got {other}")),
    }
}

/// Writes records in the canonical schema accepted by [`load_corpus`] with
/// the default [`FieldMap`].
pub fn write_records(path: &Path, records: &[PostRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let mut clean = r.clone();
        clean.orphan = false;
        serde_json::to_writer(&mut w, &clean)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
