//! Feed page loading, validation, deduplication and tokenization.
//!
//! A page file is a JSON object keyed by decimal record indices ("0", "1", ...)
//! whose values use the collector's field names (`tweets`, `id`, `len`, ...).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::UNIX_EPOCH;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::extract::url_regex;

/// Maximum number of records a single page file may hold.
pub const MAX_PAGE_RECORDS: usize = 200;

const STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

/// Version tag of the shipped stopword list.
pub const STOPWORDS_VERSION: &str = "v1";

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    STOPWORDS_TXT
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

const REQUIRED_FIELDS: [&str; 8] = [
    "tweets", "id", "len", "date", "source", "likes", "retweets", "time",
];

/// One social-feed post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedRecord {
    #[serde(rename = "tweets")]
    pub text: String,
    pub id: u64,
    #[serde(rename = "len")]
    pub length: u64,
    #[serde(rename = "date")]
    pub date_ms: i64,
    pub source: String,
    pub likes: u64,
    pub retweets: u64,
    #[serde(rename = "time")]
    pub time_ms: i64,
    #[serde(default)]
    pub geo: Option<String>,
    /// Collector-supplied polarity. Never used downstream.
    #[serde(rename = "sentiment", default)]
    pub sentiment_hint: Option<i8>,
    #[serde(default)]
    pub token_list: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedPage {
    pub page_index: u32,
    pub records: Vec<FeedRecord>,
    pub collected_at: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: cannot read page file: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON at byte offset {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{path}: record {key:?}: field {field:?}: {message}")]
    Schema {
        path: PathBuf,
        key: String,
        field: String,
        message: String,
    },
    #[error("{path}: page exceeds {MAX_PAGE_RECORDS} records ({count})")]
    PageTooLarge { path: PathBuf, count: usize },
}

/// Loads page files in the given order. Records keep numeric key order.
pub fn load_pages<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<Vec<FeedPage>, IngestError> {
    paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| load_page(p.as_ref(), i as u32 + 1))
        .collect()
}

fn load_page(path: &Path, position: u32) -> Result<FeedPage, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let collected_at = fs::metadata(path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let page_index = page_index_from_name(path).unwrap_or(position);
    let records = parse_page_bytes(&bytes, path)?;
    Ok(FeedPage {
        page_index,
        records,
        collected_at,
    })
}

fn page_index_from_name(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Parses one page document. `path` is used for error messages only.
pub fn parse_page_bytes(bytes: &[u8], path: &Path) -> Result<Vec<FeedRecord>, IngestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let schema = |key: &str, field: &str, message: String| IngestError::Schema {
        path: path.to_path_buf(),
        key: key.to_string(),
        field: field.to_string(),
        message,
    };
    let Value::Object(map) = root else {
        return Err(schema("", "", "page must be a JSON object".into()));
    };
    if map.len() > MAX_PAGE_RECORDS {
        return Err(IngestError::PageTooLarge {
            path: path.to_path_buf(),
            count: map.len(),
        });
    }

    let mut keyed = Vec::with_capacity(map.len());
    for (key, value) in map {
        let index: u64 = key
            .parse()
            .map_err(|_| schema(&key, "", "record key is not a decimal index".into()))?;
        keyed.push((index, key, value));
    }
    keyed.sort_by_key(|(i, _, _)| *i);

    keyed
        .into_iter()
        .map(|(_, key, value)| record_from_value(&key, value).map_err(|(f, m)| schema(&key, &f, m)))
        .collect()
}

fn record_from_value(key: &str, value: Value) -> Result<FeedRecord, (String, String)> {
    let Value::Object(obj) = value else {
        return Err((String::new(), format!("record {key} is not an object")));
    };
    for field in REQUIRED_FIELDS {
        match obj.get(field) {
            None | Some(Value::Null) => {
                return Err((field.to_string(), "missing required field".into()))
            }
            Some(_) => {}
        }
    }
    let has_tokens = obj.contains_key("token_list");
    let mut record = typed_fields(obj)?;
    if record.length != record.text.chars().count() as u64 {
        return Err((
            "len".into(),
            format!(
                "len {} does not match text length {}",
                record.length,
                record.text.chars().count()
            ),
        ));
    }
    if let Some(h) = record.sentiment_hint {
        if !(-1..=1).contains(&h) {
            return Err(("sentiment".into(), format!("hint {h} not in -1..=1")));
        }
    }
    if !has_tokens {
        record.token_list = tokenize(&record.text);
    }
    Ok(record)
}

// Deserialize field by field so type errors name the offending field.
fn typed_fields(mut obj: Map<String, Value>) -> Result<FeedRecord, (String, String)> {
    fn take<T: serde::de::DeserializeOwned>(
        obj: &mut Map<String, Value>,
        field: &str,
    ) -> Result<T, (String, String)> {
        let v = obj.remove(field).unwrap_or(Value::Null);
        serde_json::from_value(v).map_err(|e| (field.to_string(), e.to_string()))
    }
    Ok(FeedRecord {
        text: take(&mut obj, "tweets")?,
        id: take(&mut obj, "id")?,
        length: take(&mut obj, "len")?,
        date_ms: take(&mut obj, "date")?,
        source: take(&mut obj, "source")?,
        likes: take(&mut obj, "likes")?,
        retweets: take(&mut obj, "retweets")?,
        time_ms: take(&mut obj, "time")?,
        geo: take(&mut obj, "geo")?,
        sentiment_hint: take(&mut obj, "sentiment")?,
        token_list: take::<Option<Vec<String>>>(&mut obj, "token_list")?.unwrap_or_default(),
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = bytes
        .split_inclusive(|b| *b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

/// Serializes records back into the page document layout.
pub fn page_to_json(records: &[FeedRecord]) -> String {
    let mut map = Map::new();
    for (i, r) in records.iter().enumerate() {
        map.insert(
            i.to_string(),
            serde_json::to_value(r).expect("records always serialize"),
        );
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("map always serializes")
}

/// Keeps the first record for each id.
pub fn dedup(records: Vec<FeedRecord>) -> Vec<FeedRecord> {
    let mut seen = HashSet::with_capacity(records.len());
    records.into_iter().filter(|r| seen.insert(r.id)).collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

/// Strips URLs, splits on non-alphanumerics and drops stopwords.
/// Casing is preserved and stopword matching is case-sensitive.
pub fn tokenize(text: &str) -> Vec<String> {
    let stripped = url_regex().replace_all(text, " ");
    stripped
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stopword(t))
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Was Bill O'Reilly found dead at his Long Island home? https://t.co/SGwagACMbW https://t.co/Ppx1FhJeMm";

    fn rec(id: u64) -> FeedRecord {
        FeedRecord {
            text: String::new(),
            id,
            length: 0,
            date_ms: 0,
            source: String::new(),
            likes: 0,
            retweets: 0,
            time_ms: 0,
            geo: None,
            sentiment_hint: None,
            token_list: vec![],
        }
    }

    #[test]
    fn tokenizes_sample_tweet() {
        assert_eq!(
            tokenize(SAMPLE),
            ["Was", "Bill", "O", "Reilly", "found", "dead", "Long", "Island", "home"]
        );
    }

    #[test]
    fn tokenize_edge_cases() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("https://a.example.com only"), ["only"]);
        assert!(tokenize("... !!! --").is_empty());
    }

    #[test]
    fn dedup_keeps_first() {
        let out = dedup(vec![rec(1), rec(2), rec(1)]);
        assert_eq!(out.iter().map(|r| r.id).collect::<Vec<_>>(), [1, 2]);
        assert!(dedup(vec![]).is_empty());
    }

    #[test]
    fn offset_points_into_line() {
        let b = b"{\n  \"0\": x\n}";
        assert_eq!(byte_offset(b, 2, 8), 9);
        assert_eq!(b[9], b'x');
    }

    #[test]
    fn missing_field_names_key_and_field() {
        let doc = br#"{"3": {"tweets": "a", "id": 1, "len": 1, "date": 0, "source": "s", "likes": 0, "time": 0}}"#;
        let err = parse_page_bytes(doc, Path::new("p.json")).unwrap_err();
        match err {
            IngestError::Schema { key, field, .. } => {
                assert_eq!(key, "3");
                assert_eq!(field, "retweets");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn length_must_match_text() {
        let doc = br#"{"0": {"tweets": "abc", "id": 1, "len": 2, "date": 0, "source": "s", "likes": 0, "retweets": 0, "time": 0}}"#;
        let err = parse_page_bytes(doc, Path::new("p.json")).unwrap_err();
        assert!(matches!(err, IngestError::Schema { ref field, .. } if field == "len"));
    }

    #[test]
    fn keys_sorted_numerically_and_extra_fields_ignored() {
        let mk = |id: u64| {
            format!(r#"{{"tweets": "word", "id": {id}, "len": 4, "date": 0, "source": "s", "likes": 0, "retweets": 0, "time": 0, "lang": "en"}}"#)
        };
        let doc = format!(r#"{{"10": {}, "2": {}, "1": {}}}"#, mk(10), mk(2), mk(1));
        let recs = parse_page_bytes(doc.as_bytes(), Path::new("p.json")).unwrap();
        assert_eq!(recs.iter().map(|r| r.id).collect::<Vec<_>>(), [1, 2, 10]);
        assert_eq!(recs[0].token_list, ["word"]);
    }

    #[test]
    fn page_index_from_file_name() {
        assert_eq!(page_index_from_name(Path::new("a/page_07.json")), Some(7));
        assert_eq!(page_index_from_name(Path::new("a/page.json")), None);
    }
}
