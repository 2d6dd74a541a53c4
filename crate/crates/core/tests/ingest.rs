mod common;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use claimset::ingest::{self, FeedRecord, IngestError};
use serde_json::{json, Map, Value};

use common::{fixtures, SAMPLE_TWEET};

fn record_json(id: u64, text: &str) -> Value {
    json!({
        "tweets": text, "id": id, "len": text.chars().count(), "date": 1545139836000i64,
        "source": "test", "likes": 0, "retweets": 0, "time": 1545139836000i64, "geo": null
    })
}

fn write_page(dir: &Path, name: &str, records: &[Value]) -> std::path::PathBuf {
    let map: Map<String, Value> = records.iter().enumerate().map(|(i, r)| (i.to_string(), r.clone())).collect();
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec(&Value::Object(map)).unwrap()).unwrap();
    path
}

#[test]
fn loads_the_sample_record() {
    let pages = ingest::load_pages(&[fixtures().join("pages/page_01.json")]).unwrap();
    assert_eq!(pages.len(), 1);
    assert_eq!(pages[0].page_index, 1);
    let r = pages[0].records.iter().find(|r| r.id == 1075020507186126853).unwrap();
    assert_eq!((r.likes, r.retweets, r.length), (4, 2, 101));
    assert_eq!(r.text, SAMPLE_TWEET);
    assert_eq!(r.source, "AgoraPulse Manager");
    assert_eq!(r.sentiment_hint, Some(-1));
    assert_eq!(r.geo, None);
    assert_eq!(r.token_list, ["Was", "Bill", "O", "Reilly", "found", "dead", "Long", "Island", "home"]);
}

#[test]
fn empty_page_has_no_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("page_03.json");
    fs::write(&path, "{}").unwrap();
    let pages = ingest::load_pages(&[path]).unwrap();
    assert!(pages[0].records.is_empty());
    assert_eq!(pages[0].page_index, 3);
}

#[test]
fn rejects_pages_over_200_records() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<Value> = (0..201).map(|i| record_json(i, "a")).collect();
    let path = write_page(dir.path(), "big.json", &records);
    let err = ingest::load_pages(&[&path]).unwrap_err();
    assert!(matches!(err, IngestError::PageTooLarge { count: 201, .. }));
    assert!(err.to_string().contains("page exceeds 200 records"), "{err}");

    let ok = write_page(dir.path(), "full.json", &records[..200]);
    assert_eq!(ingest::load_pages(&[&ok]).unwrap()[0].records.len(), 200);
}

#[test]
fn malformed_json_names_file_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"0\": {\"tweets\": \"x\",, }}").unwrap();
    match ingest::load_pages(&[&path]).unwrap_err() {
        IngestError::Parse { path: p, offset, .. } => {
            assert_eq!(p, path);
            assert_eq!(offset, 21);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn dedup_across_pages_matches_a_set_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let first: Vec<Value> = (0..200).map(|i| record_json(1000 + i, "first")).collect();
    // 50 ids repeated from the first page
    let second: Vec<Value> = (150..350).map(|i| record_json(1000 + i, "second")).collect();
    let a = write_page(dir.path(), "page_01.json", &first);
    let b = write_page(dir.path(), "page_02.json", &second);
    let pages = ingest::load_pages(&[a, b]).unwrap();
    let all: Vec<FeedRecord> = pages.into_iter().flat_map(|p| p.records).collect();
    assert_eq!(all.len(), 400);
    let distinct: HashSet<u64> = all.iter().map(|r| r.id).collect();
    let kept = ingest::dedup(all.clone());
    assert_eq!(kept.len(), distinct.len());
    assert_eq!(kept.len(), 350);
    // first occurrence wins
    assert!(kept.iter().filter(|r| (1150..1200).contains(&r.id)).all(|r| r.text == "first"));
}

#[test]
fn page_json_round_trips() {
    let pages = ingest::load_pages(&[fixtures().join("pages/page_02.json")]).unwrap();
    let records = pages[0].records.clone();
    let text = ingest::page_to_json(&records);
    let again = ingest::parse_page_bytes(text.as_bytes(), Path::new("mem.json")).unwrap();
    assert_eq!(again, records);
}

#[test]
fn fixture_corpus_respects_record_invariants() {
    let mut paths: Vec<_> = fs::read_dir(fixtures().join("pages")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let pages = ingest::load_pages(&paths).unwrap();
    assert_eq!(pages.iter().map(|p| p.page_index).collect::<Vec<_>>(), [1, 2]);
    for r in pages.iter().flat_map(|p| &p.records) {
        assert_eq!(r.length as usize, r.text.chars().count());
        assert!(r.token_list.iter().all(|t| !t.contains("://") && t.chars().any(char::is_alphanumeric)));
    }
}
