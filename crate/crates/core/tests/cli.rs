mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use claimset::pipeline;
use common::fixtures;

fn claimset(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_claimset"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("CLAIMSET_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).output().unwrap()
}

fn config() -> String {
    fixtures().join("claimset.toml").display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn run_prints_a_report_and_logs_to_stderr() {
    let out = tempfile::tempdir().unwrap();
    let o = claimset(&["run", "--config", &config(), "--output-dir", &s(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["rows_emitted"], 14);
    assert_eq!(report["exit_code"], 0);
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(!stderr.is_empty());
    for line in stderr.lines() {
        assert!(line.starts_with("level="), "{line}");
        assert!(line.contains(" stage=") && line.contains(" msg=\""), "{line}");
    }
    assert!(stderr.contains("stage=crawl"));
}

#[test]
fn config_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let o = claimset(&["run", "--config", &config(), "--output-dir", &s(out.path()), "--lo", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = claimset(&["run", "--config", "/nonexistent/claimset.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = out.path().join("bad.toml");
    fs::write(&bad, "parallel = 0\n").unwrap();
    let o = claimset(&["analyze", "--config", &s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_overrides_apply() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_claimset"))
        .args(["run", "--config", &config(), "--output-dir", &s(out.path())])
        .env("CLAIMSET_HI", "-0.9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stage_failures_map_to_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let bad = out.path().join("page_01.json");
    fs::write(&bad, "{\"0\": ").unwrap();
    let o = claimset(&["ingest", "--pages", &s(&out.path().join("*.json")), "--out", &s(&out.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(4));
    let o = claimset(&["parse", "--crawl", &s(&out.path().join("missing.json")), "--out", &s(&out.path().join("p.json"))]);
    assert_eq!(o.status.code(), Some(7));
    let o = claimset(&["analyze", "--dataset", &s(&bad), "--out", &s(&out.path().join("s.json"))]);
    assert_eq!(o.status.code(), Some(10));
}

#[test]
fn empty_glob_succeeds_with_zero_counts() {
    let out = tempfile::tempdir().unwrap();
    let o = claimset(&[
        "run",
        "--offline",
        "--pages",
        &s(&out.path().join("nothing/*.json")),
        "--cache",
        &s(&out.path().join("cache")),
        "--output-dir",
        &s(&out.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["records_loaded", "urls_found", "pages_cached", "pages_parsed", "rows_emitted", "rows_dropped"] {
        assert_eq!(report[key], 0, "{key}");
    }
}

#[test]
fn stage_commands_reproduce_run() {
    let work = tempfile::tempdir().unwrap();
    let whole = work.path().join("whole");
    let o = claimset(&["run", "--config", &config(), "--output-dir", &s(&whole)]);
    assert_eq!(o.status.code(), Some(0));

    let st = work.path().join("stages");
    fs::create_dir_all(&st).unwrap();
    let f = |name: &str| s(&st.join(name));
    let pages = s(&fixtures().join("pages/page_*.json"));
    let cache = s(&fixtures().join("cache"));
    let steps: Vec<Vec<String>> = vec![
        vec!["ingest".into(), "--pages".into(), pages, "--out".into(), f("records.json")],
        vec![
            "extract".into(), "--records".into(), f("records.json"), "--out".into(), f("urls.json"),
            "--cache".into(), cache.clone(), "--offline".into(),
        ],
        vec![
            "crawl".into(), "--urls".into(), f("urls.json"), "--cache".into(), cache, "--offline".into(),
            "--rate-ms".into(), "0".into(), "--parallel".into(), "2".into(), "--out".into(), f("crawl.json"),
        ],
        vec![
            "parse".into(), "--crawl".into(), f("crawl.json"), "--out".into(), f("parsed.json"),
            "--warnings".into(), f("warn.log"),
        ],
        vec!["score".into(), "--parsed".into(), f("parsed.json"), "--out".into(), f("scored.json")],
        vec![
            "assemble".into(), "--parsed".into(), f("parsed.json"), "--scored".into(), f("scored.json"),
            "--out".into(), f("dataset.csv"), "--json".into(), f("dataset.json"),
        ],
        vec![
            "analyze".into(), "--dataset".into(), f("dataset.csv"), "--out".into(), f("stats.json"),
            "--violin".into(), f("violin.json"), "--svg".into(), f("plot.svg"), "--lo".into(), "-0.6".into(),
            "--hi".into(), "0.6".into(), "--grid".into(), "256".into(),
        ],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let o = claimset(&args);
        assert_eq!(o.status.code(), Some(0), "{step:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for (staged, ran) in [
        ("records.json", pipeline::RECORDS_JSON),
        ("urls.json", pipeline::URLS_JSON),
        ("crawl.json", pipeline::CRAWL_JSON),
        ("parsed.json", pipeline::PARSED_JSON),
        ("scored.json", pipeline::SCORED_JSON),
        ("dataset.csv", pipeline::DATASET_CSV),
        ("dataset.json", pipeline::DATASET_JSON),
        ("stats.json", pipeline::STATS_JSON),
        ("violin.json", pipeline::VIOLIN_JSON),
        ("plot.svg", pipeline::PLOT_SVG),
        ("warn.log", pipeline::WARNINGS_LOG),
    ] {
        assert_eq!(fs::read(st.join(staged)).unwrap(), fs::read(whole.join(ran)).unwrap(), "{staged}");
    }
}

#[test]
fn score_accepts_a_custom_lexicon() {
    let work = tempfile::tempdir().unwrap();
    let whole = work.path().join("whole");
    assert_eq!(claimset(&["run", "--config", &config(), "--output-dir", &s(&whole)]).status.code(), Some(0));
    let lex = work.path().join("lex.tsv");
    fs::write(&lex, "# tiny\nfound\t0.5\ndead\t-1\n").unwrap();
    let out = work.path().join("scored.json");
    let o = claimset(&["score", "--parsed", &s(&whole.join(pipeline::PARSED_JSON)), "--lexicon", &s(&lex), "--out", &s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let scored: serde_json::Value = serde_json::from_slice(&fs::read(out).unwrap()).unwrap();
    let oreilly = scored.as_array().unwrap().iter().find(|r| r["record_id"] == 1075020507186126853u64).unwrap();
    assert_eq!(oreilly["score"]["value"], -0.25);
}
