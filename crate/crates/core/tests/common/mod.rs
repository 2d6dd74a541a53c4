#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use claimset::config::PipelineConfig;
use claimset::crawler::CrawlPolicy;

pub const SAMPLE_TWEET: &str =
    "Was Bill O'Reilly found dead at his Long Island home? https://t.co/SGwagACMbW https://t.co/Ppx1FhJeMm";
pub const OREILLY_URL: &str = "https://www.snopes.com/fact-check/bill-oreilly-found-dead/";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The shipped offline configuration with artifacts redirected to `out`.
pub fn fixture_config(out: &Path) -> PipelineConfig {
    let no_env: [(&str, &str); 0] = [];
    let mut c = PipelineConfig::from_sources(Some(&fixtures().join("claimset.toml")), no_env).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

/// Fast policy for a fixture server: no politeness delay, tiny backoff.
pub fn replay_policy(base_url: &str, cache: &Path) -> CrawlPolicy {
    CrawlPolicy {
        min_interval_ms_per_host: 0,
        retry_backoff_ms: 1,
        cache_dir: cache.to_path_buf(),
        replay_server: Some(base_url.to_owned()),
        timeout_ms: 5_000,
        ..CrawlPolicy::default()
    }
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}
