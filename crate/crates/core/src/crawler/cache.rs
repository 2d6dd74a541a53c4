//! On-disk response cache.
//!
//! Layout (version 1):
//!
//! ```text
//! <cache_dir>/v1/<hh>/<sha256(url) hex>.json
//! ```
//!
//! where `<hh>` is the first two hex digits of the digest. Each file is one
//! [`CacheEntry`] serialized as JSON, body base64-encoded. Entries are written
//! to a temporary file in the same directory and renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CACHE_LAYOUT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub url: String,
    pub status: u16,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub content_type: Option<String>,
    pub fetched_at: u64,
    #[serde(with = "super::base64_bytes")]
    pub body: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key(url: &str) -> String {
        let digest = Sha256::digest(url.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn entry_path(&self, url: &str) -> PathBuf {
        let key = Self::key(url);
        self.root
            .join(CACHE_LAYOUT_VERSION)
            .join(&key[..2])
            .join(format!("{key}.json"))
    }

    /// Returns `Ok(None)` on a miss. An entry recorded under a different URL
    /// (digest collision or hand-edited file) is treated as a miss.
    pub fn get(&self, url: &str) -> io::Result<Option<CacheEntry>> {
        let path = self.entry_path(url);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        Ok((entry.url == url).then_some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> io::Result<()> {
        let path = self.entry_path(&entry.url);
        let dir = path.parent().expect("entry path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("entry"),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let json = serde_json::to_vec_pretty(entry).map_err(io::Error::other)?;
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&json)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    pub fn remove(&self, url: &str) -> io::Result<bool> {
        match fs::remove_file(self.entry_path(url)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e),
        }
    }
}
