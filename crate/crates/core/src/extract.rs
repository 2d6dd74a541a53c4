//! URL extraction from post text and short-link resolution.

use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crawler::{CrawlError, Crawler};

/// The URL pattern, compiled case-insensitively.
///
/// Groups: 1 whole match, 2 scheme, 3 host (labels + TLD, or IPv4),
/// 4 TLD, 5 port, 6 path.
pub const URL_PATTERN: &str = r"((?:(https?|s?ftp):\/\/)?(?:www\.)?((?:(?:[A-Z0-9][a-zA-Z0-9-]{0,61}[A-Z0-9]*\.)+)([A-Z]{2,6})|(?:\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}))(?::(\d{1,5}))?(?:(\/\S+)*))";

pub const DEFAULT_MAX_HOPS: u32 = 10;

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    RegexBuilder::new(URL_PATTERN)
        .case_insensitive(true)
        .build()
        .expect("URL pattern compiles")
});

pub(crate) fn url_regex() -> &'static Regex {
    &URL_RE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Http,
    Https,
    Ftp,
    Sftp,
    None,
}

impl Scheme {
    fn parse(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "http" => Scheme::Http,
            "https" => Scheme::Https,
            "ftp" => Scheme::Ftp,
            "sftp" => Scheme::Sftp,
            _ => Scheme::None,
        }
    }

    pub fn is_crawlable(self) -> bool {
        matches!(self, Scheme::Http | Scheme::Https)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedUrl {
    pub raw: String,
    pub scheme: Scheme,
    pub host: String,
    /// Byte span of `raw` within the source text.
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub resolved: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolve_error: Option<String>,
    pub source_record_id: u64,
}

/// All non-overlapping matches, left to right.
pub fn extract_urls(text: &str, source_record_id: u64) -> Vec<ExtractedUrl> {
    URL_RE
        .captures_iter(text)
        .map(|caps| {
            let whole = caps.get(0).expect("group 0 always present");
            let scheme = caps
                .get(2)
                .map(|m| Scheme::parse(m.as_str()))
                .unwrap_or(Scheme::None);
            // host runs from after "scheme://" (keeping any "www.") to the end of group 3
            let host_start = caps.get(2).map(|m| m.end() + 3).unwrap_or(whole.start());
            let host_end = caps.get(3).map(|m| m.end()).unwrap_or(whole.end());
            ExtractedUrl {
                raw: whole.as_str().to_owned(),
                scheme,
                host: text[host_start..host_end].to_owned(),
                start: whole.start(),
                end: whole.end(),
                resolved: None,
                resolve_error: None,
                source_record_id,
            }
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("cannot resolve {url}: only http and https URLs are followed")]
    Unsupported { url: String },
    #[error("max_hops must be at least 1")]
    ZeroHops,
    #[error("redirect loop: {}", chain.join(" -> "))]
    Loop { chain: Vec<String> },
    #[error("redirect budget exhausted: {}", chain.join(" -> "))]
    HopBudget { chain: Vec<String> },
    #[error("transport failure resolving {url}: {message}")]
    Transport {
        url: String,
        message: String,
        retryable: bool,
    },
    #[error(transparent)]
    Crawl(CrawlError),
}

impl ResolveError {
    pub fn chain(&self) -> Option<&[String]> {
        match self {
            ResolveError::Loop { chain } | ResolveError::HopBudget { chain } => Some(chain),
            _ => None,
        }
    }

    pub fn retryable(&self) -> bool {
        match self {
            ResolveError::Transport { retryable, .. } => *retryable,
            ResolveError::Crawl(e) => e.is_retryable(),
            _ => false,
        }
    }
}

/// Follows 3xx `Location` headers through the crawler and returns the final URL.
pub fn resolve_redirects(crawler: &Crawler, url: &str, max_hops: u32) -> Result<String, ResolveError> {
    if max_hops == 0 {
        return Err(ResolveError::ZeroHops);
    }
    let lower = url.to_ascii_lowercase();
    if !(lower.starts_with("http://") || lower.starts_with("https://")) {
        return Err(ResolveError::Unsupported { url: url.to_owned() });
    }
    match crawler.follow(url, max_hops) {
        Ok(followed) => Ok(followed.result.final_url),
        Err(CrawlError::RedirectLoop { chain }) => Err(ResolveError::Loop { chain }),
        Err(CrawlError::TooManyRedirects { chain }) => Err(ResolveError::HopBudget { chain }),
        Err(CrawlError::Transport { url, message, .. }) => Err(ResolveError::Transport {
            url,
            message,
            retryable: true,
        }),
        Err(e) => Err(ResolveError::Crawl(e)),
    }
}
