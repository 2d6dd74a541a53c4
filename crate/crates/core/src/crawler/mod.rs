//! Polite, cached HTTP fetching.
//!
//! Every response below 500 is cached under its exact request URL, so a
//! populated cache replays a crawl (redirect hops included) with no network.

mod cache;
mod limiter;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub use cache::{CacheEntry, ResponseCache, CACHE_LAYOUT_VERSION};
pub use limiter::HostLimiter;

pub const DEFAULT_USER_AGENT: &str = concat!(
    "claimset/",
    env!("CARGO_PKG_VERSION"),
    " (fact-check dataset builder; polite crawler)"
);

const MAX_BODY_BYTES: u64 = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlPolicy {
    pub min_interval_ms_per_host: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_parallel: usize,
    pub cache_dir: PathBuf,
    pub offline_only: bool,
    pub user_agent: String,
    /// Redirect budget used by [`Crawler::fetch`].
    pub max_redirects: u32,
    pub timeout_ms: u64,
    /// Route every request to `<base>/<scheme>/<host><path>` instead of the
    /// origin. Used to replay real URLs against a local fixture server.
    #[serde(default)]
    pub replay_server: Option<String>,
}

impl Default for CrawlPolicy {
    fn default() -> Self {
        Self {
            min_interval_ms_per_host: 1000,
            max_retries: 3,
            retry_backoff_ms: 500,
            max_parallel: 4,
            cache_dir: PathBuf::from(".claimset-cache"),
            offline_only: false,
            user_agent: DEFAULT_USER_AGENT.to_owned(),
            max_redirects: 10,
            timeout_ms: 30_000,
            replay_server: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlResult {
    pub requested_url: String,
    pub final_url: String,
    pub status: u16,
    #[serde(with = "base64_bytes")]
    pub body: Vec<u8>,
    pub fetched_at: u64,
    pub from_cache: bool,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub content_type: Option<String>,
}

impl CrawlResult {
    pub fn is_redirect(&self) -> bool {
        (300..400).contains(&self.status) && self.location.is_some()
    }

    fn from_entry(requested_url: &str, entry: CacheEntry, from_cache: bool) -> Self {
        Self {
            requested_url: requested_url.to_owned(),
            final_url: requested_url.to_owned(),
            status: entry.status,
            body: entry.body,
            fetched_at: entry.fetched_at,
            from_cache,
            location: entry.location,
            content_type: entry.content_type,
        }
    }
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("invalid URL {url}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("cache miss in offline mode: {url}")]
    CacheMiss { url: String },
    #[error("upstream error {status} from {url} after {attempts} attempts")]
    Upstream { url: String, status: u16, attempts: u32 },
    #[error("transport failure for {url} after {attempts} attempts: {message}")]
    Transport {
        url: String,
        message: String,
        attempts: u32,
    },
    #[error("HTTP {status} from {url}")]
    Status { url: String, status: u16 },
    #[error("redirect loop: {}", chain.join(" -> "))]
    RedirectLoop { chain: Vec<String> },
    #[error("too many redirects: {}", chain.join(" -> "))]
    TooManyRedirects { chain: Vec<String> },
    #[error("cache I/O error at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CrawlError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, CrawlError::Upstream { .. } | CrawlError::Transport { .. })
    }

    pub fn is_cache_miss(&self) -> bool {
        matches!(self, CrawlError::CacheMiss { .. })
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            CrawlError::InvalidUrl { .. } => "invalid-url",
            CrawlError::CacheMiss { .. } => "cache-miss",
            CrawlError::Upstream { .. } => "upstream",
            CrawlError::Transport { .. } => "transport",
            CrawlError::Status { .. } => "status",
            CrawlError::RedirectLoop { .. } => "redirect-loop",
            CrawlError::TooManyRedirects { .. } => "too-many-redirects",
            CrawlError::Cache { .. } => "cache-io",
        }
    }
}

/// A redirect chain and the terminal response.
#[derive(Debug, Clone)]
pub struct Followed {
    pub chain: Vec<String>,
    pub result: CrawlResult,
}

pub struct Crawler {
    policy: CrawlPolicy,
    cache: ResponseCache,
    limiter: HostLimiter,
    agent: ureq::Agent,
    network_requests: AtomicU64,
}

impl std::fmt::Debug for Crawler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Crawler").field("policy", &self.policy).finish()
    }
}

impl Crawler {
    pub fn new(policy: CrawlPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .max_redirects_will_error(false)
            .http_status_as_error(false)
            .user_agent(policy.user_agent.as_str())
            .timeout_global(Some(Duration::from_millis(policy.timeout_ms)))
            .build();
        Self {
            cache: ResponseCache::new(&policy.cache_dir),
            limiter: HostLimiter::new(Duration::from_millis(policy.min_interval_ms_per_host)),
            agent: config.into(),
            network_requests: AtomicU64::new(0),
            policy,
        }
    }

    pub fn policy(&self) -> &CrawlPolicy {
        &self.policy
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Number of HTTP requests actually sent (retries included).
    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::Relaxed)
    }

    /// One request for `url`, no redirect following. Any status below 500 is
    /// returned as `Ok` and cached.
    pub fn fetch_once(&self, url: &str) -> Result<CrawlResult, CrawlError> {
        let parsed = parse_http_url(url)?;
        if let Some(hit) = self.cached(url)? {
            return Ok(hit);
        }
        if self.policy.offline_only {
            return Err(CrawlError::CacheMiss { url: url.to_owned() });
        }
        let host = parsed.host_str().unwrap_or_default().to_ascii_lowercase();

        let mut last_err = None;
        let attempts = self.policy.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(
                    self.policy.retry_backoff_ms.saturating_mul(attempt as u64),
                ));
            }
            let outcome = self.limiter.run(&host, || {
                // a concurrent worker may have filled the entry while we waited
                if let Some(hit) = self.cached(url)? {
                    return Ok(Ok(hit));
                }
                let fetched = self.request(url);
                if let Ok(result) = &fetched {
                    if result.status < 500 {
                        self.store(url, result)?;
                    }
                }
                Ok::<_, CrawlError>(fetched)
            })?;
            match outcome {
                Ok(entry) if entry.status >= 500 => {
                    warn!(target: "crawl", "{url}: HTTP {} (attempt {})", entry.status, attempt + 1);
                    last_err = Some(CrawlError::Upstream {
                        url: url.to_owned(),
                        status: entry.status,
                        attempts: attempt + 1,
                    });
                }
                Ok(result) => return Ok(result),
                Err(message) => {
                    warn!(target: "crawl", "{url}: {message} (attempt {})", attempt + 1);
                    last_err = Some(CrawlError::Transport {
                        url: url.to_owned(),
                        message,
                        attempts: attempt + 1,
                    });
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn store(&self, url: &str, result: &CrawlResult) -> Result<(), CrawlError> {
        let entry = CacheEntry {
            url: url.to_owned(),
            status: result.status,
            location: result.location.clone(),
            content_type: result.content_type.clone(),
            fetched_at: result.fetched_at,
            body: result.body.clone(),
        };
        self.cache.put(&entry).map_err(|source| CrawlError::Cache {
            path: self.cache.entry_path(url),
            source,
        })
    }

    fn cached(&self, url: &str) -> Result<Option<CrawlResult>, CrawlError> {
        let hit = self.cache.get(url).map_err(|source| CrawlError::Cache {
            path: self.cache.entry_path(url),
            source,
        })?;
        Ok(hit.map(|e| CrawlResult::from_entry(url, e, true)))
    }

    fn request(&self, url: &str) -> Result<CrawlResult, String> {
        let target = self.routed(url);
        debug!(target: "crawl", "GET {url} via {target}");
        self.network_requests.fetch_add(1, Ordering::Relaxed);
        let mut resp = self.agent.get(&target).call().map_err(|e| e.to_string())?;
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_owned)
        };
        let location = header("location");
        let content_type = header("content-type");
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| e.to_string())?;
        Ok(CrawlResult {
            requested_url: url.to_owned(),
            final_url: url.to_owned(),
            status,
            body,
            fetched_at: now_ms(),
            from_cache: false,
            location,
            content_type,
        })
    }

    fn routed(&self, url: &str) -> String {
        let Some(base) = &self.policy.replay_server else {
            return url.to_owned();
        };
        let Ok(u) = Url::parse(url) else {
            return url.to_owned();
        };
        let mut authority = u.host_str().unwrap_or_default().to_owned();
        if let Some(port) = u.port() {
            authority.push_str(&format!(":{port}"));
        }
        let mut routed = format!("{}/{}/{}{}", base.trim_end_matches('/'), u.scheme(), authority, u.path());
        if let Some(q) = u.query() {
            routed.push('?');
            routed.push_str(q);
        }
        routed
    }

    /// Follows redirects from `url` for at most `max_hops` hops. A terminal
    /// non-3xx response of any status ends the chain.
    pub fn follow(&self, url: &str, max_hops: u32) -> Result<Followed, CrawlError> {
        let mut chain = vec![url.to_owned()];
        let mut current = url.to_owned();
        let mut hops = 0;
        loop {
            let result = self.fetch_once(&current)?;
            let Some(location) = result.location.as_deref().filter(|_| result.is_redirect()) else {
                let mut result = result;
                result.requested_url = url.to_owned();
                result.final_url = current;
                return Ok(Followed { chain, result });
            };
            let next = Url::parse(&current)
                .and_then(|base| base.join(location))
                .map_err(|e| CrawlError::InvalidUrl {
                    url: location.to_owned(),
                    reason: e.to_string(),
                })?
                .to_string();
            let revisit = chain.contains(&next);
            chain.push(next.clone());
            if revisit {
                return Err(CrawlError::RedirectLoop { chain });
            }
            hops += 1;
            if hops > max_hops {
                return Err(CrawlError::TooManyRedirects { chain });
            }
            current = next;
        }
    }

    /// Fetches `url`, following redirects within the policy budget.
    /// A terminal 4xx becomes [`CrawlError::Status`].
    pub fn fetch(&self, url: &str) -> Result<CrawlResult, CrawlError> {
        let followed = self.follow(url, self.policy.max_redirects)?;
        let status = followed.result.status;
        if (400..500).contains(&status) || (300..400).contains(&status) {
            return Err(CrawlError::Status {
                url: followed.result.final_url,
                status,
            });
        }
        Ok(followed.result)
    }

    /// Fetches every URL with at most `max_parallel` requests in flight.
    /// Output aligns with input; failures are per entry.
    pub fn fetch_all(&self, urls: &[String]) -> Vec<Result<CrawlResult, CrawlError>> {
        let slots: Vec<Mutex<Option<Result<CrawlResult, CrawlError>>>> =
            urls.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.policy.max_parallel.max(1).min(urls.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(url) = urls.get(i) else { break };
                    let r = self.fetch(url);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .unwrap_or_else(|e| e.into_inner())
                    .expect("every slot is filled")
            })
            .collect()
    }
}

pub fn fetch(url: &str, policy: &CrawlPolicy) -> Result<CrawlResult, CrawlError> {
    Crawler::new(policy.clone()).fetch(url)
}

pub fn fetch_all(urls: &[String], policy: &CrawlPolicy) -> Vec<Result<CrawlResult, CrawlError>> {
    Crawler::new(policy.clone()).fetch_all(urls)
}

fn parse_http_url(url: &str) -> Result<Url, CrawlError> {
    let parsed = Url::parse(url).map_err(|e| CrawlError::InvalidUrl {
        url: url.to_owned(),
        reason: e.to_string(),
    })?;
    match parsed.scheme() {
        "http" | "https" if parsed.host_str().is_some() => Ok(parsed),
        _ => Err(CrawlError::InvalidUrl {
            url: url.to_owned(),
            reason: "only http and https URLs with a host are fetched".into(),
        }),
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub(crate) mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_routing_keeps_scheme_host_and_query() {
        let c = Crawler::new(CrawlPolicy {
            replay_server: Some("http://127.0.0.1:9/".into()),
            ..CrawlPolicy::default()
        });
        assert_eq!(
            c.routed("https://www.snopes.com/fact-check/x/?a=1"),
            "http://127.0.0.1:9/https/www.snopes.com/fact-check/x/?a=1"
        );
        assert_eq!(c.routed("http://h:8080/p"), "http://127.0.0.1:9/http/h:8080/p");
    }

    #[test]
    fn offline_empty_cache_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let c = Crawler::new(CrawlPolicy {
            cache_dir: dir.path().into(),
            offline_only: true,
            ..CrawlPolicy::default()
        });
        let err = c.fetch("https://example.org/").unwrap_err();
        assert!(err.is_cache_miss());
        assert!(err.to_string().contains("https://example.org/"));
        assert_eq!(c.network_requests(), 0);
    }

    #[test]
    fn non_http_schemes_rejected() {
        let c = Crawler::new(CrawlPolicy::default());
        assert!(matches!(c.fetch_once("ftp://x.org/a"), Err(CrawlError::InvalidUrl { .. })));
        assert!(c.fetch_all(&[]).is_empty());
    }
}
