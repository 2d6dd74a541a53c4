//! Offline HTTP fixture server.
//!
//! Serves scripted responses for absolute URLs. Requests arrive in the replay
//! form `<base>/<scheme>/<host><path>` (see [`CrawlPolicy::replay_server`]),
//! which lets real-looking URLs such as `https://t.co/...` be answered
//! locally. Every request is logged with its arrival time.
//!
//! A site directory holds `routes.json`:
//!
//! ```json
//! [{"url": "https://t.co/x", "responses": [{"status": 301, "location": "https://..."}]},
//!  {"url": "https://host/page", "responses": [{"status": 200, "body_file": "pages/a.html"}]}]
//! ```
//!
//! A route with several responses plays them in order and then repeats the last.
//!
//! [`CrawlPolicy::replay_server`]: crate::crawler::CrawlPolicy::replay_server

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureResponse {
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_file: Option<String>,
}

impl FixtureResponse {
    pub fn redirect(to: &str) -> Self {
        Self {
            status: 301,
            location: Some(to.to_owned()),
            content_type: None,
            body: None,
            body_file: None,
        }
    }

    pub fn html(body: &str) -> Self {
        Self::status(200, body)
    }

    pub fn status(status: u16, body: &str) -> Self {
        Self {
            status,
            location: None,
            content_type: Some("text/html; charset=utf-8".into()),
            body: Some(body.to_owned()),
            body_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RouteEntry {
    url: String,
    responses: Vec<FixtureResponse>,
}

struct Route {
    responses: Vec<(FixtureResponse, Vec<u8>)>,
    served: usize,
}

/// A set of scripted routes keyed by absolute URL.
#[derive(Default)]
pub struct FixtureSite {
    routes: HashMap<String, Route>,
}

impl FixtureSite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, url: &str, responses: Vec<FixtureResponse>) -> Self {
        let responses = responses
            .into_iter()
            .map(|r| {
                let body = r.body.clone().unwrap_or_default().into_bytes();
                (r, body)
            })
            .collect();
        self.routes.insert(url.to_owned(), Route { responses, served: 0 });
        self
    }

    /// Loads `<dir>/routes.json`; `body_file` paths are relative to `dir`.
    pub fn load(dir: &Path) -> io::Result<Self> {
        let entries: Vec<RouteEntry> = serde_json::from_slice(&fs::read(dir.join("routes.json"))?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let mut site = Self::new();
        for entry in entries {
            let mut responses = Vec::with_capacity(entry.responses.len());
            for r in entry.responses {
                let body = match (&r.body_file, &r.body) {
                    (Some(file), _) => fs::read(dir.join(file))?,
                    (None, Some(b)) => b.clone().into_bytes(),
                    (None, None) => Vec::new(),
                };
                responses.push((r, body));
            }
            site.routes.insert(entry.url, Route { responses, served: 0 });
        }
        Ok(site)
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.routes.keys().map(String::as_str)
    }

    fn respond(&mut self, url: &str) -> (u16, Option<String>, Option<String>, Vec<u8>) {
        let Some(route) = self.routes.get_mut(url) else {
            return (404, None, Some("text/plain".into()), b"no fixture".to_vec());
        };
        let idx = route.served.min(route.responses.len().saturating_sub(1));
        route.served += 1;
        match route.responses.get(idx) {
            Some((r, body)) => (r.status, r.location.clone(), r.content_type.clone(), body.clone()),
            None => (204, None, None, Vec::new()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RequestLog {
    pub url: String,
    pub host: String,
    pub at: Instant,
    pub status: u16,
}

pub struct FixtureServer {
    base_url: String,
    server: Arc<tiny_http::Server>,
    log: Arc<Mutex<Vec<RequestLog>>>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Binds to an ephemeral port on 127.0.0.1.
    pub fn start(site: FixtureSite) -> io::Result<Self> {
        Self::bind("127.0.0.1:0", site)
    }

    pub fn bind(addr: &str, site: FixtureSite) -> io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| io::Error::other("fixture server has no IP address"))?;
        let server = Arc::new(server);
        let log = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let server = Arc::clone(&server);
            let log = Arc::clone(&log);
            let mut site = site;
            thread::spawn(move || {
                for request in server.incoming_requests() {
                    let at = Instant::now();
                    let (url, host) = decode_replay_path(request.url());
                    let (status, location, content_type, body) = site.respond(&url);
                    log.lock().unwrap_or_else(|e| e.into_inner()).push(RequestLog {
                        url,
                        host,
                        at,
                        status,
                    });
                    let mut response = tiny_http::Response::from_data(body).with_status_code(status);
                    for (name, value) in [("Location", location), ("Content-Type", content_type)] {
                        if let Some(v) = value {
                            if let Ok(h) = tiny_http::Header::from_bytes(name.as_bytes(), v.as_bytes()) {
                                response.add_header(h);
                            }
                        }
                    }
                    let _ = request.respond(response);
                }
            })
        };
        Ok(Self {
            base_url: format!("http://127.0.0.1:{port}"),
            server,
            log,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn requests(&self) -> Vec<RequestLog> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn requests_for(&self, url: &str) -> usize {
        self.requests().iter().filter(|r| r.url == url).count()
    }

    /// Smallest gap between consecutive requests to the same host.
    pub fn min_gap_per_host(&self) -> Option<Duration> {
        let mut by_host: HashMap<String, Vec<Instant>> = HashMap::new();
        for r in self.requests() {
            by_host.entry(r.host).or_default().push(r.at);
        }
        by_host
            .values_mut()
            .flat_map(|times| {
                times.sort();
                times.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>()
            })
            .min()
    }

    /// Blocks until the server thread exits (it never does on its own).
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// `/https/t.co/abc?x=1` -> (`https://t.co/abc?x=1`, `t.co`)
fn decode_replay_path(path: &str) -> (String, String) {
    let trimmed = path.trim_start_matches('/');
    let (scheme, rest) = trimmed.split_once('/').unwrap_or(("http", trimmed));
    let authority_end = rest.find(['/', '?']).unwrap_or(rest.len());
    let authority = &rest[..authority_end];
    let mut tail = rest[authority_end..].to_owned();
    if !tail.starts_with('/') {
        tail.insert(0, '/');
    }
    let host = authority.split(':').next().unwrap_or_default().to_ascii_lowercase();
    (format!("{scheme}://{authority}{tail}"), host)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_replay_paths() {
        assert_eq!(
            decode_replay_path("/https/t.co/SGwagACMbW"),
            ("https://t.co/SGwagACMbW".into(), "t.co".into())
        );
        assert_eq!(
            decode_replay_path("/https/www.snopes.com?q=1"),
            ("https://www.snopes.com/?q=1".into(), "www.snopes.com".into())
        );
    }

    #[test]
    fn scripted_sequence_repeats_last() {
        let mut site = FixtureSite::new().route(
            "http://h/a",
            vec![FixtureResponse::status(503, ""), FixtureResponse::html("ok")],
        );
        assert_eq!(site.respond("http://h/a").0, 503);
        assert_eq!(site.respond("http://h/a").0, 200);
        assert_eq!(site.respond("http://h/a").0, 200);
        assert_eq!(site.respond("http://h/missing").0, 404);
    }
}
