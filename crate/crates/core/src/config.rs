//! Pipeline configuration: a flat `key = value` file, `CLAIMSET_*`
//! environment overrides, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::analysis::{DEFAULT_GRID, DEFAULT_HI, DEFAULT_LO};
use crate::crawler::{CrawlPolicy, DEFAULT_USER_AGENT};
use crate::extract::DEFAULT_MAX_HOPS;
use crate::sentiment::{Lexicon, SentimentError};

pub const ENV_PREFIX: &str = "CLAIMSET_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Str,
    Path,
    Bool,
    Int,
    Float,
}

const KEYS: [(&str, Kind); 17] = [
    ("pages_glob", Kind::Path),
    ("cache_dir", Kind::Path),
    ("offline", Kind::Bool),
    ("rate_ms", Kind::Int),
    ("parallel", Kind::Int),
    ("lexicon_path", Kind::Path),
    ("lo", Kind::Float),
    ("hi", Kind::Float),
    ("output_dir", Kind::Path),
    ("retries", Kind::Int),
    ("backoff_ms", Kind::Int),
    ("timeout_ms", Kind::Int),
    ("user_agent", Kind::Str),
    ("max_hops", Kind::Int),
    ("grid", Kind::Int),
    ("resolve", Kind::Bool),
    ("replay_server", Kind::Str),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pages_glob: String,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub rate_ms: u64,
    pub parallel: usize,
    /// `None` selects the built-in lexicon.
    pub lexicon_path: Option<PathBuf>,
    pub lo: f64,
    pub hi: f64,
    pub output_dir: PathBuf,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
    pub user_agent: String,
    pub max_hops: u32,
    pub grid: usize,
    /// Resolve shortened links during extraction.
    pub resolve: bool,
    pub replay_server: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let policy = CrawlPolicy::default();
        Self {
            pages_glob: "pages/*.json".into(),
            cache_dir: policy.cache_dir,
            offline: false,
            rate_ms: policy.min_interval_ms_per_host,
            parallel: policy.max_parallel,
            lexicon_path: None,
            lo: DEFAULT_LO,
            hi: DEFAULT_HI,
            output_dir: PathBuf::from("claimset-out"),
            retries: policy.max_retries,
            backoff_ms: policy.retry_backoff_ms,
            timeout_ms: policy.timeout_ms,
            user_agent: DEFAULT_USER_AGENT.into(),
            max_hops: DEFAULT_MAX_HOPS,
            grid: DEFAULT_GRID,
            resolve: true,
            replay_server: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    /// Defaults, then `file`, then matching entries of `env`. Relative paths
    /// in the file resolve against the file's directory.
    pub fn from_sources<I, K, V>(file: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table = Table::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let base = path.parent().unwrap_or(Path::new(""));
            for (k, v) in parse_file(&text, &path.display().to_string())? {
                table.insert(k.clone(), rebase(&k, v, base));
            }
        }
        for (k, v) in env {
            let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = rest.to_ascii_lowercase();
            let Some(kind) = kind_of(&key) else {
                log::debug!(target: "config", "ignoring unknown variable {}", k.as_ref());
                continue;
            };
            table.insert(key, env_value(k.as_ref(), kind, v.as_ref())?);
        }
        let config = PipelineConfig::deserialize(Value::Table(table)).map_err(|e| ConfigError::Parse {
            origin: file.map_or_else(|| "environment".into(), |p| p.display().to_string()),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lo < self.hi) {
            return Err(ConfigError::Invalid(format!(
                "thresholds need lo < hi (lo = {}, hi = {})",
                self.lo, self.hi
            )));
        }
        if !(-1.0..=1.0).contains(&self.lo) || !(-1.0..=1.0).contains(&self.hi) {
            return Err(ConfigError::Invalid("thresholds must lie in [-1, 1]".into()));
        }
        if self.parallel < 1 {
            return Err(ConfigError::Invalid("parallel must be at least 1".into()));
        }
        if self.max_hops < 1 {
            return Err(ConfigError::Invalid("max_hops must be at least 1".into()));
        }
        if self.grid < 2 {
            return Err(ConfigError::Invalid("grid must be at least 2".into()));
        }
        Ok(())
    }

    pub fn crawl_policy(&self) -> CrawlPolicy {
        CrawlPolicy {
            min_interval_ms_per_host: self.rate_ms,
            max_retries: self.retries,
            retry_backoff_ms: self.backoff_ms,
            max_parallel: self.parallel,
            cache_dir: self.cache_dir.clone(),
            offline_only: self.offline,
            user_agent: self.user_agent.clone(),
            max_redirects: self.max_hops,
            timeout_ms: self.timeout_ms,
            replay_server: self.replay_server.clone(),
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon, SentimentError> {
        match &self.lexicon_path {
            Some(p) => Lexicon::from_path(p),
            None => Ok(Lexicon::default_english().clone()),
        }
    }
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn parse_file(text: &str, origin: &str) -> Result<Table, ConfigError> {
    let err = |message: String| ConfigError::Parse {
        origin: origin.to_owned(),
        message,
    };
    let table: Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
    for (k, v) in &table {
        if kind_of(k).is_none() {
            return Err(err(format!("unknown key {k:?}")));
        }
        if matches!(v, Value::Table(_) | Value::Array(_)) {
            return Err(err(format!("key {k:?} must be a scalar value")));
        }
    }
    Ok(table)
}

fn rebase(key: &str, value: Value, base: &Path) -> Value {
    match (kind_of(key), value) {
        (Some(Kind::Path), Value::String(s)) if Path::new(&s).is_relative() => {
            Value::String(base.join(&s).to_string_lossy().into_owned())
        }
        (_, v) => v,
    }
}

fn env_value(name: &str, kind: Kind, raw: &str) -> Result<Value, ConfigError> {
    let err = |what: &str| ConfigError::Parse {
        origin: name.to_owned(),
        message: format!("expected {what}, got {raw:?}"),
    };
    let raw = raw.trim();
    Ok(match kind {
        Kind::Str | Kind::Path => Value::String(raw.to_owned()),
        Kind::Bool => match raw.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Value::Boolean(true),
            "0" | "false" | "no" | "off" => Value::Boolean(false),
            _ => return Err(err("a boolean")),
        },
        Kind::Int => Value::Integer(raw.parse().map_err(|_| err("an integer"))?),
        Kind::Float => Value::Float(raw.parse().map_err(|_| err("a number"))?),
    })
}
