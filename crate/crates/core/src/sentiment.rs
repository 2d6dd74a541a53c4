//! Lexicon sentiment scoring.
//!
//! A score is the mean polarity of the lexicon words found in the text, with
//! words shortly after a negator flipped. The result lies in `[-1, 1]`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::url_regex;

const DEFAULT_LEXICON_TSV: &str = include_str!("../data/lexicon.tsv");

pub const DEFAULT_LEXICON_VERSION: &str = "v1";
pub const DEFAULT_NEGATORS: [&str; 3] = ["not", "no", "never"];
pub const DEFAULT_NEGATION_WINDOW: usize = 3;

static DEFAULT_LEXICON: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::parse(DEFAULT_LEXICON_TSV).expect("shipped lexicon is valid"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub value: f64,
    pub polarity: Polarity,
}

impl SentimentScore {
    pub fn new(value: f64) -> Result<Self, SentimentError> {
        let value = if value == 0.0 { 0.0 } else { value };
        Ok(Self {
            polarity: classify(value)?,
            value,
        })
    }
}

/// The sentiment outcome for one feed record between pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record_id: u64,
    pub score: Option<SentimentScore>,
}

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("sentiment value {0} outside [-1, 1]")]
    Domain(f64),
    #[error("lexicon line {line}: {message}")]
    LexiconFormat { line: usize, message: String },
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
    negation_window: usize,
}

impl Lexicon {
    pub fn new(
        entries: impl IntoIterator<Item = (String, f64)>,
        negators: impl IntoIterator<Item = String>,
        negation_window: usize,
    ) -> Result<Self, SentimentError> {
        let mut map = HashMap::new();
        for (word, p) in entries {
            if !(-1.0..=1.0).contains(&p) {
                return Err(SentimentError::Domain(p));
            }
            map.insert(word.to_lowercase(), p);
        }
        Ok(Self {
            entries: map,
            negators: negators.into_iter().map(|w| w.to_lowercase()).collect(),
            negation_window,
        })
    }

    /// The shipped English lexicon with default negators.
    pub fn default_english() -> &'static Lexicon {
        &DEFAULT_LEXICON
    }

    /// Parses `word<TAB>polarity` lines; `#` starts a comment line.
    /// Default negators and window are attached.
    pub fn parse(text: &str) -> Result<Self, SentimentError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SentimentError::LexiconFormat { line: i + 1, message };
            let (word, pol) = line
                .split_once('\t')
                .ok_or_else(|| err("expected word<TAB>polarity".into()))?;
            let p: f64 = pol
                .trim()
                .parse()
                .map_err(|e| err(format!("bad polarity {pol:?}: {e}")))?;
            if !(-1.0..=1.0).contains(&p) {
                return Err(err(format!("polarity {p} outside [-1, 1]")));
            }
            entries.push((word.trim().to_owned(), p));
        }
        Self::new(
            entries,
            DEFAULT_NEGATORS.iter().map(|s| s.to_string()),
            DEFAULT_NEGATION_WINDOW,
        )
    }

    pub fn from_path(path: &Path) -> Result<Self, SentimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| SentimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn with_negation(mut self, negators: impl IntoIterator<Item = String>, window: usize) -> Self {
        self.negators = negators.into_iter().map(|w| w.to_lowercase()).collect();
        self.negation_window = window;
        self
    }

    /// The same lexicon with every polarity sign-flipped.
    pub fn negated(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|(w, p)| (w.clone(), -p)).collect(),
            ..self.clone()
        }
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn negation_window(&self) -> usize {
        self.negation_window
    }

    pub fn is_negator(&self, word: &str) -> bool {
        self.negators.contains(word)
    }
}

/// Lower-cased, URL-free, punctuation-split tokens used for scoring.
pub fn score_tokens(text: &str) -> Vec<String> {
    url_regex()
        .replace_all(text, " ")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Polarity contributions of matched tokens, negation applied.
pub fn contributions(tokens: &[String], lexicon: &Lexicon) -> Vec<f64> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(i, tok)| {
            let p = lexicon.polarity(tok)?;
            let from = i.saturating_sub(lexicon.negation_window);
            let negated = tokens[from..i].iter().any(|t| lexicon.is_negator(t));
            Some(if negated { -p } else { p })
        })
        .collect()
}

pub fn score(text: &str, lexicon: &Lexicon) -> SentimentScore {
    let parts = contributions(&score_tokens(text), lexicon);
    let value = if parts.is_empty() {
        0.0
    } else {
        (exact_sum(&parts) / parts.len() as f64).clamp(-1.0, 1.0)
    };
    SentimentScore::new(value).expect("clamped value is in range")
}

pub fn classify(value: f64) -> Result<Polarity, SentimentError> {
    if !(-1.0..=1.0).contains(&value) {
        return Err(SentimentError::Domain(value));
    }
    Ok(if value > 0.0 {
        Polarity::Positive
    } else if value < 0.0 {
        Polarity::Negative
    } else {
        Polarity::Neutral
    })
}

/// Correctly rounded sum (Shewchuk's partials), independent of input order
/// and exactly odd: `exact_sum(-x) == -exact_sum(x)`.
fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // round-half-even correction, as in Python's math.fsum
    let Some(mut hi) = partials.pop() else { return 0.0 };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}
