//! Credibility taxonomy, rating clusters, and fact-source trust.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rating {
    True,
    False,
    MostlyTrue,
    MostlyFalse,
    Outdated,
    Miscaptioned,
    Misattributed,
    Unproven,
    Mixture,
    Legend,
    Scam,
    CorrectAttribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RatingCluster {
    FalseLike,
    TrueLike,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("unknown rating {0:?}")]
    Unknown(String),
}

impl Rating {
    /// All labels, in plot order.
    pub const ALL: [Rating; 12] = [
        Rating::True,
        Rating::False,
        Rating::MostlyTrue,
        Rating::MostlyFalse,
        Rating::Outdated,
        Rating::Miscaptioned,
        Rating::Misattributed,
        Rating::Unproven,
        Rating::Mixture,
        Rating::Legend,
        Rating::Scam,
        Rating::CorrectAttribution,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Rating::True => "true",
            Rating::False => "false",
            Rating::MostlyTrue => "mostly-true",
            Rating::MostlyFalse => "mostly-false",
            Rating::Outdated => "outdated",
            Rating::Miscaptioned => "miscaptioned",
            Rating::Misattributed => "misattributed",
            Rating::Unproven => "unproven",
            Rating::Mixture => "mixture",
            Rating::Legend => "legend",
            Rating::Scam => "scam",
            Rating::CorrectAttribution => "correct-attribution",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Rating::True => "True",
            Rating::False => "False",
            Rating::MostlyTrue => "Mostly True",
            Rating::MostlyFalse => "Mostly False",
            Rating::Outdated => "Outdated",
            Rating::Miscaptioned => "Miscaptioned",
            Rating::Misattributed => "Misattributed",
            Rating::Unproven => "Unproven",
            Rating::Mixture => "Mixture",
            Rating::Legend => "Legend",
            Rating::Scam => "Scam",
            Rating::CorrectAttribution => "Correct Attribution",
        }
    }

    pub fn cluster(self) -> RatingCluster {
        cluster_of(self)
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accepts slugs and display labels in any case; spaces act as hyphens.
impl FromStr for Rating {
    type Err = RatingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let slug = s.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join("-");
        parse_rating(&slug)
    }
}

impl Serialize for Rating {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_rating(slug: &str) -> Result<Rating, RatingError> {
    Ok(match slug {
        "true" => Rating::True,
        "false" => Rating::False,
        "mostly-true" => Rating::MostlyTrue,
        "mostly-false" => Rating::MostlyFalse,
        "outdated" => Rating::Outdated,
        "miscaptioned" | "mis-captioned" => Rating::Miscaptioned,
        "misattributed" | "mis-attributed" => Rating::Misattributed,
        "unproven" => Rating::Unproven,
        "mixture" => Rating::Mixture,
        "legend" => Rating::Legend,
        "scam" => Rating::Scam,
        "correct-attribution" => Rating::CorrectAttribution,
        other => return Err(RatingError::Unknown(other.to_owned())),
    })
}

pub fn cluster_of(r: Rating) -> RatingCluster {
    match r {
        Rating::False | Rating::MostlyFalse | Rating::Misattributed | Rating::Miscaptioned | Rating::Scam => {
            RatingCluster::FalseLike
        }
        Rating::True | Rating::MostlyTrue | Rating::CorrectAttribution => RatingCluster::TrueLike,
        Rating::Outdated | Rating::Unproven | Rating::Mixture | Rating::Legend => RatingCluster::Other,
    }
}

impl RatingCluster {
    pub const ALL: [RatingCluster; 3] = [RatingCluster::FalseLike, RatingCluster::TrueLike, RatingCluster::Other];

    pub fn label(self) -> &'static str {
        match self {
            RatingCluster::FalseLike => "FalseLike",
            RatingCluster::TrueLike => "TrueLike",
            RatingCluster::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verification {
    EventGrounded,
    DerivedFrom(String),
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSource {
    pub name: String,
    pub verification: Verification,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Credibility {
    pub credible: bool,
    /// Sources visited, starting with the queried one.
    pub chain: Vec<String>,
    /// Set when the chain revisits a source.
    pub cycle: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("source {from:?} derives from unknown source {missing:?}")]
    Dangling { from: String, missing: String },
    #[error("source {name:?}: {message}")]
    Invalid { name: String, message: String },
    #[error("registry format: {0}")]
    Format(String),
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceRegistry {
    sources: BTreeMap<String, FactSource>,
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    source: Vec<SourceEntry>,
}

#[derive(Deserialize)]
struct SourceEntry {
    name: String,
    verification: String,
    #[serde(default)]
    derived_from: Option<String>,
    #[serde(default)]
    reason: String,
}

const DEFAULT_REGISTRY: &str = include_str!("../data/sources.toml");

impl SourceRegistry {
    pub fn new(sources: impl IntoIterator<Item = FactSource>) -> Self {
        Self {
            sources: sources.into_iter().map(|s| (s.name.clone(), s)).collect(),
        }
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_REGISTRY).expect("shipped registry is valid")
    }

    /// Parses a TOML document of `[[source]]` tables with keys `name`,
    /// `verification` (`event-grounded`, `derived-from`, `unverified`),
    /// `derived_from` and `reason`.
    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| RegistryError::Format(e.to_string()))?;
        let mut sources = Vec::new();
        for e in file.source {
            let verification = match (e.verification.as_str(), e.derived_from) {
                ("event-grounded", None) => Verification::EventGrounded,
                ("unverified", None) => Verification::Unverified,
                ("derived-from", Some(parent)) => Verification::DerivedFrom(parent),
                (kind, parent) => {
                    return Err(RegistryError::Invalid {
                        name: e.name,
                        message: format!("verification {kind:?} with derived_from {parent:?}"),
                    })
                }
            };
            sources.push(FactSource {
                name: e.name,
                verification,
                reason: e.reason,
            });
        }
        Ok(Self::new(sources))
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Option<&FactSource> {
        self.sources.get(name)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Walks `DerivedFrom` links until an event-grounded or unverified source.
pub fn source_credible(s: &FactSource, registry: &SourceRegistry) -> Result<Credibility, RegistryError> {
    let mut seen = HashSet::new();
    let mut chain = Vec::new();
    let mut current = s;
    loop {
        if !seen.insert(current.name.as_str()) {
            return Ok(Credibility {
                credible: false,
                cycle: Some(chain.clone()),
                chain,
            });
        }
        chain.push(current.name.clone());
        match &current.verification {
            Verification::EventGrounded => {
                return Ok(Credibility {
                    credible: true,
                    chain,
                    cycle: None,
                })
            }
            Verification::Unverified => {
                return Ok(Credibility {
                    credible: false,
                    chain,
                    cycle: None,
                })
            }
            Verification::DerivedFrom(parent) => {
                current = registry.get(parent).ok_or_else(|| RegistryError::Dangling {
                    from: current.name.clone(),
                    missing: parent.clone(),
                })?;
            }
        }
    }
}

/// Ground truth for fixture claims: did the described event happen?
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOracle {
    pub facts: BTreeMap<String, bool>,
}

impl EventOracle {
    pub fn new(facts: impl IntoIterator<Item = (String, bool)>) -> Self {
        Self {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn event(&self, claim_id: &str) -> Option<bool> {
        self.facts.get(claim_id).copied()
    }

    pub fn is_total_over<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> bool {
        ids.into_iter().all(|id| self.facts.contains_key(id))
    }

    /// Whether a rating agrees with the recorded event. Ratings in the
    /// `Other` cluster make no binary assertion and yield `None`.
    pub fn agrees(&self, claim_id: &str, rating: Rating) -> Option<bool> {
        let happened = self.event(claim_id)?;
        match cluster_of(rating) {
            RatingCluster::TrueLike => Some(happened),
            RatingCluster::FalseLike => Some(!happened),
            RatingCluster::Other => None,
        }
    }
}
