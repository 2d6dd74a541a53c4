//! Dataset rows: assembly from stage outputs and CSV persistence.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::page_parse::ParsedRecord;
use crate::ratings::Rating;
use crate::sentiment::ScoredRecord;

pub const CSV_HEADER: [&str; 6] = ["claim", "rating", "sentiment", "origin", "source_url", "record_id"];

/// Decimal places written for sentiment values.
pub const SENTIMENT_DECIMALS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub claim: String,
    pub rating: Rating,
    pub sentiment: f64,
    pub origin: String,
    pub source_url: String,
    pub record_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Assembly {
    pub rows: Vec<DatasetRow>,
    pub dropped_unrated: usize,
    pub dropped_unknown_rating: usize,
    pub dropped_duplicates: usize,
    /// Rating labels outside the taxonomy, one per dropped record.
    pub unknown_labels: Vec<String>,
}

impl Assembly {
    pub fn dropped(&self) -> usize {
        self.dropped_unrated + self.dropped_unknown_rating + self.dropped_duplicates
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("inputs misaligned at index {index}: {message}")]
    Alignment { index: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// Joins index-aligned parse outcomes, scores and ratings into rows.
///
/// `ratings[i]` is `None` when record `i` had no page or its label is not in
/// the taxonomy. Rows with the same claim text and source URL collapse to the
/// first occurrence.
pub fn assemble(
    parsed: &[ParsedRecord],
    scores: &[ScoredRecord],
    ratings: &[Option<Rating>],
) -> Result<Assembly, DatasetError> {
    let n = parsed.len();
    if scores.len() != n || ratings.len() != n {
        return Err(DatasetError::Alignment {
            index: n.min(scores.len()).min(ratings.len()),
            message: format!(
                "lengths differ: parsed {n}, scores {}, ratings {}",
                scores.len(),
                ratings.len()
            ),
        });
    }
    let mut out = Assembly::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (index, ((p, s), r)) in parsed.iter().zip(scores).zip(ratings).enumerate() {
        if p.record_id != s.record_id {
            return Err(DatasetError::Alignment {
                index,
                message: format!("record id {} vs scored id {}", p.record_id, s.record_id),
            });
        }
        let Some(page) = &p.page else {
            out.dropped_unrated += 1;
            continue;
        };
        let Some(rating) = r else {
            out.dropped_unknown_rating += 1;
            out.unknown_labels.push(page.rating_label.clone());
            continue;
        };
        let Some(score) = s.score else {
            return Err(DatasetError::Alignment {
                index,
                message: format!("record {} is rated but has no sentiment", p.record_id),
            });
        };
        if !seen.insert((page.claim_text.clone(), page.source_url.clone())) {
            out.dropped_duplicates += 1;
            continue;
        }
        out.rows.push(DatasetRow {
            claim: page.claim_text.clone(),
            rating: *rating,
            sentiment: score.value,
            origin: page.origin_text.clone(),
            source_url: page.source_url.clone(),
            record_id: p.record_id,
        });
    }
    Ok(out)
}

/// Fixed-point with [`SENTIMENT_DECIMALS`] places, trailing zeros trimmed.
pub fn format_sentiment(v: f64) -> String {
    let s = format!("{v:.SENTIMENT_DECIMALS$}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_owned(),
        other => other.to_owned(),
    }
}

pub fn write_csv(rows: &[DatasetRow], path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write_csv_to(rows, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_csv_to<W: Write>(rows: &[DatasetRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.claim.as_str(),
            r.rating.label(),
            &format_sentiment(r.sentiment),
            &r.origin,
            &r.source_url,
            &r.record_id.to_string(),
        ])?;
    }
    w.flush()
}

pub fn read_csv(path: &Path) -> Result<Vec<DatasetRow>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file, path)
}

pub fn read_csv_from<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<DatasetRow>, DatasetError> {
    let parse_err = |line: u64, message: String| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = rdr.records();
    match records.next() {
        None => return Err(parse_err(1, "missing header".into())),
        Some(Err(e)) => return Err(parse_err(csv_line(&e), e.to_string())),
        Some(Ok(h)) if h.iter().ne(CSV_HEADER) => {
            return Err(parse_err(1, format!("unexpected header {:?}", h.iter().collect::<Vec<_>>())))
        }
        Some(Ok(_)) => {}
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(csv_line(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != CSV_HEADER.len() {
            return Err(parse_err(line, format!("expected 6 fields, found {}", rec.len())));
        }
        let rating: Rating = rec[1].parse().map_err(|e| parse_err(line, format!("{e}")))?;
        let sentiment: f64 = rec[2]
            .parse()
            .map_err(|e| parse_err(line, format!("sentiment {:?}: {e}", &rec[2])))?;
        if !(-1.0..=1.0).contains(&sentiment) {
            return Err(parse_err(line, format!("sentiment {sentiment} outside [-1, 1]")));
        }
        let record_id: u64 = rec[5]
            .parse()
            .map_err(|e| parse_err(line, format!("record_id {:?}: {e}", &rec[5])))?;
        rows.push(DatasetRow {
            claim: rec[0].to_owned(),
            rating,
            sentiment,
            origin: rec[3].to_owned(),
            source_url: rec[4].to_owned(),
            record_id,
        });
    }
    Ok(rows)
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map(|p| p.line()).unwrap_or(0)
}
