//! Stage functions and the end-to-end `run`.
//!
//! Each stage reads the previous stage's artifact and writes its own into the
//! output directory, so any stage can be rerun from files alone.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, GroupBy, StatsReport, ViolinStats};
use crate::config::PipelineConfig;
use crate::crawler::{CrawlResult, Crawler};
use crate::dataset::{self, Assembly, DatasetRow};
use crate::extract::{self, ExtractedUrl};
use crate::ingest::{self, FeedRecord};
use crate::page_parse::{self, PageSelectors, ParsedRecord};
use crate::ratings::parse_rating;
use crate::sentiment::{self, Lexicon, ScoredRecord};

pub const RECORDS_JSON: &str = "records.json";
pub const URLS_JSON: &str = "urls.json";
pub const CRAWL_JSON: &str = "crawl.json";
pub const PARSED_JSON: &str = "parsed.json";
pub const WARNINGS_LOG: &str = "warnings.log";
pub const SCORED_JSON: &str = "scored.json";
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_JSON: &str = "dataset.json";
pub const STATS_JSON: &str = "stats.json";
pub const VIOLIN_JSON: &str = "violin.json";
pub const PLOT_SVG: &str = "plot.svg";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Extract,
    Crawl,
    Parse,
    Score,
    Assemble,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Extract,
        Stage::Crawl,
        Stage::Parse,
        Stage::Score,
        Stage::Assemble,
        Stage::Analyze,
    ];

    /// 1-based position in the pipeline.
    pub fn number(self) -> i32 {
        self as i32 + 1
    }

    pub fn exit_code(self) -> i32 {
        3 + self.number()
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Crawl => "crawl",
            Stage::Parse => "parse",
            Stage::Score => "score",
            Stage::Assemble => "assemble",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

/// Reads a JSON artifact written by an earlier stage.
pub fn read_json<T: DeserializeOwned>(stage: Stage, path: &Path) -> Result<T, StageError> {
    let bytes = fs::read(path).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(stage: Stage, path: &Path, value: &T) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| StageError::new(stage, e))?;
    text.push('\n');
    write_text(stage, path, &text)
}

fn write_text(stage: Stage, path: &Path, text: &str) -> Result<(), StageError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| StageError::new(stage, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestOutput {
    pub pages: usize,
    pub records_loaded: usize,
    pub records: Vec<FeedRecord>,
}

impl IngestOutput {
    pub fn duplicates(&self) -> usize {
        self.records_loaded - self.records.len()
    }
}

/// Page files matching `pattern`, sorted by path.
pub fn page_paths(pattern: &str) -> Result<Vec<PathBuf>, StageError> {
    let entries = glob::glob(pattern).map_err(|e| StageError::new(Stage::Ingest, format!("{pattern}: {e}")))?;
    let mut paths = entries
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| StageError::new(Stage::Ingest, e))?;
    paths.sort();
    Ok(paths)
}

pub fn stage_ingest(pattern: &str) -> Result<IngestOutput, StageError> {
    let paths = page_paths(pattern)?;
    let pages = ingest::load_pages(&paths).map_err(|e| StageError::new(Stage::Ingest, e))?;
    let all: Vec<FeedRecord> = pages.into_iter().flat_map(|p| p.records).collect();
    let records_loaded = all.len();
    let records = ingest::dedup(all);
    info!(target: "ingest", "{} pages, {records_loaded} records, {} after dedup", paths.len(), records.len());
    Ok(IngestOutput {
        pages: paths.len(),
        records_loaded,
        records,
    })
}

/// Extracts URLs from every record. With a crawler, crawlable URLs are
/// resolved through it; resolution failures are recorded per URL.
pub fn stage_extract(records: &[FeedRecord], crawler: Option<&Crawler>, max_hops: u32) -> Vec<ExtractedUrl> {
    let mut urls: Vec<ExtractedUrl> = records
        .iter()
        .flat_map(|r| extract::extract_urls(&r.text, r.id))
        .collect();
    if let Some(crawler) = crawler {
        let targets: Vec<String> = urls
            .iter()
            .filter(|u| u.scheme.is_crawlable())
            .map(|u| u.raw.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let outcomes = bounded_map(&targets, crawler.policy().max_parallel, |url| {
            extract::resolve_redirects(crawler, url, max_hops).map_err(|e| e.to_string())
        });
        let by_url: HashMap<&str, &Result<String, String>> =
            targets.iter().map(String::as_str).zip(&outcomes).collect();
        for u in urls.iter_mut().filter(|u| u.scheme.is_crawlable()) {
            match by_url[u.raw.as_str()] {
                Ok(resolved) => u.resolved = Some(resolved.clone()),
                Err(e) => {
                    warn!(target: "extract", "{}: {e}", u.raw);
                    u.resolve_error = Some(e.clone());
                }
            }
        }
    }
    info!(target: "extract", "{} URLs from {} records", urls.len(), records.len());
    urls
}

fn bounded_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..workers.max(1).min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("slot filled"))
        .collect()
}

/// One fetch outcome per crawlable extracted URL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlEntry {
    pub record_id: u64,
    pub url: String,
    /// The URL actually fetched: the resolved URL when known, else `url`.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<CrawlResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
}

/// Fetches every crawlable URL once. In offline mode a cache miss is fatal.
pub fn stage_crawl(urls: &[ExtractedUrl], crawler: &Crawler) -> Result<Vec<CrawlEntry>, StageError> {
    let wanted: Vec<&ExtractedUrl> = urls.iter().filter(|u| u.scheme.is_crawlable()).collect();
    let target_of = |u: &ExtractedUrl| u.resolved.clone().unwrap_or_else(|| u.raw.clone());
    let targets: Vec<String> = wanted
        .iter()
        .map(|u| target_of(u))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let results = crawler.fetch_all(&targets);
    if crawler.policy().offline_only {
        if let Some(e) = results.iter().filter_map(|r| r.as_ref().err()).find(|e| e.is_cache_miss()) {
            return Err(StageError::new(Stage::Crawl, e));
        }
    }
    let by_target: HashMap<&str, _> = targets.iter().map(String::as_str).zip(&results).collect();
    let entries: Vec<CrawlEntry> = wanted
        .iter()
        .map(|u| {
            let target = target_of(u);
            let (result, error, error_kind) = match by_target[target.as_str()] {
                Ok(r) => (Some(r.clone()), None, None),
                Err(e) => {
                    warn!(target: "crawl", "{e}");
                    (None, Some(e.to_string()), Some(e.kind().to_owned()))
                }
            };
            CrawlEntry {
                record_id: u.source_record_id,
                url: u.raw.clone(),
                target,
                result,
                error,
                error_kind,
            }
        })
        .collect();
    info!(
        target: "crawl",
        "{} distinct targets, {} failed, {} network requests",
        targets.len(),
        results.iter().filter(|r| r.is_err()).count(),
        crawler.network_requests()
    );
    Ok(entries)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutput {
    pub records: Vec<ParsedRecord>,
    pub warnings: Vec<String>,
}

/// One [`ParsedRecord`] per record id in `entries` (first-appearance order).
/// The first page that parses wins.
pub fn stage_parse(entries: &[CrawlEntry], selectors: &PageSelectors) -> ParseOutput {
    let mut order: Vec<u64> = Vec::new();
    let mut grouped: HashMap<u64, Vec<&CrawlEntry>> = HashMap::new();
    for e in entries {
        grouped
            .entry(e.record_id)
            .or_insert_with(|| {
                order.push(e.record_id);
                Vec::new()
            })
            .push(e);
    }
    let outcomes: Vec<(ParsedRecord, Vec<String>)> = order
        .par_iter()
        .map(|id| parse_record(*id, &grouped[id], selectors))
        .collect();
    let mut out = ParseOutput::default();
    for (rec, warnings) in outcomes {
        out.records.push(rec);
        out.warnings.extend(warnings);
    }
    info!(
        target: "parse",
        "{} records, {} with a rated page",
        out.records.len(),
        out.records.iter().filter(|r| r.page.is_some()).count()
    );
    out
}

fn parse_record(record_id: u64, entries: &[&CrawlEntry], selectors: &PageSelectors) -> (ParsedRecord, Vec<String>) {
    let mut warnings = Vec::new();
    let mut last_error = None;
    for e in entries {
        let Some(result) = &e.result else {
            last_error = e.error.clone();
            continue;
        };
        match page_parse::parse_page_with(&result.body, &result.final_url, selectors) {
            Ok(page) => {
                warnings.extend(page.warnings.iter().map(|w| format!("{record_id}\t{}\t{w}", result.final_url)));
                return (
                    ParsedRecord {
                        record_id,
                        page: Some(page),
                        error: None,
                    },
                    warnings,
                );
            }
            Err(err) => {
                warnings.push(format!("{record_id}\t{}\t{err}", result.final_url));
                last_error = Some(err.to_string());
            }
        }
    }
    (
        ParsedRecord {
            record_id,
            page: None,
            error: Some(last_error.unwrap_or_else(|| "no page fetched".into())),
        },
        warnings,
    )
}

/// Scores the claim text of every rated record.
pub fn stage_score(parsed: &[ParsedRecord], lexicon: &Lexicon) -> Vec<ScoredRecord> {
    parsed
        .par_iter()
        .map(|p| ScoredRecord {
            record_id: p.record_id,
            score: p.page.as_ref().map(|page| sentiment::score(&page.claim_text, lexicon)),
        })
        .collect()
}

pub fn stage_assemble(parsed: &[ParsedRecord], scored: &[ScoredRecord]) -> Result<Assembly, StageError> {
    let ratings: Vec<_> = parsed
        .iter()
        .map(|p| p.page.as_ref().and_then(|page| parse_rating(&page.rating_label).ok()))
        .collect();
    let assembly = dataset::assemble(parsed, scored, &ratings).map_err(|e| StageError::new(Stage::Assemble, e))?;
    for label in &assembly.unknown_labels {
        warn!(target: "assemble", "rating {label:?} is outside the taxonomy; row dropped");
    }
    info!(
        target: "assemble",
        "{} rows, {} dropped ({} unrated, {} unknown rating, {} duplicate)",
        assembly.rows.len(),
        assembly.dropped(),
        assembly.dropped_unrated,
        assembly.dropped_unknown_rating,
        assembly.dropped_duplicates
    );
    Ok(assembly)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinReport {
    pub by_rating: Vec<ViolinStats>,
    pub by_cluster: Vec<ViolinStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub stats: StatsReport,
    pub violin: ViolinReport,
    pub svg: String,
}

pub fn stage_analyze(rows: &[DatasetRow], lo: f64, hi: f64, grid: usize) -> Result<AnalysisOutput, StageError> {
    let err = |e| StageError::new(Stage::Analyze, e);
    let stats = analysis::stats_report(rows, lo, hi).map_err(err)?;
    let violin = ViolinReport {
        by_rating: analysis::violin(rows, GroupBy::Rating, grid).map_err(err)?,
        by_cluster: analysis::violin(rows, GroupBy::Cluster, grid).map_err(err)?,
    };
    let svg = analysis::render_svg(&violin.by_rating, "Sentiment by rating");
    info!(
        target: "analyze",
        "{} rows: {:.2}% of false-like and {:.2}% of true-like claims negative",
        rows.len(),
        stats.contingency.pct_false_neg,
        stats.contingency.pct_true_neg
    );
    Ok(AnalysisOutput { stats, violin, svg })
}

pub fn write_analysis(out: &AnalysisOutput, stats: &Path, violin: Option<&Path>, svg: Option<&Path>) -> Result<(), StageError> {
    write_json(Stage::Analyze, stats, &out.stats)?;
    if let Some(p) = violin {
        write_json(Stage::Analyze, p, &out.violin)?;
    }
    if let Some(p) = svg {
        write_text(Stage::Analyze, p, &out.svg)?;
    }
    Ok(())
}

pub fn write_dataset(rows: &[DatasetRow], csv: &Path, json: Option<&Path>) -> Result<(), StageError> {
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| StageError::new(Stage::Assemble, format!("{}: {e}", dir.display())))?;
    }
    dataset::write_csv(rows, csv).map_err(|e| StageError::new(Stage::Assemble, e))?;
    if let Some(p) = json {
        write_json(Stage::Assemble, p, rows)?;
    }
    Ok(())
}

/// Per-stage counts of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub pages_read: usize,
    pub records_loaded: usize,
    pub duplicate_records: usize,
    pub urls_found: usize,
    pub urls_crawlable: usize,
    pub urls_resolved: usize,
    pub pages_fetched: usize,
    pub pages_cached: usize,
    pub fetch_errors: usize,
    pub network_requests: u64,
    pub pages_parsed: usize,
    pub pages_unrated: usize,
    pub rows_emitted: usize,
    pub rows_dropped: usize,
    pub dropped_unrated: usize,
    pub dropped_unknown_rating: usize,
    pub dropped_duplicates: usize,
    pub completed_stages: Vec<Stage>,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub exit_code: i32,
}

impl PipelineReport {
    pub fn succeeded(&self) -> bool {
        self.failed_stage.is_none()
    }
}

/// Runs every stage in order, writing artifacts and `report.json` into the
/// configured output directory. A stage failure stops the run and is
/// reflected in the report's exit code; earlier artifacts stay in place.
pub fn run(config: &PipelineConfig) -> PipelineReport {
    let mut report = PipelineReport::default();
    if let Err(e) = run_stages(config, &mut report) {
        log::error!(target: e.stage.name(), "{}", e.message);
        report.exit_code = e.exit_code();
        report.failed_stage = Some(e.stage);
        report.error = Some(e.message);
    }
    let report_path = config.output_dir.join(REPORT_JSON);
    if let Err(e) = write_json(Stage::Analyze, &report_path, &report) {
        warn!(target: "run", "{e}");
    }
    report
}

fn run_stages(config: &PipelineConfig, report: &mut PipelineReport) -> Result<(), StageError> {
    let out = |name: &str| config.output_dir.join(name);
    let crawler = Crawler::new(config.crawl_policy());

    let ingested = stage_ingest(&config.pages_glob)?;
    write_json(Stage::Ingest, &out(RECORDS_JSON), &ingested.records)?;
    report.pages_read = ingested.pages;
    report.records_loaded = ingested.records_loaded;
    report.duplicate_records = ingested.duplicates();
    report.completed_stages.push(Stage::Ingest);

    let urls = stage_extract(&ingested.records, config.resolve.then_some(&crawler), config.max_hops);
    write_json(Stage::Extract, &out(URLS_JSON), &urls)?;
    report.urls_found = urls.len();
    report.urls_crawlable = urls.iter().filter(|u| u.scheme.is_crawlable()).count();
    report.urls_resolved = urls.iter().filter(|u| u.resolved.is_some()).count();
    report.completed_stages.push(Stage::Extract);

    let entries = stage_crawl(&urls, &crawler)?;
    write_json(Stage::Crawl, &out(CRAWL_JSON), &entries)?;
    let mut seen = BTreeSet::new();
    for e in entries.iter().filter(|e| seen.insert(e.target.as_str())) {
        match &e.result {
            Some(r) if r.from_cache => report.pages_cached += 1,
            Some(_) => report.pages_fetched += 1,
            None => report.fetch_errors += 1,
        }
    }
    report.network_requests = crawler.network_requests();
    report.completed_stages.push(Stage::Crawl);

    let parsed = stage_parse(&entries, &PageSelectors::default());
    write_json(Stage::Parse, &out(PARSED_JSON), &parsed.records)?;
    write_text(Stage::Parse, &out(WARNINGS_LOG), &lines(&parsed.warnings))?;
    report.pages_parsed = parsed.records.iter().filter(|r| r.page.is_some()).count();
    report.pages_unrated = parsed.records.len() - report.pages_parsed;
    report.completed_stages.push(Stage::Parse);

    let lexicon = config.lexicon().map_err(|e| StageError::new(Stage::Score, e))?;
    let scored = stage_score(&parsed.records, &lexicon);
    write_json(Stage::Score, &out(SCORED_JSON), &scored)?;
    report.completed_stages.push(Stage::Score);

    let assembly = stage_assemble(&parsed.records, &scored)?;
    write_dataset(&assembly.rows, &out(DATASET_CSV), Some(&out(DATASET_JSON)))?;
    report.rows_emitted = assembly.rows.len();
    report.rows_dropped = assembly.dropped();
    report.dropped_unrated = assembly.dropped_unrated;
    report.dropped_unknown_rating = assembly.dropped_unknown_rating;
    report.dropped_duplicates = assembly.dropped_duplicates;
    report.completed_stages.push(Stage::Assemble);

    let rows = dataset::read_csv(&out(DATASET_CSV)).map_err(|e| StageError::new(Stage::Analyze, e))?;
    let analysis = stage_analyze(&rows, config.lo, config.hi, config.grid)?;
    write_analysis(&analysis, &out(STATS_JSON), Some(&out(VIOLIN_JSON)), Some(&out(PLOT_SVG)))?;
    report.completed_stages.push(Stage::Analyze);
    Ok(())
}

pub fn lines(items: &[String]) -> String {
    items.iter().map(|l| format!("{l}\n")).collect()
}
