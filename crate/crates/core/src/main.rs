use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use claimset::config::PipelineConfig;
use claimset::crawler::Crawler;
use claimset::dataset;
use claimset::fixture::{FixtureServer, FixtureSite};
use claimset::ingest::FeedRecord;
use claimset::page_parse::{PageSelectors, ParsedRecord};
use claimset::pipeline::{self as pl, CrawlEntry, Stage, StageError};
use claimset::sentiment::{Lexicon, ScoredRecord};
use claimset::extract::ExtractedUrl;

#[derive(Parser)]
#[command(name = "claimset", version, about = "Build and analyze a fact-checked claim dataset")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for stage artifacts.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CrawlArgs {
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Serve from the cache only; a miss is an error.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    rate_ms: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    /// Send requests to a local fixture server instead of the origin hosts.
    #[arg(long)]
    replay_server: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and deduplicate feed pages.
    Ingest {
        #[arg(long)]
        pages: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract URLs from records and resolve shortened links.
    Extract {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_resolve: bool,
        #[arg(long)]
        max_hops: Option<u32>,
        #[command(flatten)]
        crawl: CrawlArgs,
    },
    /// Fetch fact-check pages through the cache.
    Crawl {
        #[arg(long)]
        urls: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        crawl: CrawlArgs,
    },
    /// Extract claim, rating and origin from fetched pages.
    Parse {
        #[arg(long)]
        crawl: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        warnings: Option<PathBuf>,
    },
    /// Score claim sentiment.
    Score {
        #[arg(long)]
        parsed: Option<PathBuf>,
        /// Lexicon file; the built-in lexicon when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join parsed pages and scores into the dataset.
    Assemble {
        #[arg(long)]
        parsed: Option<PathBuf>,
        #[arg(long)]
        scored: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Contingency, tail and violin statistics.
    Analyze {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        violin: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run every stage in order.
    Run {
        #[arg(long)]
        pages: Option<String>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        no_resolve: bool,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[command(flatten)]
        crawl: CrawlArgs,
    },
    /// Serve a fixture site directory over HTTP until interrupted.
    ServeFixtures {
        #[arg(long)]
        site: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8808")]
        addr: String,
    },
}

fn init_logging(verbose: bool) {
    let mut b = env_logger::Builder::new();
    b.filter_level(if verbose { log::LevelFilter::Debug } else { log::LevelFilter::Info })
        .filter_module("ureq", log::LevelFilter::Warn)
        .filter_module("ureq_proto", log::LevelFilter::Warn)
        .filter_module("rustls", log::LevelFilter::Warn)
        .parse_env("CLAIMSET_LOG")
        .format(|buf, r| {
            writeln!(
                buf,
                "level={} stage={} msg={:?}",
                r.level().as_str().to_ascii_lowercase(),
                r.target(),
                r.args().to_string()
            )
        })
        .target(env_logger::Target::Stderr)
        .init();
}

enum Failure {
    Config(String),
    Stage(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Config(msg)) => {
            log::error!(target: "config", "{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            log::error!(target: e.stage.name(), "{}", e.message);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut c = PipelineConfig::from_sources(cli.config.as_deref(), std::env::vars())
        .map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(d) = &cli.output_dir {
        c.output_dir = d.clone();
    }
    Ok(c)
}

fn apply_crawl(c: &mut PipelineConfig, a: &CrawlArgs) {
    if let Some(v) = &a.cache {
        c.cache_dir = v.clone();
    }
    if a.offline {
        c.offline = true;
    }
    if let Some(v) = a.rate_ms {
        c.rate_ms = v;
    }
    if let Some(v) = a.parallel {
        c.parallel = v;
    }
    if let Some(v) = &a.replay_server {
        c.replay_server = Some(v.clone());
    }
}

fn checked(c: PipelineConfig) -> Result<PipelineConfig, Failure> {
    c.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(c)
}

fn or_default(p: &Option<PathBuf>, c: &PipelineConfig, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| c.output_dir.join(name))
}

fn emit<T: Serialize>(value: &T) {
    if let Ok(s) = serde_json::to_string_pretty(value) {
        println!("{s}");
    }
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    let mut c = load_config(&cli)?;
    match &cli.command {
        Command::Ingest { pages, out } => {
            if let Some(p) = pages {
                c.pages_glob = p.clone();
            }
            let out = or_default(out, &c, pl::RECORDS_JSON);
            let ingested = pl::stage_ingest(&c.pages_glob)?;
            pl::write_json(Stage::Ingest, &out, &ingested.records)?;
            emit(&json!({
                "pages_read": ingested.pages,
                "records_loaded": ingested.records_loaded,
                "duplicate_records": ingested.duplicates(),
                "records_written": ingested.records.len(),
            }));
        }
        Command::Extract { records, out, no_resolve, max_hops, crawl } => {
            apply_crawl(&mut c, crawl);
            if let Some(h) = max_hops {
                c.max_hops = *h;
            }
            let c = checked(c)?;
            let records: Vec<FeedRecord> = pl::read_json(Stage::Extract, &or_default(records, &c, pl::RECORDS_JSON))?;
            let crawler = Crawler::new(c.crawl_policy());
            let resolve = c.resolve && !no_resolve;
            let urls = pl::stage_extract(&records, resolve.then_some(&crawler), c.max_hops);
            pl::write_json(Stage::Extract, &or_default(out, &c, pl::URLS_JSON), &urls)?;
            emit(&json!({
                "urls_found": urls.len(),
                "urls_crawlable": urls.iter().filter(|u| u.scheme.is_crawlable()).count(),
                "urls_resolved": urls.iter().filter(|u| u.resolved.is_some()).count(),
            }));
        }
        Command::Crawl { urls, out, crawl } => {
            apply_crawl(&mut c, crawl);
            let c = checked(c)?;
            let urls: Vec<ExtractedUrl> = pl::read_json(Stage::Crawl, &or_default(urls, &c, pl::URLS_JSON))?;
            let crawler = Crawler::new(c.crawl_policy());
            let entries = pl::stage_crawl(&urls, &crawler)?;
            pl::write_json(Stage::Crawl, &or_default(out, &c, pl::CRAWL_JSON), &entries)?;
            emit(&json!({
                "entries": entries.len(),
                "errors": entries.iter().filter(|e| e.result.is_none()).count(),
                "network_requests": crawler.network_requests(),
            }));
        }
        Command::Parse { crawl, out, warnings } => {
            let entries: Vec<CrawlEntry> = pl::read_json(Stage::Parse, &or_default(crawl, &c, pl::CRAWL_JSON))?;
            let parsed = pl::stage_parse(&entries, &PageSelectors::default());
            pl::write_json(Stage::Parse, &or_default(out, &c, pl::PARSED_JSON), &parsed.records)?;
            if let Some(w) = warnings {
                write_file(Stage::Parse, w, &pl::lines(&parsed.warnings))?;
            }
            emit(&json!({
                "records": parsed.records.len(),
                "rated": parsed.records.iter().filter(|r| r.page.is_some()).count(),
                "warnings": parsed.warnings.len(),
            }));
        }
        Command::Score { parsed, lexicon, out } => {
            let parsed: Vec<ParsedRecord> = pl::read_json(Stage::Score, &or_default(parsed, &c, pl::PARSED_JSON))?;
            let lex = match lexicon.as_ref().or(c.lexicon_path.as_ref()) {
                Some(p) => Lexicon::from_path(p).map_err(|e| StageError::new(Stage::Score, e))?,
                None => Lexicon::default_english().clone(),
            };
            let scored = pl::stage_score(&parsed, &lex);
            pl::write_json(Stage::Score, &or_default(out, &c, pl::SCORED_JSON), &scored)?;
            emit(&json!({ "scored": scored.iter().filter(|s| s.score.is_some()).count() }));
        }
        Command::Assemble { parsed, scored, out, json } => {
            let parsed: Vec<ParsedRecord> = pl::read_json(Stage::Assemble, &or_default(parsed, &c, pl::PARSED_JSON))?;
            let scored: Vec<ScoredRecord> = pl::read_json(Stage::Assemble, &or_default(scored, &c, pl::SCORED_JSON))?;
            let assembly = pl::stage_assemble(&parsed, &scored)?;
            let json = json.clone().or_else(|| out.is_none().then(|| c.output_dir.join(pl::DATASET_JSON)));
            pl::write_dataset(&assembly.rows, &or_default(out, &c, pl::DATASET_CSV), json.as_deref())?;
            emit(&json!({
                "rows_emitted": assembly.rows.len(),
                "rows_dropped": assembly.dropped(),
                "dropped_unrated": assembly.dropped_unrated,
                "dropped_unknown_rating": assembly.dropped_unknown_rating,
                "dropped_duplicates": assembly.dropped_duplicates,
            }));
        }
        Command::Analyze { dataset, out, violin, svg, lo, hi, grid } => {
            c.lo = lo.unwrap_or(c.lo);
            c.hi = hi.unwrap_or(c.hi);
            c.grid = grid.unwrap_or(c.grid);
            let c = checked(c)?;
            let path = or_default(dataset, &c, pl::DATASET_CSV);
            let rows = dataset::read_csv(&path).map_err(|e| StageError::new(Stage::Analyze, e))?;
            let result = pl::stage_analyze(&rows, c.lo, c.hi, c.grid)?;
            let defaults = out.is_none();
            let violin = violin.clone().or_else(|| defaults.then(|| c.output_dir.join(pl::VIOLIN_JSON)));
            let svg = svg.clone().or_else(|| defaults.then(|| c.output_dir.join(pl::PLOT_SVG)));
            pl::write_analysis(&result, &or_default(out, &c, pl::STATS_JSON), violin.as_deref(), svg.as_deref())?;
            emit(&result.stats.contingency);
        }
        Command::Run { pages, lexicon, no_resolve, lo, hi, crawl } => {
            apply_crawl(&mut c, crawl);
            if let Some(p) = pages {
                c.pages_glob = p.clone();
            }
            if let Some(l) = lexicon {
                c.lexicon_path = Some(l.clone());
            }
            if *no_resolve {
                c.resolve = false;
            }
            c.lo = lo.unwrap_or(c.lo);
            c.hi = hi.unwrap_or(c.hi);
            let c = checked(c)?;
            let report = pl::run(&c);
            emit(&report);
            return Ok(report.exit_code);
        }
        Command::ServeFixtures { site, addr } => {
            let site = FixtureSite::load(site).map_err(|e| Failure::Config(format!("{}: {e}", site.display())))?;
            let server = FixtureServer::bind(addr, site).map_err(|e| Failure::Config(format!("{addr}: {e}")))?;
            log::info!(target: "fixtures", "serving on {}", server.base_url());
            println!("{}", server.base_url());
            server.wait();
        }
    }
    Ok(0)
}

fn write_file(stage: Stage, path: &Path, text: &str) -> Result<(), StageError> {
    std::fs::write(path, text).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}
