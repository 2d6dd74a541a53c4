//! Python bindings. Records, rows and reports cross the boundary as plain
//! dicts with the same shape as the pipeline's JSON artifacts.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use claimset::analysis;
use claimset::config::{PipelineConfig, ENV_PREFIX};
use claimset::dataset::{self, DatasetRow};
use claimset::ratings::{self, Rating};
use claimset::{extract, ingest, page_parse, pipeline, sentiment};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize + ?Sized>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

fn rating(label: &str) -> PyResult<Rating> {
    label.parse().map_err(value_error)
}

/// Stopword-filtered alphanumeric tokens of a feed text.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    ingest::tokenize(text)
}

/// URL candidates as dicts with `raw`, `scheme`, `start`, `end` (byte offsets).
#[pyfunction]
#[pyo3(signature = (text, record_id = 0))]
fn extract_urls<'py>(py: Python<'py>, text: &str, record_id: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &extract::extract_urls(text, record_id))
}

#[pyfunction]
fn load_pages<'py>(py: Python<'py>, paths: Vec<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let pages = ingest::load_pages(&paths).map_err(value_error)?;
    to_py(py, &pages)
}

/// Claim, rating and origin of a fact-check page.
#[pyfunction]
fn parse_page<'py>(py: Python<'py>, html: &[u8], url: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &page_parse::parse_page(html, url).map_err(value_error)?)
}

#[pyclass(frozen, module = "claimset")]
struct Lexicon {
    inner: sentiment::Lexicon,
}

#[pymethods]
impl Lexicon {
    /// Built-in English lexicon.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: sentiment::Lexicon::default_english().clone(),
        }
    }

    /// Parse `word<TAB>polarity` lines.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sentiment::Lexicon::parse(text).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_path(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: sentiment::Lexicon::from_path(&path).map_err(value_error)?,
        })
    }

    fn negated(&self) -> Self {
        Self {
            inner: self.inner.negated(),
        }
    }

    fn polarity(&self, word: &str) -> Option<f64> {
        self.inner.polarity(word)
    }

    fn is_negator(&self, word: &str) -> bool {
        self.inner.is_negator(word)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Lexicon({} words)", self.inner.len())
    }
}

/// `(value, polarity)` for a text; polarity is "positive", "neutral" or "negative".
#[pyfunction]
#[pyo3(signature = (text, lexicon = None))]
fn score(text: &str, lexicon: Option<&Lexicon>) -> (f64, String) {
    let lex = match lexicon {
        Some(l) => &l.inner,
        None => sentiment::Lexicon::default_english(),
    };
    let s = sentiment::score(text, lex);
    (s.value, s.polarity.to_string())
}

/// Canonical label for a rating label or slug; raises ValueError if unknown.
#[pyfunction]
fn parse_rating(label: &str) -> PyResult<&'static str> {
    Ok(rating(label)?.label())
}

#[pyfunction]
fn rating_slug(label: &str) -> PyResult<&'static str> {
    Ok(rating(label)?.slug())
}

/// "FalseLike", "TrueLike" or "Other".
#[pyfunction]
fn cluster_of(label: &str) -> PyResult<&'static str> {
    Ok(ratings::cluster_of(rating(label)?).label())
}

#[pyfunction]
fn rating_labels() -> Vec<&'static str> {
    Rating::ALL.iter().map(|r| r.label()).collect()
}

#[pyfunction]
fn format_sentiment(value: f64) -> String {
    dataset::format_sentiment(value)
}

#[pyfunction]
fn read_csv<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &dataset::read_csv(&path).map_err(|e| PyOSError::new_err(e.to_string()))?)
}

#[pyfunction]
fn write_csv(rows: &Bound<'_, PyAny>, path: PathBuf) -> PyResult<()> {
    let rows: Vec<DatasetRow> = from_py(rows)?;
    dataset::write_csv(&rows, &path).map_err(|e| PyOSError::new_err(e.to_string()))
}

#[pyfunction]
fn contingency<'py>(py: Python<'py>, rows: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let rows: Vec<DatasetRow> = from_py(rows)?;
    to_py(py, &analysis::contingency(&rows))
}

/// `(below, above)` rows outside `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (rows, lo = analysis::DEFAULT_LO, hi = analysis::DEFAULT_HI))]
fn tail_extremes<'py>(
    py: Python<'py>,
    rows: &Bound<'py, PyAny>,
    lo: f64,
    hi: f64,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let rows: Vec<DatasetRow> = from_py(rows)?;
    let (below, above) = analysis::tail_extremes(&rows, lo, hi).map_err(value_error)?;
    Ok((to_py(py, &below)?, to_py(py, &above)?))
}

/// Per-group quartiles and density; `by` is "rating" or "cluster".
#[pyfunction]
#[pyo3(signature = (rows, by = "rating", grid = analysis::DEFAULT_GRID))]
fn violin<'py>(py: Python<'py>, rows: &Bound<'py, PyAny>, by: &str, grid: usize) -> PyResult<Bound<'py, PyAny>> {
    let rows: Vec<DatasetRow> = from_py(rows)?;
    let group_by = match by {
        "rating" => analysis::GroupBy::Rating,
        "cluster" => analysis::GroupBy::Cluster,
        other => return Err(value_error(format!("unknown grouping {other:?}"))),
    };
    to_py(py, &analysis::violin(&rows, group_by, grid).map_err(value_error)?)
}

#[pyfunction]
#[pyo3(signature = (rows, lo = analysis::DEFAULT_LO, hi = analysis::DEFAULT_HI))]
fn stats_report<'py>(py: Python<'py>, rows: &Bound<'py, PyAny>, lo: f64, hi: f64) -> PyResult<Bound<'py, PyAny>> {
    let rows: Vec<DatasetRow> = from_py(rows)?;
    to_py(py, &analysis::stats_report(&rows, lo, hi).map_err(value_error)?)
}

/// Run the whole pipeline. Keyword overrides use config key names and are
/// applied on top of the optional TOML file.
#[pyfunction]
#[pyo3(signature = (config = None, **overrides))]
fn run<'py>(
    py: Python<'py>,
    config: Option<PathBuf>,
    overrides: Option<&Bound<'py, pyo3::types::PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut pairs = Vec::new();
    if let Some(d) = overrides {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = match v.extract::<bool>() {
                Ok(b) => b.to_string(),
                Err(_) => v.str()?.to_string(),
            };
            pairs.push((format!("{ENV_PREFIX}{}", key.to_uppercase()), value));
        }
    }
    let cfg = PipelineConfig::from_sources(config.as_deref(), pairs).map_err(value_error)?;
    let report = py.detach(|| pipeline::run(&cfg));
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "claimset")]
fn claimset_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lexicon>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(extract_urls, m)?)?;
    m.add_function(wrap_pyfunction!(load_pages, m)?)?;
    m.add_function(wrap_pyfunction!(parse_page, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(parse_rating, m)?)?;
    m.add_function(wrap_pyfunction!(rating_slug, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_of, m)?)?;
    m.add_function(wrap_pyfunction!(rating_labels, m)?)?;
    m.add_function(wrap_pyfunction!(format_sentiment, m)?)?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    m.add_function(wrap_pyfunction!(write_csv, m)?)?;
    m.add_function(wrap_pyfunction!(contingency, m)?)?;
    m.add_function(wrap_pyfunction!(tail_extremes, m)?)?;
    m.add_function(wrap_pyfunction!(violin, m)?)?;
    m.add_function(wrap_pyfunction!(stats_report, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
