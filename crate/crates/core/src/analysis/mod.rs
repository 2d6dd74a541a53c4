//! Sentiment-versus-credibility statistics and violin summaries.

pub mod density;
mod plot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetRow;
use crate::ratings::{cluster_of, Rating, RatingCluster};

pub use plot::render_svg;

pub const DEFAULT_LO: f64 = -0.6;
pub const DEFAULT_HI: f64 = 0.6;
pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("tail thresholds must satisfy lo < hi (got {lo}, {hi})")]
    Thresholds { lo: f64, hi: f64 },
    #[error("density grid needs at least 2 points (got {0})")]
    Grid(usize),
}

/// Negative versus non-negative sentiment counts within the false-like and
/// true-like clusters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContingencyStats {
    pub total_false: usize,
    pub total_true: usize,
    pub false_nonneg: usize,
    pub false_neg: usize,
    pub true_nonneg: usize,
    pub true_neg: usize,
    pub pct_false_neg: f64,
    pub pct_true_neg: f64,
}

fn pct(part: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

/// Zero sentiment counts as non-negative; `Other` ratings are ignored.
pub fn contingency(rows: &[DatasetRow]) -> ContingencyStats {
    let mut s = ContingencyStats::default();
    for r in rows {
        let negative = r.sentiment < 0.0;
        match cluster_of(r.rating) {
            RatingCluster::FalseLike if negative => s.false_neg += 1,
            RatingCluster::FalseLike => s.false_nonneg += 1,
            RatingCluster::TrueLike if negative => s.true_neg += 1,
            RatingCluster::TrueLike => s.true_nonneg += 1,
            RatingCluster::Other => {}
        }
    }
    s.total_false = s.false_nonneg + s.false_neg;
    s.total_true = s.true_nonneg + s.true_neg;
    s.pct_false_neg = pct(s.false_neg, s.total_false);
    s.pct_true_neg = pct(s.true_neg, s.total_true);
    s
}

/// Rows strictly below `lo` (ascending) and strictly above `hi` (descending).
pub fn tail_extremes(
    rows: &[DatasetRow],
    lo: f64,
    hi: f64,
) -> Result<(Vec<DatasetRow>, Vec<DatasetRow>), AnalysisError> {
    if !(lo < hi) {
        return Err(AnalysisError::Thresholds { lo, hi });
    }
    let mut below: Vec<_> = rows.iter().filter(|r| r.sentiment < lo).cloned().collect();
    let mut above: Vec<_> = rows.iter().filter(|r| r.sentiment > hi).cloned().collect();
    below.sort_by(|a, b| a.sentiment.total_cmp(&b.sentiment));
    above.sort_by(|a, b| b.sentiment.total_cmp(&a.sentiment));
    Ok((below, above))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lo: f64,
    pub hi: f64,
    pub below: Vec<DatasetRow>,
    pub above: Vec<DatasetRow>,
    /// Every row below `lo` is false-like (vacuously false when empty).
    pub below_all_false_like: bool,
    pub above_false_like: usize,
    pub above_true_like: usize,
    pub above_other: usize,
}

pub fn tail_report(rows: &[DatasetRow], lo: f64, hi: f64) -> Result<TailReport, AnalysisError> {
    let (below, above) = tail_extremes(rows, lo, hi)?;
    let count = |c: RatingCluster| above.iter().filter(|r| cluster_of(r.rating) == c).count();
    Ok(TailReport {
        lo,
        hi,
        below_all_false_like: !below.is_empty()
            && below.iter().all(|r| cluster_of(r.rating) == RatingCluster::FalseLike),
        above_false_like: count(RatingCluster::FalseLike),
        above_true_like: count(RatingCluster::TrueLike),
        above_other: count(RatingCluster::Other),
        below,
        above,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupBy {
    Rating,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinStats {
    pub group: String,
    pub n: usize,
    /// `None` for an empty group.
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub bandwidth: Option<f64>,
    /// `(x, density)` pairs over `[-1, 1]`, boundary-reflected; empty for an
    /// empty group.
    pub density_grid: Vec<(f64, f64)>,
}

/// Summary of one sample.
pub fn violin_for(group: &str, values: &[f64], grid_points: usize) -> Result<ViolinStats, AnalysisError> {
    if grid_points < 2 {
        return Err(AnalysisError::Grid(grid_points));
    }
    if values.is_empty() {
        return Ok(ViolinStats {
            group: group.to_owned(),
            n: 0,
            median: None,
            q1: None,
            q3: None,
            bandwidth: None,
            density_grid: Vec::new(),
        });
    }
    let mut scratch = values.to_vec();
    let q1 = density::quantile(&mut scratch, 0.25);
    let median = density::quantile(&mut scratch, 0.5);
    let q3 = density::quantile(&mut scratch, 0.75);
    let bw = density::silverman_bandwidth(values);
    let xs = density::grid(-1.0, 1.0, grid_points);
    let ys = density::reflected_kde(values, bw, -1.0, 1.0, &xs);
    Ok(ViolinStats {
        group: group.to_owned(),
        n: values.len(),
        median,
        q1,
        q3,
        bandwidth: Some(bw),
        density_grid: xs.into_iter().zip(ys).collect(),
    })
}

/// One entry per rating (12, taxonomy order) or per cluster (3), empty
/// groups included.
pub fn violin(rows: &[DatasetRow], group_by: GroupBy, grid_points: usize) -> Result<Vec<ViolinStats>, AnalysisError> {
    let values_where = |pred: &dyn Fn(Rating) -> bool| -> Vec<f64> {
        rows.iter().filter(|r| pred(r.rating)).map(|r| r.sentiment).collect()
    };
    match group_by {
        GroupBy::Rating => Rating::ALL
            .iter()
            .map(|&rating| violin_for(rating.label(), &values_where(&|r| r == rating), grid_points))
            .collect(),
        GroupBy::Cluster => RatingCluster::ALL
            .iter()
            .map(|&c| violin_for(c.label(), &values_where(&|r| cluster_of(r) == c), grid_points))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub group: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_rows: usize,
    pub contingency: ContingencyStats,
    pub per_rating: Vec<GroupCount>,
    pub per_cluster: Vec<GroupCount>,
    /// False-like over true-like count; `None` without true-like rows.
    pub false_to_true_ratio: Option<f64>,
    pub tails: TailReport,
}

pub fn stats_report(rows: &[DatasetRow], lo: f64, hi: f64) -> Result<StatsReport, AnalysisError> {
    let contingency = contingency(rows);
    let per_rating = Rating::ALL
        .iter()
        .map(|&r| GroupCount {
            group: r.label().to_owned(),
            count: rows.iter().filter(|row| row.rating == r).count(),
        })
        .collect();
    let per_cluster = RatingCluster::ALL
        .iter()
        .map(|&c| GroupCount {
            group: c.label().to_owned(),
            count: rows.iter().filter(|row| cluster_of(row.rating) == c).count(),
        })
        .collect();
    let false_to_true_ratio = (contingency.total_true > 0)
        .then(|| contingency.total_false as f64 / contingency.total_true as f64);
    Ok(StatsReport {
        total_rows: rows.len(),
        tails: tail_report(rows, lo, hi)?,
        contingency,
        per_rating,
        per_cluster,
        false_to_true_ratio,
    })
}
