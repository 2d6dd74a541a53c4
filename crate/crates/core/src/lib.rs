//! Fact-checked claim harvesting and sentiment-versus-credibility analysis.
//!
//! Stages: [`ingest`] feed pages, [`extract`] and resolve links, [`crawler`]
//! fetch fact-check pages, [`page_parse`] claim/rating/origin, [`sentiment`]
//! scoring, [`dataset`] assembly, [`analysis`] statistics. [`pipeline`]
//! chains them.

pub mod analysis;
pub mod config;
pub mod crawler;
pub mod dataset;
pub mod extract;
pub mod fixture;
pub mod ingest;
pub mod page_parse;
pub mod pipeline;
pub mod ratings;
pub mod sentiment;
