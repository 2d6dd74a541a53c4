use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use proptest::prelude::*;

use claimset::analysis::{contingency, density, tail_extremes};
use claimset::crawler::{CacheEntry, ResponseCache};
use claimset::dataset::{format_sentiment, DatasetRow};
use claimset::extract::extract_urls;
use claimset::ingest::{dedup, is_stopword, tokenize, FeedRecord};
use claimset::page_parse::{parse_page, PageError};
use claimset::ratings::{source_credible, FactSource, Rating, SourceRegistry, Verification};

fn record(id: u64) -> FeedRecord {
    FeedRecord {
        text: format!("r{id}"),
        id,
        length: 0,
        date_ms: 0,
        source: String::new(),
        likes: 0,
        retweets: 0,
        time_ms: 0,
        geo: None,
        sentiment_hint: None,
        token_list: vec![],
    }
}

fn row(rating: Rating, sentiment: f64) -> DatasetRow {
    DatasetRow {
        claim: String::new(),
        rating,
        sentiment,
        origin: String::new(),
        source_url: String::new(),
        record_id: 0,
    }
}

fn text_strategy() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z]{1,8}",
        Just(" ".to_string()),
        Just(", ".to_string()),
        Just("https://t.co/".to_string()),
        Just("www.".to_string()),
        Just(".com".to_string()),
        Just("/".to_string()),
        Just("ftp://".to_string()),
        "[0-9]{1,3}",
        Just(".".to_string()),
        Just("é".to_string()),
        Just("O'Reilly".to_string()),
    ];
    prop::collection::vec(piece, 0..30).prop_map(|v| v.concat())
}

fn rating_strategy() -> impl Strategy<Value = Rating> {
    prop::sample::select(Rating::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokens_are_clean_and_stable(text in text_strategy()) {
        let tokens = tokenize(&text);
        for t in &tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric), "{t:?}");
            prop_assert!(!is_stopword(t));
        }
        prop_assert_eq!(tokenize(&tokens.join(" ")), tokens);
    }

    #[test]
    fn url_spans_are_ordered_disjoint_substrings(text in text_strategy()) {
        let urls = extract_urls(&text, 7);
        let mut prev_end = 0;
        for u in &urls {
            prop_assert!(u.start >= prev_end);
            prop_assert!(u.end <= text.len() && u.start < u.end);
            prop_assert_eq!(&text[u.start..u.end], u.raw.as_str());
            prop_assert_eq!(u.source_record_id, 7);
            prev_end = u.end;
        }
        prop_assert_eq!(urls, extract_urls(&text, 7));
    }

    #[test]
    fn dedup_keeps_first_occurrences(ids in prop::collection::vec(0u64..40, 0..120)) {
        let out = dedup(ids.iter().map(|&i| record(i)).collect());
        let out_ids: Vec<u64> = out.iter().map(|r| r.id).collect();
        let mut seen = HashSet::new();
        let expected: Vec<u64> = ids.iter().copied().filter(|i| seen.insert(*i)).collect();
        prop_assert_eq!(&out_ids, &expected);
        prop_assert_eq!(dedup(out.clone()), out);
    }

    #[test]
    fn contingency_shares_are_scale_free(
        rows in prop::collection::vec((rating_strategy(), -1.0f64..=1.0), 1..80),
        k in 2usize..6,
    ) {
        let rows: Vec<DatasetRow> = rows.into_iter().map(|(r, s)| row(r, s)).collect();
        let once = contingency(&rows);
        let many: Vec<DatasetRow> = rows.iter().cycle().take(rows.len() * k).cloned().collect();
        let scaled = contingency(&many);
        prop_assert_eq!(scaled.total_false, once.total_false * k);
        prop_assert_eq!(scaled.true_neg, once.true_neg * k);
        prop_assert!((scaled.pct_false_neg - once.pct_false_neg).abs() < 1e-9);
        prop_assert!((scaled.pct_true_neg - once.pct_true_neg).abs() < 1e-9);
    }

    #[test]
    fn tails_match_a_filter_oracle(
        rows in prop::collection::vec((rating_strategy(), -1.0f64..=1.0), 0..80),
        lo in -1.0f64..0.0,
        width in 0.01f64..1.0,
    ) {
        let hi = lo + width;
        let rows: Vec<DatasetRow> = rows.into_iter().map(|(r, s)| row(r, s)).collect();
        let (below, above) = tail_extremes(&rows, lo, hi).unwrap();
        prop_assert_eq!(below.len(), rows.iter().filter(|r| r.sentiment < lo).count());
        prop_assert_eq!(above.len(), rows.iter().filter(|r| r.sentiment > hi).count());
        prop_assert!(below.windows(2).all(|w| w[0].sentiment <= w[1].sentiment));
        prop_assert!(above.windows(2).all(|w| w[0].sentiment >= w[1].sentiment));
    }

    #[test]
    fn quartiles_are_ordered_within_range(values in prop::collection::vec(-1.0f64..=1.0, 1..60)) {
        let mut v = values.clone();
        let q1 = density::quantile(&mut v, 0.25).unwrap();
        let q2 = density::quantile(&mut v, 0.5).unwrap();
        let q3 = density::quantile(&mut v, 0.75).unwrap();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= q1 && q1 <= q2 && q2 <= q3 && q3 <= max);
    }

    #[test]
    fn sentiment_text_is_close_and_idempotent(v in -1.0f64..=1.0) {
        let text = format_sentiment(v);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-16 + f64::EPSILON, "{v} -> {text}");
        prop_assert_eq!(format_sentiment(back), text);
    }

    #[test]
    fn cache_round_trips_bytes(body in prop::collection::vec(any::<u8>(), 0..2048), status in 100u16..500) {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let entry = CacheEntry {
            url: "https://example.org/p?q=1".into(),
            status,
            location: None,
            content_type: Some("text/html".into()),
            fetched_at: 1_545_139_836_000,
            body: body.clone(),
        };
        cache.put(&entry).unwrap();
        prop_assert_eq!(cache.get(&entry.url).unwrap().unwrap(), entry);
    }

    #[test]
    fn plain_text_never_contains_markup(
        words in prop::collection::vec("[a-zA-Z0-9&\"' ]{1,10}", 1..8),
        tags in prop::collection::vec(prop::sample::select(vec!["b", "i", "em", "span", "a"]), 1..8),
    ) {
        let mut inner = String::new();
        for (w, t) in words.iter().zip(tags.iter().cycle()) {
            inner.push_str(&format!("<{t}>{}</{t}> ", html_escape::encode_double_quoted_attribute(w)));
        }
        let html = format!(
            "<html><body><p class=\"claim\">{inner}</p><span class=\"rating-name rating-label-true\">True</span></body></html>"
        );
        let expected = words.join(" ").split_whitespace().collect::<Vec<_>>().join(" ");
        let parsed = parse_page(html.as_bytes(), "https://x.example/");
        if expected.is_empty() {
            let unrated = matches!(parsed, Err(PageError::Unrated { missing: "claim", .. }));
            prop_assert!(unrated);
            return Ok(());
        }
        let page = parsed.unwrap();
        for field in [&page.claim_text, &page.rating_label, &page.origin_text] {
            prop_assert!(!field.contains('<') && !field.contains('>'));
        }
        prop_assert_eq!(page.claim_text, expected);
    }

    #[test]
    fn credibility_walk_matches_oracle(links in prop::collection::vec(0usize..10, 1..10)) {
        // link i: values >= n mean a terminal; even terminal = grounded
        let n = links.len();
        let sources: Vec<FactSource> = links
            .iter()
            .enumerate()
            .map(|(i, &l)| FactSource {
                name: format!("s{i}"),
                verification: if l < n {
                    Verification::DerivedFrom(format!("s{l}"))
                } else if l % 2 == 0 {
                    Verification::EventGrounded
                } else {
                    Verification::Unverified
                },
                reason: String::new(),
            })
            .collect();
        let registry = SourceRegistry::new(sources.clone());
        for (i, s) in sources.iter().enumerate() {
            let got = source_credible(s, &registry).unwrap();
            let (credible, cycle) = oracle_walk(&links, i);
            prop_assert_eq!(got.credible, credible);
            prop_assert_eq!(got.cycle.is_some(), cycle);
            prop_assert!(got.chain.len() <= n);
        }
    }
}

fn oracle_walk(links: &[usize], start: usize) -> (bool, bool) {
    let n = links.len();
    let mut visited = BTreeSet::new();
    let mut i = start;
    loop {
        if !visited.insert(i) {
            return (false, true);
        }
        let l = links[i];
        if l >= n {
            return (l.is_multiple_of(2), false);
        }
        i = l;
    }
}

#[test]
fn two_source_cycle_is_reported() {
    let s = FactSource {
        name: "s".into(),
        verification: Verification::DerivedFrom("t".into()),
        reason: String::new(),
    };
    let t = FactSource {
        name: "t".into(),
        verification: Verification::DerivedFrom("s".into()),
        reason: String::new(),
    };
    let registry = SourceRegistry::new([s.clone(), t]);
    let c = source_credible(&s, &registry).unwrap();
    assert!(!c.credible);
    assert_eq!(c.cycle.unwrap(), ["s", "t"]);
    let dangling = FactSource {
        name: "d".into(),
        verification: Verification::DerivedFrom("nowhere".into()),
        reason: String::new(),
    };
    assert!(source_credible(&dangling, &registry).is_err());
}

#[test]
fn registry_file_round_trip() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sources.toml")).unwrap();
    let registry = SourceRegistry::parse(&text).unwrap();
    assert_eq!(registry, SourceRegistry::shipped());
    let feed = registry.get("twitter.com/snopes").unwrap();
    let c = source_credible(feed, &registry).unwrap();
    assert!(c.credible);
    assert_eq!(c.chain, ["twitter.com/snopes", "snopes.com"]);
}
