//! Claim, rating and origin extraction from fact-check pages.

use scraper::{ElementRef, Html, Node, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CSS selectors locating the three sections of a fact-check page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSelectors {
    pub claim: String,
    pub rating: String,
    /// Candidate header elements; the origin section is the parent of the
    /// first one whose trimmed text equals `origin_title`.
    pub origin_header: String,
    pub origin_title: String,
}

impl Default for PageSelectors {
    fn default() -> Self {
        Self {
            claim: ".claim".into(),
            rating: ".rating-name".into(),
            origin_header: "h1, h2, h3, h4, h5, h6, .card-header".into(),
            origin_title: "Origin".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPage {
    pub claim_html: String,
    pub rating_html: String,
    pub origin_html: String,
    pub claim_text: String,
    /// Rating slug, e.g. `false` or `mostly-true`.
    pub rating_label: String,
    pub origin_text: String,
    pub source_url: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PageError {
    #[error("unrated page {url}: no {missing} section")]
    Unrated { url: String, missing: &'static str },
    #[error("invalid selector {selector:?}: {message}")]
    Selector { selector: String, message: String },
}

/// The parse outcome for one feed record, as stored between pipeline stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRecord {
    pub record_id: u64,
    #[serde(default)]
    pub page: Option<ParsedPage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn selector(css: &str) -> Result<Selector, PageError> {
    Selector::parse(css).map_err(|e| PageError::Selector {
        selector: css.to_owned(),
        message: e.to_string(),
    })
}

pub fn parse_page(html: &[u8], url: &str) -> Result<ParsedPage, PageError> {
    parse_page_with(html, url, &PageSelectors::default())
}

pub fn parse_page_with(html: &[u8], url: &str, sel: &PageSelectors) -> Result<ParsedPage, PageError> {
    let doc = Html::parse_document(&decode_html(html));
    let unrated = |missing| PageError::Unrated {
        url: url.to_owned(),
        missing,
    };
    let mut warnings = Vec::new();

    let claim_sel = selector(&sel.claim)?;
    let mut claims = doc.select(&claim_sel);
    let claim = claims.next().ok_or_else(|| unrated("claim"))?;
    let extra = claims.count();
    if extra > 0 {
        warnings.push(format!("{url}: {extra} extra claim element(s) ignored"));
    }
    let claim_text = element_text(claim, None);
    if claim_text.is_empty() {
        return Err(unrated("claim"));
    }

    let rating_sel = selector(&sel.rating)?;
    let mut ratings = doc.select(&rating_sel);
    let rating = ratings.next().ok_or_else(|| unrated("rating"))?;
    let extra = ratings.count();
    if extra > 0 {
        warnings.push(format!("{url}: {extra} extra rating element(s) ignored"));
    }
    let rating_html = rating.html();
    let rating_label = rating_from_class(&rating_html).map_err(|_| unrated("rating"))?;

    let header_sel = selector(&sel.origin_header)?;
    let origin = doc
        .select(&header_sel)
        .find(|h| element_text(*h, None) == sel.origin_title)
        .and_then(|h| h.parent().and_then(ElementRef::wrap).map(|parent| (parent, h)));
    let (origin_html, origin_text) = match origin {
        Some((container, header)) => (container.html(), element_text(container, Some(header))),
        None => {
            warnings.push(format!("{url}: no origin section"));
            (String::new(), String::new())
        }
    };

    Ok(ParsedPage {
        claim_html: claim.html(),
        rating_html,
        origin_html,
        claim_text,
        rating_label,
        origin_text,
        source_url: url.to_owned(),
        warnings,
    })
}

/// Rating slug from a `rating-label-<slug>` class, falling back to the
/// element text lower-cased with spaces turned into hyphens.
pub fn rating_from_class(rating_html: &str) -> Result<String, PageError> {
    let frag = Html::parse_fragment(rating_html);
    let unrated = || PageError::Unrated {
        url: String::new(),
        missing: "rating",
    };
    let elements: Vec<ElementRef> = frag
        .root_element()
        .descendants()
        .filter_map(ElementRef::wrap)
        .filter(|e| e.value().name() != "html")
        .collect();
    for el in &elements {
        if let Some(slug) = el
            .value()
            .classes()
            .find_map(|c| c.strip_prefix("rating-label-"))
            .filter(|s| !s.is_empty())
        {
            return Ok(slug.to_lowercase());
        }
    }
    let text = elements
        .first()
        .map(|e| element_text(*e, None))
        .unwrap_or_else(|| collapse_whitespace(rating_html));
    if text.is_empty() {
        return Err(unrated());
    }
    Ok(text.to_lowercase().split(' ').collect::<Vec<_>>().join("-"))
}

const BLOCK_ELEMENTS: &[&str] = &[
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption",
    "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav",
    "ol", "p", "pre", "section", "table", "td", "th", "tr", "ul",
];

/// Plain text of `el`: tags stripped, entities decoded, whitespace collapsed.
/// `skip` excludes one descendant subtree.
fn element_text(el: ElementRef, skip: Option<ElementRef>) -> String {
    fn walk(el: ElementRef, skip: Option<ElementRef>, out: &mut String) {
        for child in el.children() {
            match child.value() {
                Node::Text(t) => out.push_str(t),
                Node::Element(e) => {
                    let Some(child_el) = ElementRef::wrap(child) else { continue };
                    if skip.is_some_and(|s| s.id() == child_el.id())
                        || matches!(e.name(), "script" | "style" | "noscript" | "template")
                    {
                        continue;
                    }
                    let block = BLOCK_ELEMENTS.contains(&e.name());
                    if block {
                        out.push(' ');
                    }
                    walk(child_el, skip, out);
                    if block {
                        out.push(' ');
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = String::new();
    walk(el, skip, &mut out);
    collapse_whitespace(&out)
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decodes page bytes using a BOM or a `<meta>` charset declaration,
/// defaulting to UTF-8.
pub fn decode_html(bytes: &[u8]) -> String {
    if let Some((enc, bom_len)) = encoding_rs::Encoding::for_bom(bytes) {
        return enc.decode_without_bom_handling(&bytes[bom_len..]).0.into_owned();
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(2048)]).to_ascii_lowercase();
    let enc = declared_charset(&head)
        .and_then(|label| encoding_rs::Encoding::for_label(label.as_bytes()))
        .unwrap_or(encoding_rs::UTF_8);
    enc.decode_without_bom_handling(bytes).0.into_owned()
}

fn declared_charset(head: &str) -> Option<String> {
    let idx = head.find("charset=")?;
    let rest = head[idx + "charset=".len()..].trim_start_matches(['"', '\'']);
    let label: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.'))
        .collect();
    (!label.is_empty()).then_some(label)
}
