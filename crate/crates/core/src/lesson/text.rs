//! Small text utilities shared by validation and reference checking.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

/// Lowercases, drops apostrophes, turns other punctuation into spaces and
/// collapses whitespace.
pub fn normalize_title(text: &str) -> String {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == '\'' || ch == '\u{2019}' {
            continue;
        }
        if ch.is_alphanumeric() {
            cleaned.extend(ch.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Distinct normalized tokens of `text`.
pub fn token_set(text: &str) -> BTreeSet<String> {
    normalize_title(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Token-set Jaccard similarity. Two empty sets score 1.0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

static PAREN_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(((?:19|20)\d{2})[a-z]?\)\.?\s*").unwrap());
static BARE_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b((?:19|20)\d{2})\b").unwrap());
static QUOTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"["\u{201C}]([^"\u{201D}]+)["\u{201D}]"#).unwrap());

/// Best-effort title extraction for author-year and quoted-title citations.
/// Falls back to the whole citation.
pub fn extract_citation_title(raw: &str) -> String {
    if let Some(m) = QUOTED.captures(raw) {
        return m[1].trim().trim_end_matches(['.', ',']).to_owned();
    }
    if let Some(m) = PAREN_YEAR.find(raw) {
        let rest = &raw[m.end()..];
        let end = rest
            .char_indices()
            .find(|&(i, c)| {
                matches!(c, '.' | '?' | '!')
                    && rest[i + c.len_utf8()..]
                        .chars()
                        .next()
                        .is_none_or(char::is_whitespace)
            })
            .map(|(i, c)| if c == '.' { i } else { i + c.len_utf8() })
            .unwrap_or(rest.len());
        let title = rest[..end].trim();
        if !title.is_empty() {
            return title.to_owned();
        }
    }
    raw.trim().to_owned()
}

/// First plausible publication year in the citation.
pub fn extract_citation_year(raw: &str) -> Option<i32> {
    PAREN_YEAR
        .captures(raw)
        .or_else(|| BARE_YEAR.captures(raw))
        .and_then(|c| c[1].parse().ok())
}
