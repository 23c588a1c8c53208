//! Checks conclusion references against corpus titles and bibliographies.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusDocument;
use crate::lesson::text::{jaccard, normalize_title, token_set};
use crate::lesson::{ConclusionSection, Reference, Verification};

pub const TITLE_THRESHOLD: f64 = 0.8;
pub const YEAR_TOLERANCE: i32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvidence {
    /// Token Jaccard between the normalized titles.
    pub score: f64,
    pub doc_id: Option<String>,
    pub matched_title: Option<String>,
    pub matched_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceVerdict {
    pub reference: Reference,
    pub verification: Verification,
    pub evidence: MatchEvidence,
}

fn year_ok(a: Option<i32>, b: Option<i32>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= YEAR_TOLERANCE,
        _ => true,
    }
}

struct Candidate<'a> {
    doc_id: &'a str,
    title: &'a str,
    year: Option<i32>,
    score: f64,
}

fn best<'a>(cands: impl Iterator<Item = Candidate<'a>>) -> Option<Candidate<'a>> {
    cands.reduce(|x, y| {
        let better = y.score > x.score
            || (y.score == x.score && (y.doc_id, y.title) < (x.doc_id, x.title));
        if better { y } else { x }
    })
}

pub fn verify_reference(reference: &Reference, corpus: &[CorpusDocument]) -> ReferenceVerdict {
    let mut reference = reference.clone();
    reference.fill_derived();
    let tokens = token_set(&reference.normalized_title);
    let candidates = || {
        corpus.iter().flat_map(|d| {
            std::iter::once((d.id.as_str(), d.title.as_str(), d.year))
                .chain(d.bibliography.iter().map(move |b| (d.id.as_str(), b.title.as_str(), b.year)))
        })
        .map(|(doc_id, title, year)| Candidate {
            doc_id,
            title,
            year,
            score: jaccard(&tokens, &token_set(&normalize_title(title))),
        })
    };
    let qualifying = best(candidates().filter(|c| c.score >= TITLE_THRESHOLD && year_ok(reference.year, c.year)));
    let verification = if qualifying.is_some() { Verification::Verified } else { Verification::Unverified };
    let evidence = match qualifying.or_else(|| best(candidates())) {
        Some(c) => MatchEvidence {
            score: c.score,
            doc_id: Some(c.doc_id.to_owned()),
            matched_title: Some(c.title.to_owned()),
            matched_year: c.year,
        },
        None => MatchEvidence { score: 0.0, doc_id: None, matched_title: None, matched_year: None },
    };
    reference.verification = verification;
    ReferenceVerdict { reference, verification, evidence }
}

/// One verdict per reference, in citation order.
pub fn verify_references(conclusion: &ConclusionSection, corpus: &[CorpusDocument]) -> Vec<ReferenceVerdict> {
    conclusion.references.iter().map(|r| verify_reference(r, corpus)).collect()
}
