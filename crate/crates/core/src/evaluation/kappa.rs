//! Cohen's kappa for two coders with binary ratings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rating::{RatingSession, RatingValue};

/// 2x2 agreement counts. `b` is A positive / B negative, `c` the reverse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KappaError {
    #[error("no items to compare")]
    Empty,
    #[error("coders rated different items: only A has [{}], only B has [{}]", only_a.join(", "), only_b.join(", "))]
    ItemSetMismatch { only_a: Vec<String>, only_b: Vec<String> },
    #[error("degenerate marginals: expected agreement is 1 but coders disagree")]
    DegenerateMarginals,
    #[error("lesson {lesson}: need exactly two complete rating sessions, found {found}")]
    CoderCount { lesson: String, found: usize },
}

impl ContingencyTable {
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn add(&mut self, x: RatingValue, y: RatingValue) {
        use RatingValue::*;
        match (x, y) {
            (Positive, Positive) => self.a += 1,
            (Positive, Negative) => self.b += 1,
            (Negative, Positive) => self.c += 1,
            (Negative, Negative) => self.d += 1,
        }
    }

    pub fn observed_agreement(&self) -> f64 {
        (self.a + self.d) as f64 / self.n() as f64
    }

    pub fn expected_agreement(&self) -> f64 {
        let n = self.n() as f64;
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        ((a + b) / n) * ((a + c) / n) + ((c + d) / n) * ((b + d) / n)
    }

    /// κ = (p_o − p_e) / (1 − p_e).
    ///
    /// Evaluated as 2(ad − bc) / ((a+b)(b+d) + (a+c)(c+d)), which is the same
    /// quantity with n² cancelled, so the only rounding is the final division.
    pub fn kappa(&self) -> Result<f64, KappaError> {
        if self.n() == 0 {
            return Err(KappaError::Empty);
        }
        let (a, b, c, d) = (self.a as i128, self.b as i128, self.c as i128, self.d as i128);
        let num = 2 * (a * d - b * c);
        let den = (a + b) * (b + d) + (a + c) * (c + d);
        if den == 0 {
            // p_e = 1: both coders used a single class throughout.
            return if b + c == 0 { Ok(1.0) } else { Err(KappaError::DegenerateMarginals) };
        }
        Ok(num as f64 / den as f64)
    }
}

/// Tabulates two keyed rating maps that must cover the same items.
pub fn contingency<K: Ord + ToString>(
    a: &BTreeMap<K, RatingValue>,
    b: &BTreeMap<K, RatingValue>,
) -> Result<ContingencyTable, KappaError> {
    let only_a: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).map(ToString::to_string).collect();
    let only_b: Vec<String> = b.keys().filter(|k| !a.contains_key(*k)).map(ToString::to_string).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(KappaError::ItemSetMismatch { only_a, only_b });
    }
    let mut t = ContingencyTable::default();
    for (k, x) in a {
        t.add(*x, b[k]);
    }
    Ok(t)
}

pub fn cohens_kappa<K: Ord + ToString>(
    a: &BTreeMap<K, RatingValue>,
    b: &BTreeMap<K, RatingValue>,
) -> Result<f64, KappaError> {
    contingency(a, b)?.kappa()
}

/// Pairs the two complete sessions of every lesson. The coder whose id sorts
/// first is coder A. Lessons with fewer than two complete sessions are skipped
/// unless `lesson` names one explicitly.
pub fn coder_pairs<'s>(
    sessions: &'s [RatingSession],
    lesson: Option<&str>,
) -> Result<Vec<(&'s RatingSession, &'s RatingSession)>, KappaError> {
    let mut by_lesson: BTreeMap<&str, Vec<&RatingSession>> = BTreeMap::new();
    for s in sessions.iter().filter(|s| s.complete) {
        if lesson.is_none_or(|l| l == s.lesson_id) {
            by_lesson.entry(&s.lesson_id).or_default().push(s);
        }
    }
    if let Some(l) = lesson {
        let found = by_lesson.get(l).map_or(0, Vec::len);
        if found != 2 {
            return Err(KappaError::CoderCount { lesson: l.to_owned(), found });
        }
    }
    let mut pairs = Vec::new();
    for (l, mut group) in by_lesson {
        match group.len() {
            0 | 1 => continue,
            2 => {}
            found => return Err(KappaError::CoderCount { lesson: l.to_owned(), found }),
        }
        group.sort_by(|x, y| x.coder_id.cmp(&y.coder_id));
        pairs.push((group[0], group[1]));
    }
    Ok(pairs)
}

/// Pools every (lesson, code) item across the given pairs into one table.
pub fn pooled_contingency(pairs: &[(&RatingSession, &RatingSession)]) -> Result<ContingencyTable, KappaError> {
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for (x, y) in pairs {
        for (code, v) in &x.values {
            a.insert(format!("{}/{}", x.lesson_id, code), *v);
        }
        for (code, v) in &y.values {
            b.insert(format!("{}/{}", y.lesson_id, code), *v);
        }
    }
    contingency(&a, &b)
}

/// Agreement summary returned to callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub lessons: Vec<String>,
    pub table: ContingencyTable,
    pub kappa: f64,
}

pub fn kappa_summary(sessions: &[RatingSession], lesson: Option<&str>) -> Result<KappaSummary, KappaError> {
    let pairs = coder_pairs(sessions, lesson)?;
    let table = pooled_contingency(&pairs)?;
    Ok(KappaSummary {
        lessons: pairs.iter().map(|(x, _)| x.lesson_id.clone()).collect(),
        kappa: table.kappa()?,
        table,
    })
}
