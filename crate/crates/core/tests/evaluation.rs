use std::collections::BTreeMap;
use std::path::Path;

use lessonforge_core::corpus::{load_manifest, CorpusDocument};
use lessonforge_core::evaluation::*;
use lessonforge_core::lesson::{ConclusionSection, Reference, Verification};
use num_rational::Ratio;
use proptest::prelude::*;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Straight transcription of the textbook definition, in exact rationals.
fn kappa_oracle(a: i64, b: i64, c: i64, d: i64) -> Option<Ratio<i64>> {
    let n = a + b + c + d;
    let r = |x: i64| Ratio::new(x, n);
    let po = r(a + d);
    let pe = r(a + b) * r(a + c) + r(c + d) * r(b + d);
    let one = Ratio::from_integer(1);
    if pe == one {
        return (po == one).then_some(one);
    }
    Some((po - pe) / (one - pe))
}

fn as_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn maps_from_counts(a: usize, b: usize, c: usize, d: usize) -> (RatingValues, RatingValues) {
    use RatingValue::*;
    let mut x = RatingValues::new();
    let mut y = RatingValues::new();
    let pairs = std::iter::repeat_n((Positive, Positive), a)
        .chain(std::iter::repeat_n((Positive, Negative), b))
        .chain(std::iter::repeat_n((Negative, Positive), c))
        .chain(std::iter::repeat_n((Negative, Negative), d));
    for (i, (p, q)) in pairs.enumerate() {
        x.insert(format!("item-{i:03}"), p);
        y.insert(format!("item-{i:03}"), q);
    }
    (x, y)
}

const KAPPA_FIXTURES: [(usize, usize, usize, usize); 12] = [
    (12, 3, 1, 4),
    (5, 5, 5, 5),
    (10, 0, 0, 10),
    (0, 5, 5, 0),
    (8, 2, 2, 8),
    (15, 1, 3, 1),
    (1, 0, 0, 1),
    (3, 7, 2, 9),
    (40, 6, 4, 50),
    (0, 0, 3, 7),
    (20, 0, 0, 0),
    (45, 15, 25, 15),
];

#[test]
fn kappa_matches_rational_oracle_on_fixtures() {
    for (a, b, c, d) in KAPPA_FIXTURES {
        let (x, y) = maps_from_counts(a, b, c, d);
        let got = cohens_kappa(&x, &y).unwrap();
        let want = as_f64(kappa_oracle(a as i64, b as i64, c as i64, d as i64).unwrap());
        assert!((got - want).abs() < 1e-9, "({a},{b},{c},{d}): {got} vs {want}");
    }
}

#[test]
fn kappa_hand_values() {
    let (x, y) = maps_from_counts(12, 3, 1, 4);
    let k = cohens_kappa(&x, &y).unwrap();
    assert!((k - 0.225 / 0.425).abs() < 1e-9);
    assert!((k - 0.5294117647).abs() < 1e-9);
    let (x, y) = maps_from_counts(5, 5, 5, 5);
    assert!(cohens_kappa(&x, &y).unwrap().abs() < 1e-12);
    // Identical vectors with both classes present.
    let (x, _) = maps_from_counts(7, 0, 0, 3);
    assert_eq!(cohens_kappa(&x, &x).unwrap(), 1.0);
}

#[test]
fn kappa_errors() {
    let empty = RatingValues::new();
    assert_eq!(cohens_kappa(&empty, &empty), Err(KappaError::Empty));
    let (x, mut y) = maps_from_counts(3, 1, 1, 3);
    y.remove("item-000");
    y.insert("extra".into(), RatingValue::Positive);
    match cohens_kappa(&x, &y) {
        Err(KappaError::ItemSetMismatch { only_a, only_b }) => {
            assert_eq!(only_a, ["item-000"]);
            assert_eq!(only_b, ["extra"]);
        }
        other => panic!("{other:?}"),
    }
    // Single-class marginals with full agreement.
    let t = ContingencyTable { a: 0, b: 0, c: 0, d: 9 };
    assert_eq!(t.kappa(), Ok(1.0));
}

fn session(coder: &str, lesson: &str, positive: &[&str], rubric: &Rubric) -> RatingSession {
    let values = rubric
        .ids()
        .map(|id| {
            let v = if positive.contains(&id) { RatingValue::Positive } else { RatingValue::Negative };
            (id.to_owned(), v)
        })
        .collect();
    let mut s = RatingSession::new(coder, lesson, values);
    s.refresh(rubric).unwrap();
    s
}

#[test]
fn rubric_has_seventeen_grouped_codes() {
    use lessonforge_core::lesson::SectionKind::*;
    let r = Rubric::default();
    assert_eq!(r.len(), 17);
    let per_section: Vec<usize> =
        [TitlePage, ScenarioOne, Instruction, ScenarioTwo, Conclusion].iter().map(|k| r.codes.iter().filter(|c| c.section == *k).count()).collect();
    assert_eq!(per_section, [2, 4, 5, 4, 2]);
    assert_eq!(r.get("instruction.pedagogy_grounded").unwrap().display_name(), "Instruction / Pedagogy Grounded");
    assert!(r.codes.iter().all(|c| !c.description.is_empty()));
}

#[test]
fn rating_completeness() {
    let rubric = Rubric::default();
    let mut s = session("ann", "l1", &[], &rubric);
    assert!(s.complete);
    s.values.remove("title.clarity");
    s.refresh(&rubric).unwrap();
    assert!(!s.complete);
    match s.require_complete(&rubric) {
        Err(RatingError::MissingCodes { missing, .. }) => assert_eq!(missing, ["title.clarity"]),
        other => panic!("{other:?}"),
    }
    s.values.insert("title.bogus".into(), RatingValue::Positive);
    assert!(matches!(s.refresh(&rubric), Err(RatingError::UnknownCodes { .. })));
}

#[test]
fn ratings_csv_roundtrip() {
    let rubric = Rubric::default();
    let sessions = vec![
        session("bo", "l2", &["title.specific"], &rubric),
        session("ann", "l1", &["title.clarity", "conclusion.alignment_with_lo"], &rubric),
    ];
    let mut buf = Vec::new();
    write_ratings_csv(&sessions, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("coder,lesson,code,value\nann,l1,"));
    let mut back = read_ratings_csv(buf.as_slice()).unwrap();
    for s in &mut back {
        s.refresh(&rubric).unwrap();
    }
    let mut want = sessions.clone();
    want.sort_by(|a, b| a.lesson_id.cmp(&b.lesson_id));
    assert_eq!(back, want);

    let bad = "coder,lesson,code,value\nann,l1,title.clarity,maybe\n";
    let err = read_ratings_csv(bad.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn consensus_examples() {
    let rubric = Rubric::default();
    let a = session("ann", "l1", &["title.specific", "title.clarity"], &rubric);
    let b = session("bo", "l1", &["title.specific", "title.clarity"], &rubric);
    let c = resolve_consensus(&rubric, &a, &b, &Tiebreaks::default()).unwrap();
    assert_eq!(c.values, a.values);
    assert!(c.provenance.values().all(|p| *p == Provenance::Agreed));

    let b2 = session("bo", "l1", &["title.specific"], &rubric);
    let err = resolve_consensus(&rubric, &a, &b2, &Tiebreaks::default()).unwrap_err();
    assert_eq!(err, ConsensusError::MissingTiebreaks(vec!["title.clarity".into()]));
    assert!(err.to_string().contains("title.clarity"));

    let tb = Tiebreaks {
        reviewer: "cy".into(),
        values: [("title.clarity".to_owned(), RatingValue::Positive)].into(),
    };
    let c = resolve_consensus(&rubric, &a, &b2, &tb).unwrap();
    assert_eq!(c.values["title.clarity"], RatingValue::Positive);
    assert_eq!(c.provenance["title.clarity"], Provenance::Adjudicated { reviewer: "cy".into() });
    assert_eq!(c.provenance["title.specific"], Provenance::Agreed);
    assert_eq!(score_lesson(&rubric, &c), Ok(2));

    let extra = Tiebreaks {
        reviewer: "cy".into(),
        values: [("title.clarity".to_owned(), RatingValue::Positive), ("title.specific".to_owned(), RatingValue::Negative)].into(),
    };
    assert_eq!(
        resolve_consensus(&rubric, &a, &b2, &extra),
        Err(ConsensusError::SuperfluousTiebreaks(vec!["title.specific".into()]))
    );

    let mut short = b.clone();
    short.values.remove("conclusion.alignment_with_lo");
    assert!(matches!(resolve_consensus(&rubric, &a, &short, &Tiebreaks::default()), Err(ConsensusError::Incomplete { .. })));
    let other = session("bo", "l2", &[], &rubric);
    assert!(matches!(resolve_consensus(&rubric, &a, &other, &Tiebreaks::default()), Err(ConsensusError::LessonMismatch(..))));
}

#[test]
fn score_extremes() {
    let rubric = Rubric::default();
    let all: Vec<&str> = rubric.ids().collect();
    let pos = session("a", "l", &all, &rubric);
    let rec = resolve_consensus(&rubric, &pos, &RatingSession { coder_id: "b".into(), ..pos.clone() }, &Tiebreaks::default()).unwrap();
    assert_eq!(score_lesson(&rubric, &rec), Ok(17));
    let neg = session("a", "l", &[], &rubric);
    let rec = resolve_consensus(&rubric, &neg, &RatingSession { coder_id: "b".into(), ..neg.clone() }, &Tiebreaks::default()).unwrap();
    assert_eq!(score_lesson(&rubric, &rec), Ok(0));
}

#[test]
fn kappa_over_stored_sessions() {
    let rubric = Rubric::default();
    let sessions = vec![
        session("bo", "l1", &["title.specific", "title.clarity"], &rubric),
        session("ann", "l1", &["title.specific", "title.clarity"], &rubric),
        session("ann", "l2", &["title.specific"], &rubric),
        session("bo", "l2", &["title.clarity"], &rubric),
        session("ann", "l3", &[], &rubric),
    ];
    let one = kappa_summary(&sessions, Some("l1")).unwrap();
    assert_eq!(one.kappa, 1.0);
    assert_eq!(one.table, ContingencyTable { a: 2, b: 0, c: 0, d: 15 });
    let pooled = kappa_summary(&sessions, None).unwrap();
    assert_eq!(pooled.lessons, ["l1", "l2"]);
    assert_eq!(pooled.table, ContingencyTable { a: 2, b: 1, c: 1, d: 30 });
    let want = as_f64(kappa_oracle(2, 1, 1, 30).unwrap());
    assert!((pooled.kappa - want).abs() < 1e-12);
    assert!(matches!(kappa_summary(&sessions, Some("l3")), Err(KappaError::CoderCount { found: 1, .. })));
}

const PUBLISHED_TOTALS: [[u32; 3]; 5] = [[12, 8, 12], [11, 11, 14], [13, 15, 16], [13, 15, 14], [13, 12, 15]];
const PUBLISHED_AVERAGES: [&str; 5] = ["10.67", "12.00", "14.67", "14.00", "13.33"];

/// Positive counts out of three, codes in rubric order, one row per strategy.
const PUBLISHED_CODE_COUNTS: [[u32; 17]; 5] = [
    [3, 1, 3, 2, 1, 3, 3, 0, 1, 3, 0, 3, 2, 1, 3, 3, 0],
    [3, 0, 3, 3, 1, 3, 3, 0, 2, 3, 1, 3, 3, 2, 3, 3, 0],
    [3, 2, 3, 3, 3, 3, 3, 1, 3, 3, 3, 3, 3, 2, 3, 3, 0],
    [3, 2, 3, 2, 2, 3, 3, 2, 3, 3, 1, 3, 3, 2, 3, 3, 1],
    [3, 1, 3, 2, 2, 3, 3, 2, 3, 3, 1, 3, 3, 2, 3, 3, 0],
];

#[test]
fn published_score_grid_averages() {
    let scores = read_scores_csv(std::fs::File::open(fixture("published_totals.csv")).unwrap()).unwrap();
    let table = aggregate_by_strategy(&scores, 17).unwrap();
    assert_eq!(table.lessons.len(), 3);
    for (i, col) in table.columns.iter().enumerate() {
        assert_eq!(col.strategy as usize, i + 1);
        assert_eq!(col.totals, PUBLISHED_TOTALS[i]);
        assert_eq!(col.average, PUBLISHED_AVERAGES[i]);
        let mean = col.totals.iter().sum::<u32>() as f64 / 3.0;
        assert!((col.average_value - mean).abs() <= 0.005);
    }
    let report = AggregateReport { scores: Some(table.clone()), code_counts: None };
    let text = report.render_text();
    assert!(text.lines().last().unwrap().split_whitespace().skip(1).eq(PUBLISHED_AVERAGES));
    // Recomputing from the same inputs gives the same report.
    assert_eq!(aggregate_by_strategy(&scores, 17).unwrap(), table);
}

#[test]
fn aggregate_edge_cases() {
    let zeros: Vec<LessonScore> = (1..=5)
        .flat_map(|k| ["a", "b", "c"].map(|l| LessonScore { lesson: l.into(), strategy: k, total: 0 }))
        .collect();
    let t = aggregate_by_strategy(&zeros, 17).unwrap();
    assert!(t.columns.iter().all(|c| c.average == "0.00"));

    let mut holes = zeros.clone();
    holes.remove(4);
    assert!(matches!(aggregate_by_strategy(&holes, 17), Err(AggregateError::MissingCells(m)) if m == ["b@2"]));
    let mut big = zeros.clone();
    big[0].total = 18;
    assert!(matches!(aggregate_by_strategy(&big, 17), Err(AggregateError::TotalTooLarge { .. })));
    assert_eq!(aggregate_by_strategy(&[], 17), Err(AggregateError::Empty));

    // Half-up at the third decimal: 2/8 = 0.25, 1/8 = 0.125 -> 0.13.
    assert_eq!(format_cents(average_cents(&[1, 0, 0, 0, 0, 0, 0, 0])), "0.13");
    assert_eq!(format_cents(average_cents(&[2, 1])), "1.50");
}

#[test]
fn published_consensus_reproduces_code_counts() {
    let rubric = Rubric::default();
    let entries = read_consensus_csv(std::fs::File::open(fixture("published_consensus.csv")).unwrap()).unwrap();
    assert_eq!(entries.len(), 15);
    let table = consensus_counts_by_code(&rubric, &entries).unwrap();
    assert_eq!(table.strategies, [1, 2, 3, 4, 5]);
    for (k, row) in PUBLISHED_CODE_COUNTS.iter().enumerate() {
        for (ci, want) in row.iter().enumerate() {
            let cell = table.rows[ci].cell(k as u8 + 1).unwrap();
            assert_eq!((cell.positive, cell.lessons), (*want, 3), "{} @ {}", table.rows[ci].code, k + 1);
        }
    }
    let pg = table.row("instruction.pedagogy_grounded").unwrap();
    assert_eq!(pg.cells.iter().filter(|c| c.positive == 3).map(|c| c.strategy).collect::<Vec<_>>(), [3]);
    let auth = table.row("conclusion.authenticity_of_references").unwrap();
    assert_eq!(auth.cells.iter().filter(|c| c.positive == 1).map(|c| c.strategy).collect::<Vec<_>>(), [4]);
    assert_eq!(auth.cell(1).unwrap().positive, 0);

    // The same records score to the per-lesson totals.
    let scores = scores_from_consensus(&rubric, &entries).unwrap();
    let from_consensus = aggregate_by_strategy(&scores, 17).unwrap();
    let from_file =
        aggregate_by_strategy(&read_scores_csv(std::fs::File::open(fixture("published_totals.csv")).unwrap()).unwrap(), 17).unwrap();
    assert_eq!(from_consensus, from_file);
    let cameras = entries.iter().find(|e| e.lesson == "turning-on-cameras" && e.strategy == 3).unwrap();
    assert_eq!(score_lesson(&rubric, &cameras.record), Ok(16));

    let report = AggregateReport { scores: Some(from_consensus), code_counts: Some(table) };
    let text = report.render_text();
    assert!(text.contains("Instruction / Pedagogy Grounded"));
    let json = serde_json::to_string(&report).unwrap();
    let back: AggregateReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn single_lesson_all_positive_counts() {
    let rubric = Rubric::default();
    let values: RatingValues = rubric.ids().map(|id| (id.to_owned(), RatingValue::Positive)).collect();
    let entry = ConsensusEntry {
        lesson: "x".into(),
        strategy: 2,
        record: ConsensusRecord { lesson_id: "x".into(), values, provenance: BTreeMap::new() },
    };
    let t = consensus_counts_by_code(&rubric, &[entry]).unwrap();
    assert!(t.rows.iter().all(|r| r.cells == [CodeCell { strategy: 2, positive: 1, lessons: 1 }]));
}

fn corpus() -> Vec<CorpusDocument> {
    load_manifest(&fixture("corpus/manifest.toml")).unwrap()
}

fn conclusion(citations: &[&str]) -> ConclusionSection {
    ConclusionSection {
        summary: "s".into(),
        references: citations.iter().map(|c| Reference::from_citation(*c)).collect(),
    }
}

#[test]
fn reference_verdicts() {
    let docs = corpus();
    let c = conclusion(&[
        "Brown, P., & Levinson, S. C. (1987). Politeness: Some universals in language usage. Cambridge University Press.",
        "Smith, J. (2019). Quantum gardening for marmots. Journal of Imaginary Results, 4, 1-2.",
    ]);
    let v = verify_references(&c, &docs);
    assert_eq!(v[0].verification, Verification::Verified);
    assert_eq!(v[0].evidence.score, 1.0);
    assert_eq!(v[0].evidence.doc_id.as_deref(), Some("brown1987"));
    assert_eq!(v[1].verification, Verification::Unverified);
    assert_eq!(v[1].evidence.score, 0.0);

    // Empty corpus verifies nothing.
    assert!(verify_references(&c, &[]).iter().all(|r| r.verification == Verification::Unverified));
}

#[test]
fn one_word_changed_out_of_ten() {
    let docs = corpus();
    // Ten distinct tokens in the corpus title; "outcomes" -> "results".
    let c = conclusion(&[
        "Chi, M. T. H., & Wylie, R. (2014). The ICAP framework: Linking cognitive engagement to active learning results. Educational Psychologist, 49(4), 219-243.",
        "Chi, M. T. H., & Wylie, R. (2014). The ICAP framework: Linking cognitive engagement to passive learning results. Educational Psychologist, 49(4), 219-243.",
        "Chi, M. T. H., & Wylie, R. (2016). The ICAP framework: Linking cognitive engagement to active learning outcomes. Educational Psychologist, 49(4), 219-243.",
        "Chi, M. T. H., & Wylie, R. (2015). The ICAP framework: Linking cognitive engagement to active learning outcomes. Educational Psychologist, 49(4), 219-243.",
    ]);
    let v = verify_references(&c, &docs);
    let nine_of_eleven = as_f64(Ratio::new(9, 11));
    assert!((v[0].evidence.score - nine_of_eleven).abs() < 1e-12);
    assert_eq!(v[0].verification, Verification::Verified);
    assert_eq!(v[0].evidence.doc_id.as_deref(), Some("castelli2021"));
    // Two words changed: 8/12.
    assert!((v[1].evidence.score - 8.0 / 12.0).abs() < 1e-12);
    assert_eq!(v[1].verification, Verification::Unverified);
    // Exact title, year two off / one off.
    assert_eq!(v[2].verification, Verification::Unverified);
    assert_eq!(v[3].verification, Verification::Verified);
}

#[test]
fn best_match_ties_break_by_doc_id() {
    // Brown & Levinson appears as a document and in two bibliographies.
    let docs = corpus();
    let mut reversed = docs.clone();
    reversed.reverse();
    let c = conclusion(&["Brown, P., & Levinson, S. C. (1987). Politeness: Some universals in language usage."]);
    let a = verify_references(&c, &docs);
    let b = verify_references(&c, &reversed);
    assert_eq!(a, b);
    assert_eq!(a[0].evidence.doc_id.as_deref(), Some("brown1987"));
}

fn session_pair() -> impl Strategy<Value = (RatingValues, RatingValues)> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..80).prop_map(|items| {
        let v = |b: bool| if b { RatingValue::Positive } else { RatingValue::Negative };
        let mut x = RatingValues::new();
        let mut y = RatingValues::new();
        for (i, (p, q)) in items.into_iter().enumerate() {
            x.insert(format!("c{i}"), v(p));
            y.insert(format!("c{i}"), v(q));
        }
        (x, y)
    })
}

fn flip(m: &RatingValues) -> RatingValues {
    m.iter().map(|(k, v)| (k.clone(), v.flipped())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kappa_symmetric_and_label_swap_invariant((x, y) in session_pair()) {
        let k = cohens_kappa(&x, &y);
        prop_assert_eq!(&k, &cohens_kappa(&y, &x));
        prop_assert_eq!(&k, &cohens_kappa(&flip(&x), &flip(&y)));
        let t = contingency(&x, &y).unwrap();
        let want = kappa_oracle(t.a as i64, t.b as i64, t.c as i64, t.d as i64).map(as_f64);
        match (k, want) {
            (Ok(k), Some(w)) => prop_assert!((k - w).abs() < 1e-9),
            (Err(_), None) => {}
            (k, w) => prop_assert!(false, "{:?} vs {:?}", k, w),
        }
    }
}

proptest! {
    #[test]
    fn score_is_monotone(bits in prop::collection::vec(any::<bool>(), 17), pick in 0usize..17) {
        let rubric = Rubric::default();
        let ids: Vec<String> = rubric.ids().map(str::to_owned).collect();
        let mut values: RatingValues = ids
            .iter()
            .zip(&bits)
            .map(|(id, b)| (id.clone(), if *b { RatingValue::Positive } else { RatingValue::Negative }))
            .collect();
        values.insert(ids[pick].clone(), RatingValue::Negative);
        let rec = ConsensusRecord { lesson_id: "l".into(), values: values.clone(), provenance: BTreeMap::new() };
        let before = score_lesson(&rubric, &rec).unwrap();
        let mut up = rec.clone();
        up.values.insert(ids[pick].clone(), RatingValue::Positive);
        prop_assert_eq!(score_lesson(&rubric, &up).unwrap(), before + 1);
    }

    #[test]
    fn verify_is_order_independent(seed in any::<u64>(), year in 1980i32..2025) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let docs = corpus();
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let c = conclusion(&[
            &format!("Author, A. ({year}). Politeness: Some universals in language usage."),
            &format!("Author, A. ({year}). Adaptive help seeking in learning."),
        ]);
        prop_assert_eq!(verify_references(&c, &docs), verify_references(&c, &shuffled));
    }
}
