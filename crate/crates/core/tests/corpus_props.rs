mod common;

use common::*;
use proptest::prelude::*;

use somd::corpus::{
    dataset_stats, parse_conll, repair_iob2, serialize_conll, spans_to_tags, tags_to_spans,
    validate_iob2, CorpusError, Dataset, LabelCatalog, ParseMode, Tag,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conll_roundtrip(seed in any::<u64>()) {
        let d = dataset(&mut rng(seed), 8, 15, &composites(), 0.5);
        let back = parse_conll(&serialize_conll(&d), &composites(), ParseMode::Strict).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn span_roundtrip(seed in any::<u64>(), len in 1usize..=30) {
        let tags = valid_tags(&mut rng(seed), len, &composites());
        prop_assert!(validate_iob2(&tags).is_empty());
        let spans = tags_to_spans(&tags).unwrap();
        prop_assert_eq!(spans_to_tags(&spans, len).unwrap(), tags);
    }

    #[test]
    fn spans_sorted_disjoint_and_cover_non_o(seed in any::<u64>(), len in 1usize..=30) {
        let tags = valid_tags(&mut rng(seed), len, &composites());
        let spans = tags_to_spans(&tags).unwrap();
        for w in spans.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
        let mut covered = vec![false; len];
        for s in &spans {
            prop_assert!(s.start <= s.end && s.end < len);
            for c in &mut covered[s.start..=s.end] {
                *c = true;
            }
        }
        for (i, tag) in tags.iter().enumerate() {
            prop_assert_eq!(covered[i], !tag.is_outside());
        }
    }

    #[test]
    fn repair_is_idempotent_and_valid(seed in any::<u64>(), len in 0usize..=30) {
        let tags = any_tags(&mut rng(seed), len, &composites());
        let once = repair_iob2(&tags);
        prop_assert!(validate_iob2(&once).is_empty());
        prop_assert_eq!(repair_iob2(&once), once.clone());
        // Repair only ever rewrites I- to B- of the same label.
        for (a, b) in tags.iter().zip(&once) {
            prop_assert_eq!(a.label(), b.label());
        }
    }

    #[test]
    fn repair_is_identity_on_valid(seed in any::<u64>(), len in 0usize..=30) {
        let tags = valid_tags(&mut rng(seed), len, &composites());
        prop_assert_eq!(repair_iob2(&tags), tags);
    }

    #[test]
    fn repair_matches_conlleval_decoding(seed in any::<u64>(), len in 0usize..=30) {
        let tags = any_tags(&mut rng(seed), len, &composites());
        let lib: Vec<(usize, usize, String)> = tags_to_spans(&repair_iob2(&tags))
            .unwrap()
            .into_iter()
            .map(|s| (s.start, s.end, s.label))
            .collect();
        prop_assert_eq!(lib, oracle_spans(&tags));
    }

    #[test]
    fn stats_are_additive(a in any::<u64>(), b in any::<u64>()) {
        let x = dataset(&mut rng(a), 6, 12, &composites(), 0.4);
        let y = dataset(&mut rng(b), 6, 12, &composites(), 0.4);
        let (sx, sy, sxy) = (dataset_stats(&x), dataset_stats(&y), dataset_stats(&x.concat(&y)));
        prop_assert_eq!(sxy.sentences_all_o, sx.sentences_all_o + sy.sentences_all_o);
        prop_assert_eq!(sxy.sentences_with_mention, sx.sentences_with_mention + sy.sentences_with_mention);
        let mut tokens = sx.token_counts.clone();
        for (k, v) in &sy.token_counts {
            *tokens.entry(k.clone()).or_insert(0) += v;
        }
        prop_assert_eq!(&sxy.token_counts, &tokens);
        let mut spans = sx.span_counts.clone();
        for (k, v) in &sy.span_counts {
            *spans.entry(k.clone()).or_insert(0) += v;
        }
        prop_assert_eq!(&sxy.span_counts, &spans);
    }

    #[test]
    fn lenient_parse_records_what_strict_rejects(seed in any::<u64>(), len in 1usize..=12) {
        let mut r = rng(seed);
        let tags = any_tags(&mut r, len, &composites());
        let toks = tokens(&mut r, len);
        let text: String = toks.iter().zip(&tags).map(|(w, t)| format!("{w}\t{t}\n")).collect();
        let lenient = parse_conll(&text, &composites(), ParseMode::Lenient).unwrap();
        let violations = lenient.violations();
        prop_assert_eq!(violations.len(), validate_iob2(&tags).len());
        let strict = parse_conll(&text, &composites(), ParseMode::Strict);
        prop_assert_eq!(strict.is_err(), !violations.is_empty());
    }
}

#[test]
fn duplicating_a_dataset_doubles_counts() {
    let d = somd::fixtures::example1_gold();
    let s1 = dataset_stats(&d);
    let s2 = dataset_stats(&d.concat(&d));
    assert_eq!(s2.o_count(), 2 * s1.o_count());
    assert_eq!(s2.non_o_count(), 2 * s1.non_o_count());
    assert_eq!(s2.sentences_with_mention, 2);
    for (k, v) in &s1.span_counts {
        assert_eq!(s2.span_counts[k], 2 * v);
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let labels = LabelCatalog::default().composites().clone();
    match parse_conll(
        "Linux\tB-OperatingSystem_Usage\nis\n",
        &labels,
        ParseMode::Lenient,
    ) {
        Err(CorpusError::MalformedLine { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    match parse_conll("a\tO\n\nb\tB-Nope_Usage\n", &labels, ParseMode::Lenient) {
        Err(CorpusError::UnknownLabel { line, label }) => {
            assert_eq!(line, 3);
            assert_eq!(label, "Nope_Usage");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn custom_catalog_file() {
    let catalog =
        LabelCatalog::parse("# two by one\nsoftware:\nTool\nLibrary\n\nmention:\nUsage\n").unwrap();
    assert_eq!(
        catalog.composites().labels(),
        ["Tool_Usage", "Library_Usage"]
    );
    let d = parse_conll(
        "numpy\tB-Library_Usage\n",
        catalog.composites(),
        ParseMode::Strict,
    )
    .unwrap();
    assert_eq!(d.sentences()[0].tags(), [Tag::begin("Library_Usage")]);
    assert!(parse_conll(
        "numpy\tB-Application_Usage\n",
        catalog.composites(),
        ParseMode::Strict
    )
    .is_err());
    let again = LabelCatalog::parse(&catalog.to_catalog_text()).unwrap();
    assert_eq!(again, catalog);
}

#[test]
fn empty_dataset_serializes_to_nothing_and_is_not_parseable() {
    let d = Dataset::new(vec![], composites()).unwrap();
    assert_eq!(serialize_conll(&d), "");
    assert!(matches!(
        parse_conll("", &composites(), ParseMode::Lenient),
        Err(CorpusError::EmptySentence { .. })
    ));
}
