//! The bundled corpora: hand-counted expectations for the two annotated
//! sentences, and regeneration checks for the synthetic files.
//!
//! Set `SOMD_BLESS=1` to rewrite the generated fixture files.

use std::fs;
use std::path::Path;

use somd::corpus::{dataset_stats, serialize_conll, tags_to_spans, LabelCatalog, Span};
use somd::duallabel::{merge_datasets, split_dataset, MergePolicy};
use somd::eval::{exact_match_score, Confusion};
use somd::experiment::GridFile;
use somd::fixtures::{self, fixture_dir};
use somd::rebalance::class_frequencies;
use somd::synth::generate;

fn check_or_bless(path: &Path, expected: &str) {
    if std::env::var_os("SOMD_BLESS").is_some() {
        fs::write(path, expected).unwrap();
        return;
    }
    let actual = fs::read_to_string(path).unwrap();
    assert!(
        actual == expected,
        "{} is stale; rerun with SOMD_BLESS=1",
        path.display()
    );
}

#[test]
fn synthetic_corpora_match_the_generator() {
    let dir = fixture_dir();
    check_or_bless(
        &dir.join(fixtures::SYNTHETIC_TRAIN_FILE),
        &serialize_conll(&generate(&fixtures::SYNTHETIC_TRAIN)),
    );
    check_or_bless(
        &dir.join(fixtures::SYNTHETIC_TEST_FILE),
        &serialize_conll(&generate(&fixtures::SYNTHETIC_TEST)),
    );
}

#[test]
fn grid_file_matches_the_standard_grid() {
    let grid = GridFile {
        experiment: fixtures::synthetic_grid(),
    };
    let path = fixture_dir().join("grid.toml");
    check_or_bless(&path, &grid.to_toml());
    assert_eq!(GridFile::load(&path).unwrap(), grid);
}

#[test]
fn synthetic_train_is_heavily_imbalanced() {
    let d = generate(&fixtures::SYNTHETIC_TRAIN);
    let st = dataset_stats(&d);
    assert_eq!(st.sentences_all_o + st.sentences_with_mention, 4000);
    assert_eq!(st.sentences_with_mention, 200);
    assert!(st.o_fraction > 0.95);
}

#[test]
fn example1_counts() {
    let gold = fixtures::example1_gold();
    assert_eq!(gold.len(), 1);
    assert_eq!(gold.sentences()[0].len(), 37);
    let st = dataset_stats(&gold);
    assert_eq!(st.o_count(), 29);
    assert_eq!(st.non_o_count(), 8);
    assert_eq!(st.sentences_with_mention, 1);
    assert_eq!(st.token_counts["B-OperatingSystem_Mention"], 4);
    assert_eq!(st.token_counts["I-OperatingSystem_Mention"], 2);

    let freq = class_frequencies(&gold);
    assert_eq!(freq.total(), 37);
    assert_eq!(freq.get("B-PlugIn_Mention"), 1);
    assert_eq!(freq.get("B-Application_Usage"), 0);
}

#[test]
fn example1_spans() {
    let gold = fixtures::example1_gold();
    let spans = tags_to_spans(gold.sentences()[0].tags()).unwrap();
    let tokens = gold.sentences()[0].tokens();
    let text: Vec<(String, &str)> = spans
        .iter()
        .map(|s| (tokens[s.start..=s.end].join(" "), s.label.as_str()))
        .collect();
    assert_eq!(
        text,
        [
            ("Chaste".to_owned(), "PlugIn_Mention"),
            ("Linux".to_owned(), "OperatingSystem_Mention"),
            ("Linux".to_owned(), "OperatingSystem_Mention"),
            ("VirtualBox".to_owned(), "Application_Mention"),
            ("Windows".to_owned(), "OperatingSystem_Mention"),
            ("Mac OS X".to_owned(), "OperatingSystem_Mention"),
        ]
    );
}

#[test]
fn example1_score() {
    let report = exact_match_score(&fixtures::example1_gold(), &fixtures::example1_pred()).unwrap();
    assert_eq!(report.micro.gold_count, 6);
    assert_eq!(report.micro.pred_count, 5);
    assert_eq!(report.micro.match_count, 2);
    assert!((report.micro.precision - 0.4).abs() < 1e-12);
    assert!((report.micro.recall - 1.0 / 3.0).abs() < 1e-12);
    assert!((report.micro.f1 - 4.0 / 11.0).abs() < 1e-12);
    assert_eq!(
        report.confusions,
        [Confusion {
            gold_label: "OperatingSystem_Mention".into(),
            pred_label: "OperatingSystem_Usage".into(),
            count: 3,
        }]
    );
    assert_eq!(report.repairs_applied, 0);
}

#[test]
fn multitoken_prediction_is_repaired_and_misses() {
    let gold = fixtures::multitoken_gold();
    let pred = fixtures::multitoken_pred();
    assert_eq!(pred.violations().len(), 1);
    assert_eq!(
        tags_to_spans(gold.sentences()[0].tags()).unwrap(),
        [Span::new(13, 18, "Application_Creation")]
    );
    let report = exact_match_score(&gold, &pred).unwrap();
    assert_eq!(report.repairs_applied, 1);
    assert_eq!(report.micro.match_count, 0);
    assert_eq!(report.micro.pred_count, 2);
    assert!(report.confusions.is_empty());
}

#[test]
fn split_then_merge_restores_both_gold_sentences() {
    let c = LabelCatalog::default();
    for gold in [fixtures::example1_gold(), fixtures::multitoken_gold()] {
        let (sw, m) = split_dataset(&gold, &c).unwrap();
        assert_eq!(
            merge_datasets(&sw, &m, MergePolicy::Strict, &c).unwrap(),
            gold
        );
    }
}
