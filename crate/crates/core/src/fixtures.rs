//! Corpora bundled with the crate.
//!
//! Two annotated sentences (gold tags and a model's predictions) and a small
//! synthetic imbalanced corpus produced by [`crate::synth`].

use std::path::PathBuf;

use crate::corpus::{parse_conll, Dataset, LabelCatalog, ParseMode};
use crate::experiment::{standard_grid, ExperimentConfig, TrainSettings};
use crate::synth::SynthConfig;

pub const EXAMPLE1_GOLD: &str = include_str!("../fixtures/example1.gold.conll");
pub const EXAMPLE1_PRED: &str = include_str!("../fixtures/example1.pred.conll");
pub const MULTITOKEN_GOLD: &str = include_str!("../fixtures/multitoken.gold.conll");
pub const MULTITOKEN_PRED: &str = include_str!("../fixtures/multitoken.pred.conll");

pub const SYNTHETIC_TRAIN_FILE: &str = "synthetic_train.conll";
pub const SYNTHETIC_TEST_FILE: &str = "synthetic_test.conll";

/// Generator settings behind `synthetic_train.conll`.
pub const SYNTHETIC_TRAIN: SynthConfig = SynthConfig {
    sentences: 4000,
    mention_fraction: 0.05,
    seed: 1,
};

/// Generator settings behind `synthetic_test.conll`.
pub const SYNTHETIC_TEST: SynthConfig = SynthConfig {
    sentences: 2000,
    mention_fraction: 0.05,
    seed: 2,
};

pub const SYNTHETIC_GRID_SEED: u64 = 13;

/// Training settings for the bundled grid. Plain SGD at the library default
/// step size barely moves a freshly initialised model in a few epochs.
pub fn synthetic_train_settings() -> TrainSettings {
    TrainSettings {
        epochs: 6,
        learning_rate: 0.5,
        ..TrainSettings::default()
    }
}

/// The standard grid over the synthetic fixtures, with paths relative to
/// [`fixture_dir`].
pub fn synthetic_grid() -> Vec<ExperimentConfig> {
    standard_grid(
        SYNTHETIC_TRAIN_FILE.as_ref(),
        SYNTHETIC_TEST_FILE.as_ref(),
        SYNTHETIC_GRID_SEED,
        &synthetic_train_settings(),
    )
}

/// Directory holding the bundled fixture files.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load(text: &str, mode: ParseMode) -> Dataset {
    parse_conll(text, LabelCatalog::default().composites(), mode).expect("bundled fixture parses")
}

/// "Chaste can only be used with Linux ..." with its gold tags.
pub fn example1_gold() -> Dataset {
    load(EXAMPLE1_GOLD, ParseMode::Strict)
}

pub fn example1_pred() -> Dataset {
    load(EXAMPLE1_PRED, ParseMode::Lenient)
}

/// "... the Pipeline for estimating EPIStatic genetic effects ..." gold tags.
pub fn multitoken_gold() -> Dataset {
    load(MULTITOKEN_GOLD, ParseMode::Strict)
}

/// Predictions for the multi-token sentence; not valid IOB2.
pub fn multitoken_pred() -> Dataset {
    load(MULTITOKEN_PRED, ParseMode::Lenient)
}
