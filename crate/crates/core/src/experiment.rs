//! Declarative experiment runs and strategy grids.
//!
//! An experiment picks one value on each strategy axis (labeling, imbalance
//! handling, single or dual classifier), trains on a corpus, predicts a test
//! corpus and scores it. Configs are TOML files:
//!
//! ```toml
//! name = "Adaptive Sampling multiples@1.5"
//! seed = 13
//! train = "train.conll"
//! test = "test.conll"
//!
//! [labeling]
//! strategy = "selective"
//! chunk = 4
//!
//! [imbalance]
//! kind = "adaptive"
//! factor = 2
//! multiplier = 1.5
//!
//! [classifier]
//! kind = "single"
//!
//! [train_settings]
//! epochs = 4
//! learning_rate = 0.0002
//! ```
//!
//! Relative paths resolve against the directory of the config file. Every run
//! writes into its own directory:
//!
//! ```text
//! config.toml        canonical copy of the config
//! model.json         (or model.software.json + model.mention.json)
//! predictions.conll
//! report.json        scores plus a provenance block
//! run.log
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::{align, segment_sentence, AlignConfig, AlignError, SegmenterConfig, Strategy};
use crate::corpus::{
    parse_conll, serialize_conll, CorpusError, Dataset, LabelCatalog, LabelSet, ParseMode,
};
use crate::duallabel::{merge_datasets, split_dataset, DualLabelError, MergePolicy};
use crate::eval::{exact_match_score, EvalError, EvalReport};
use crate::rebalance::{
    adaptive_sample, aligned_class_frequencies, class_weights, RebalanceError, SamplingConfig,
    ScalingMode, WeightScalingConfig,
};
use crate::tagger::{train, Tagger, TaggerError, TrainConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Rebalance(#[from] RebalanceError),
    #[error(transparent)]
    DualLabel(#[from] DualLabelError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no experiments to run")]
    EmptyGrid,
}

impl ExperimentError {
    /// Short machine-readable kind, for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::FileNotFound(_) => "FileNotFound",
            ExperimentError::Io { .. } => "Io",
            ExperimentError::Config(_) => "Config",
            ExperimentError::Corpus { .. } => "Corpus",
            ExperimentError::Align(_) => "Align",
            ExperimentError::Rebalance(_) => "Rebalance",
            ExperimentError::DualLabel(_) => "DualLabel",
            ExperimentError::Tagger(_) => "Tagger",
            ExperimentError::Eval(_) => "Eval",
            ExperimentError::EmptyGrid => "EmptyGrid",
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelingConfig {
    pub strategy: Strategy,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    #[serde(default)]
    pub unified_bi_conversion: bool,
}

fn default_chunk() -> usize {
    SegmenterConfig::default().chunk
}

impl LabelingConfig {
    pub fn new(strategy: Strategy) -> Self {
        LabelingConfig {
            strategy,
            chunk: default_chunk(),
            unified_bi_conversion: false,
        }
    }

    pub fn align_config(&self) -> Result<AlignConfig> {
        Ok(AlignConfig {
            strategy: self.strategy,
            segmenter: SegmenterConfig::new(self.chunk)?,
            unified_bi_conversion: self.unified_bi_conversion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Imbalance {
    None,
    Weighted {
        w_max: f64,
        #[serde(default)]
        mode: ScalingMode,
    },
    Adaptive {
        factor: u32,
        multiplier: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Classifier {
    Single,
    Dual {
        #[serde(default)]
        policy: MergePolicy,
    },
}

/// Training knobs; the seed comes from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub context_window: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            l2: d.l2,
            context_window: d.context_window,
        }
    }
}

impl TrainSettings {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
            class_weights: None,
            l2: self.l2,
            context_window: self.context_window,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub train: PathBuf,
    pub test: PathBuf,
    /// Catalog file; the default catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Score this prediction file instead of training a model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    pub labeling: LabelingConfig,
    pub imbalance: Imbalance,
    pub classifier: Classifier,
    #[serde(default)]
    pub train_settings: TrainSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.labeling.align_config()?;
        match &self.imbalance {
            Imbalance::None => {}
            Imbalance::Weighted { w_max, mode } => {
                WeightScalingConfig::new(1.0, *w_max, *mode)?;
            }
            Imbalance::Adaptive { factor, multiplier } => {
                SamplingConfig::new(*factor, *multiplier, self.seed)?;
            }
        }
        self.train_settings.train_config(self.seed).validate()?;
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ExperimentError::FileNotFound(path.to_owned()),
        _ => ExperimentError::Io {
            path: path.to_owned(),
            source: e,
        },
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| ExperimentError::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

fn load_corpus(path: &Path, labels: &LabelSet, mode: ParseMode) -> Result<Dataset> {
    parse_conll(&read(path)?, labels, mode).map_err(|source| ExperimentError::Corpus {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: String,
    pub toolkit_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportFile<'a> {
    #[serde(flatten)]
    pub report: &'a EvalReport,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub predictions: Dataset,
    pub out_dir: PathBuf,
}

struct Stream {
    name: &'static str,
    train: Dataset,
}

/// Runs one experiment. Relative paths in `config` resolve against `base`;
/// artifacts go to `out_dir`, which is created if needed.
pub fn run_experiment(
    config: &ExperimentConfig,
    base: &Path,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let mut log = String::new();
    macro_rules! log {
        ($($arg:tt)*) => {{ let _ = writeln!(log, $($arg)*); }};
    }

    let catalog = match &config.catalog {
        Some(p) => LabelCatalog::parse(&read(&resolve(base, p))?).map_err(|source| {
            ExperimentError::Corpus {
                path: p.clone(),
                source,
            }
        })?,
        None => LabelCatalog::default(),
    };
    let labels = catalog.composites().clone();
    let train_path = resolve(base, &config.train);
    let test_path = resolve(base, &config.test);
    let train_set = load_corpus(&train_path, &labels, ParseMode::Strict)?;
    let test_set = load_corpus(&test_path, &labels, ParseMode::Strict)?;
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.to_owned(),
        source: e,
    })?;
    write(&out_dir.join("config.toml"), &config.to_toml())?;
    log!("experiment: {}", config.name);
    log!("config hash: {}", config.hash());
    log!("train sentences: {}", train_set.len());
    log!("test sentences: {}", test_set.len());

    let predictions = if let Some(p) = &config.predictions {
        log!("scoring injected predictions; no training");
        load_corpus(&resolve(base, p), &labels, ParseMode::Lenient)?
    } else {
        let train_set = match &config.imbalance {
            Imbalance::Adaptive { factor, multiplier } => {
                let sampled = adaptive_sample(
                    &train_set,
                    &SamplingConfig::new(*factor, *multiplier, config.seed)?,
                )?;
                log!(
                    "adaptive sampling: factor {factor}, multiplier {multiplier}, {} sentences",
                    sampled.len()
                );
                sampled
            }
            _ => train_set,
        };
        let streams = match &config.classifier {
            Classifier::Single => vec![Stream {
                name: "model",
                train: train_set,
            }],
            Classifier::Dual { .. } => {
                let (software, mention) = split_dataset(&train_set, &catalog)?;
                vec![
                    Stream {
                        name: "model.software",
                        train: software,
                    },
                    Stream {
                        name: "model.mention",
                        train: mention,
                    },
                ]
            }
        };
        let align_config = config.labeling.align_config()?;
        let mut stream_predictions = Vec::with_capacity(streams.len());
        for stream in &streams {
            let tagger = train_stream(stream, &align_config, config, &mut log)?;
            write(
                &out_dir.join(format!("{}.json", stream.name)),
                &tagger.to_json()?,
            )?;
            let stream_labels = stream.train.labels();
            let mut predicted = Vec::with_capacity(test_set.len());
            for s in test_set.sentences() {
                let tags = tagger.predict(s.tokens(), stream_labels, None)?;
                predicted.push(s.with_tags(tags).expect("one tag per token"));
            }
            stream_predictions.push(
                Dataset::new(predicted, stream_labels.clone())
                    .expect("model classes are in the label set"),
            );
        }
        match &config.classifier {
            Classifier::Single => stream_predictions.pop().expect("one stream"),
            Classifier::Dual { policy } => {
                log!("merging software and mention predictions ({policy})");
                merge_datasets(
                    &stream_predictions[0],
                    &stream_predictions[1],
                    *policy,
                    &catalog,
                )?
            }
        }
    };
    write(
        &out_dir.join("predictions.conll"),
        &serialize_conll(&predictions),
    )?;

    let report = exact_match_score(&test_set, &predictions)?;
    log!(
        "precision {:.4} recall {:.4} f1 {:.4}",
        report.micro.precision,
        report.micro.recall,
        report.micro.f1
    );
    let file = ReportFile {
        report: &report,
        provenance: Provenance {
            experiment: config.name.clone(),
            config_hash: config.hash(),
            toolkit_version: crate::VERSION.to_owned(),
        },
    };
    let json = serde_json::to_string_pretty(&file).expect("report serializes");
    write(&out_dir.join("report.json"), &(json + "\n"))?;
    write(&out_dir.join("run.log"), &log)?;
    Ok(ExperimentOutcome {
        report,
        predictions,
        out_dir: out_dir.to_owned(),
    })
}

fn train_stream(
    stream: &Stream,
    align_config: &AlignConfig,
    config: &ExperimentConfig,
    log: &mut String,
) -> Result<Tagger> {
    let aligned = stream
        .train
        .sentences()
        .iter()
        .map(|s| {
            align(
                s,
                &segment_sentence(s, align_config.segmenter),
                align_config,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut train_config = config.train_settings.train_config(config.seed);
    if let Imbalance::Weighted { w_max, mode } = &config.imbalance {
        let classes = stream.train.labels().tag_classes();
        let freq = aligned_class_frequencies(&classes, &aligned);
        let weights = class_weights(&freq, &WeightScalingConfig::new(1.0, *w_max, *mode)?)?;
        train_config.class_weights = Some(weights);
    }
    let _ = writeln!(
        log,
        "{}: {} sequences, {} labeled pieces",
        stream.name,
        aligned.len(),
        aligned.iter().map(|a| a.labeled_count()).sum::<usize>()
    );
    let params = train(&aligned, stream.train.labels(), &train_config)?;
    Ok(Tagger {
        params,
        train_config,
        alignment: Some(*align_config),
    })
}

/// One row of a grid summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub method: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub rows: Vec<GridRow>,
}

impl GridSummary {
    /// Tab-separated table: method, precision, recall, F1.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Method\tPrecision\tRecall\tF1 Score\n");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map_or_else(|| "ERROR".to_owned(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.method,
                cell(r.precision),
                cell(r.recall),
                cell(r.f1)
            );
        }
        out
    }
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    while s.contains("--") {
        s = s.replace("--", "-");
    }
    s.trim_matches('-').to_owned()
}

/// Directory used for row `index` of a grid.
pub fn row_dir(out_dir: &Path, index: usize, config: &ExperimentConfig) -> PathBuf {
    out_dir.join(format!("{:02}-{}", index + 1, slug(&config.name)))
}

/// Runs every config in its own directory under `out_dir`, in parallel
/// threads. A failing row is recorded and does not stop the others.
pub fn run_grid(configs: &[ExperimentConfig], base: &Path, out_dir: &Path) -> Result<GridSummary> {
    if configs.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let outcomes: Vec<Result<ExperimentOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .enumerate()
            .map(|(i, c)| scope.spawn(move || run_experiment(c, base, &row_dir(out_dir, i, c))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    let rows = configs
        .iter()
        .zip(outcomes)
        .map(|(c, o)| match o {
            Ok(o) => GridRow {
                method: c.name.clone(),
                precision: Some(o.report.micro.precision),
                recall: Some(o.report.micro.recall),
                f1: Some(o.report.micro.f1),
                error: None,
            },
            Err(e) => GridRow {
                method: c.name.clone(),
                precision: None,
                recall: None,
                f1: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let summary = GridSummary { rows };
    write(&out_dir.join("summary.tsv"), &summary.to_tsv())?;
    write(
        &out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub experiment: Vec<ExperimentConfig>,
}

impl GridFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: GridFile =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        for c in &grid.experiment {
            c.validate()?;
        }
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid serializes")
    }
}

/// The eleven-row strategy grid: two labeling strategies, then (with
/// selective labeling) three sampling multiples, four weight maxima, the dual
/// classifier alone and combined with sampling at 1.5.
pub fn standard_grid(
    train: &Path,
    test: &Path,
    seed: u64,
    settings: &TrainSettings,
) -> Vec<ExperimentConfig> {
    let row = |name: String, strategy: Strategy, imbalance: Imbalance, classifier: Classifier| {
        ExperimentConfig {
            name,
            seed,
            train: train.to_owned(),
            test: test.to_owned(),
            catalog: None,
            predictions: None,
            labeling: LabelingConfig::new(strategy),
            imbalance,
            classifier,
            train_settings: settings.clone(),
        }
    };
    let mut grid = vec![
        row(
            "Unified Labeling".into(),
            Strategy::Unified,
            Imbalance::None,
            Classifier::Single,
        ),
        row(
            "Selective Labeling".into(),
            Strategy::Selective,
            Imbalance::None,
            Classifier::Single,
        ),
    ];
    for m in crate::rebalance::STUDIED_MULTIPLIERS {
        grid.push(row(
            format!("Adaptive Sampling multiples@{m}"),
            Strategy::Selective,
            Imbalance::Adaptive {
                factor: 2,
                multiplier: m,
            },
            Classifier::Single,
        ));
    }
    for w in crate::rebalance::STUDIED_WEIGHT_MAXIMA {
        grid.push(row(
            format!("Weighted loss scaled@{w}"),
            Strategy::Selective,
            Imbalance::Weighted {
                w_max: w,
                mode: ScalingMode::Rescale,
            },
            Classifier::Single,
        ));
    }
    let dual = Classifier::Dual {
        policy: MergePolicy::Strict,
    };
    grid.push(row(
        "Dual-Classifier".into(),
        Strategy::Selective,
        Imbalance::None,
        dual.clone(),
    ));
    grid.push(row(
        "Dual-Classifier + Adaptive Sampling multiples@1.5".into(),
        Strategy::Selective,
        Imbalance::Adaptive {
            factor: 2,
            multiplier: 1.5,
        },
        dual,
    ));
    grid
}
