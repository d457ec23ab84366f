//! Command-line front end. Each subcommand reads files, calls one library
//! operation and writes the result to `--out` (or standard output). All
//! diagnostics go to standard error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use somd::align::{
    align, import_piece_maps, render_aligned, segment_sentence, AlignConfig, AlignedSequence,
    SegmenterConfig, Strategy, WordPieceMap,
};
use somd::corpus::{
    dataset_stats, parse_conll, serialize_conll, Dataset, LabelCatalog, LabelSet, ParseMode, Tag,
};
use somd::duallabel::{merge_datasets, split_dataset, MergePolicy};
use somd::eval::exact_match_score;
use somd::experiment::{
    run_experiment, run_grid, standard_grid, ExperimentConfig, GridFile, TrainSettings,
};
use somd::rebalance::{
    adaptive_sample, aligned_class_frequencies, class_frequencies, class_weights, ClassWeights,
    SamplingConfig, ScalingMode, WeightScalingConfig,
};
use somd::tagger::{train, Tagger, TrainConfig};

#[derive(Parser)]
#[command(name = "somd", version, about = "Software mention detection toolkit")]
struct Cli {
    /// Label catalog file (default: the built-in catalog).
    #[arg(long, global = true, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Seed for randomized steps (sampling, training, experiment runs).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a CoNLL file for format and IOB2 errors.
    Validate { input: PathBuf },
    /// Tag, span and sentence counts as JSON.
    Stats { input: PathBuf },
    /// Piece-level training targets for a corpus.
    Align {
        input: PathBuf,
        #[command(flatten)]
        alignment: AlignArgs,
        /// Piece map file (`piece<TAB>word_index` lines) instead of the built-in segmenter.
        #[arg(long, value_name = "FILE")]
        piece_map: Option<PathBuf>,
    },
    /// Inverse-frequency class weights as JSON.
    Weights {
        input: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        w_max: f64,
        #[arg(long, value_enum, default_value_t = Mode::Rescale)]
        mode: Mode,
        /// Count piece-level targets under this strategy instead of words.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long, default_value_t = 4)]
        chunk: usize,
    },
    /// Oversample mention sentences and undersample all-O sentences.
    Sample {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        factor: u32,
        #[arg(long, default_value_t = 1.5)]
        multiplier: f64,
    },
    /// Split composite tags into software-type and mention-type corpora.
    Split { input: PathBuf },
    /// Merge software-type and mention-type predictions into composite tags.
    Merge {
        software: PathBuf,
        mention: PathBuf,
        #[arg(long, value_enum, default_value_t = Policy::Strict)]
        policy: Policy,
    },
    /// Train a tagger and write the model file given by --out.
    Train {
        input: PathBuf,
        #[command(flatten)]
        alignment: AlignArgs,
        /// Class weights JSON, as written by `weights`.
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// TOML file with `factor` and `multiplier` for adaptive sampling.
        #[arg(long, value_name = "FILE")]
        sample_config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Tag a corpus with a trained model.
    Predict {
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        /// CoNLL file (tags are ignored) or one token per line.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
    /// Exact-match span precision, recall and F1.
    Score {
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Include one row per label.
        #[arg(long)]
        per_class: bool,
        /// Also write the full report as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Run one experiment config into the directory given by --out.
    Run {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Run a grid of experiments, from a file or the standard eleven rows.
    Grid {
        /// Grid file with `[[experiment]]` tables.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["train", "test"])]
        config: Option<PathBuf>,
        /// Training corpus for the standard grid.
        #[arg(long, value_name = "FILE", requires = "test")]
        train: Option<PathBuf>,
        /// Test corpus for the standard grid.
        #[arg(long, value_name = "FILE", requires = "train")]
        test: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        lr: Option<f64>,
        /// Print the grid as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long, value_enum, default_value_t = StrategyArg::Selective)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 4)]
    chunk: usize,
    #[arg(long)]
    unified_bi_conversion: bool,
}

impl AlignArgs {
    fn config(&self) -> Result<AlignConfig> {
        Ok(AlignConfig {
            strategy: self.strategy.into(),
            segmenter: SegmenterConfig::new(self.chunk)?,
            unified_bi_conversion: self.unified_bi_conversion,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Unified,
    Selective,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Unified => Strategy::Unified,
            StrategyArg::Selective => Strategy::Selective,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rescale,
    Clip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Strict,
    SoftwarePrecedence,
}

impl From<Policy> for MergePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Strict => MergePolicy::Strict,
            Policy::SoftwarePrecedence => MergePolicy::SoftwarePrecedence,
        }
    }
}

struct Ctx {
    catalog: LabelCatalog,
    catalog_path: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Writes data to `--out`, or standard output without it.
    fn emit(&self, data: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_file(p, data),
            None => {
                std::io::stdout().write_all(data.as_bytes())?;
                Ok(())
            }
        }
    }

    fn out_required(&self, what: &str) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| anyhow!("--out {what} is required for this command"))
    }

    fn labels(&self) -> &LabelSet {
        self.catalog.composites()
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, data: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, data).with_context(|| format!("cannot write {}", path.display()))
}

fn load(path: &Path, labels: &LabelSet, mode: ParseMode) -> Result<Dataset> {
    parse_conll(&read_file(path)?, labels, mode).with_context(|| format!("{}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn validate(ctx: &Ctx, input: &Path) -> Result<()> {
    let d = load(input, ctx.labels(), ParseMode::Lenient)?;
    let violations = d.violations();
    for (sentence, v) in &violations {
        eprintln!("{}: sentence {}: {v}", input.display(), sentence + 1);
    }
    if !violations.is_empty() {
        bail!(
            "{} IOB2 violation(s) in {}",
            violations.len(),
            input.display()
        );
    }
    ctx.info(format!("{}: {} sentences, valid", input.display(), d.len()));
    Ok(())
}

fn align_cmd(ctx: &Ctx, input: &Path, args: &AlignArgs, piece_map: Option<&Path>) -> Result<()> {
    let d = load(input, ctx.labels(), ParseMode::Strict)?;
    let config = args.config()?;
    let maps: Vec<WordPieceMap> = match piece_map {
        Some(p) => {
            let words: Vec<Vec<String>> =
                d.sentences().iter().map(|s| s.tokens().to_vec()).collect();
            import_piece_maps(&read_file(p)?, &words).with_context(|| format!("{}", p.display()))?
        }
        None => d
            .sentences()
            .iter()
            .map(|s| segment_sentence(s, config.segmenter))
            .collect(),
    };
    let aligned = d
        .sentences()
        .iter()
        .zip(&maps)
        .map(|(s, m)| align(s, m, &config))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.emit(&render_aligned(&aligned))
}

fn weights_cmd(
    ctx: &Ctx,
    input: &Path,
    w_max: f64,
    mode: Mode,
    strategy: Option<StrategyArg>,
    chunk: usize,
) -> Result<()> {
    let d = load(input, ctx.labels(), ParseMode::Strict)?;
    let freq = match strategy {
        None => class_frequencies(&d),
        Some(s) => {
            let config = AlignConfig {
                strategy: s.into(),
                segmenter: SegmenterConfig::new(chunk)?,
                unified_bi_conversion: false,
            };
            let aligned = aligned_sequences(&d, &config)?;
            aligned_class_frequencies(&d.labels().tag_classes(), &aligned)
        }
    };
    let mode = match mode {
        Mode::Rescale => ScalingMode::Rescale,
        Mode::Clip => ScalingMode::Clip,
    };
    let w = class_weights(&freq, &WeightScalingConfig::new(1.0, w_max, mode)?)?;
    ctx.emit(&to_json(&w))
}

fn aligned_sequences(d: &Dataset, config: &AlignConfig) -> Result<Vec<AlignedSequence>> {
    Ok(d.sentences()
        .iter()
        .map(|s| align(s, &segment_sentence(s, config.segmenter), config))
        .collect::<Result<Vec<_>, _>>()?)
}

fn split_cmd(ctx: &Ctx, input: &Path) -> Result<()> {
    let d = load(input, ctx.labels(), ParseMode::Strict)?;
    let (software, mention) = split_dataset(&d, &ctx.catalog)?;
    let stem = input
        .file_stem()
        .ok_or_else(|| anyhow!("{} has no file name", input.display()))?
        .to_string_lossy();
    let dir = match &ctx.out {
        Some(d) => d.clone(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    for (suffix, data) in [("software", &software), ("mention", &mention)] {
        let path = dir.join(format!("{stem}.{suffix}.conll"));
        write_file(&path, &serialize_conll(data))?;
        ctx.info(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn merge_cmd(ctx: &Ctx, software: &Path, mention: &Path, policy: Policy) -> Result<()> {
    let sw = load(software, &ctx.catalog.software_set(), ParseMode::Lenient)?;
    let m = load(mention, &ctx.catalog.mention_set(), ParseMode::Lenient)?;
    let merged = merge_datasets(&sw, &m, policy.into(), &ctx.catalog)?;
    ctx.emit(&serialize_conll(&merged))
}

/// Composite, software-type or mention-type labels, whichever the corpus
/// uses.
fn detect_labels(catalog: &LabelCatalog, text: &str) -> LabelSet {
    let sets = [
        catalog.composites().clone(),
        catalog.software_set(),
        catalog.mention_set(),
    ];
    sets.iter()
        .find(|set| parse_conll(text, set, ParseMode::Lenient).is_ok())
        .unwrap_or(&sets[0])
        .clone()
}

fn sample_config(path: &Path, seed: u64) -> Result<SamplingConfig> {
    let table: toml::Table = read_file(path)?
        .parse()
        .with_context(|| format!("{}", path.display()))?;
    let factor = table
        .get("factor")
        .and_then(toml::Value::as_integer)
        .ok_or_else(|| anyhow!("{}: integer `factor` missing", path.display()))?;
    let multiplier = match table.get("multiplier") {
        Some(toml::Value::Float(f)) => *f,
        Some(toml::Value::Integer(i)) => *i as f64,
        _ => bail!("{}: number `multiplier` missing", path.display()),
    };
    let factor =
        u32::try_from(factor).map_err(|_| anyhow!("{}: factor out of range", path.display()))?;
    Ok(SamplingConfig::new(factor, multiplier, seed)?)
}

struct TrainArgs<'a> {
    input: &'a Path,
    alignment: &'a AlignArgs,
    weights: Option<&'a Path>,
    sample_config: Option<&'a Path>,
    epochs: Option<u32>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    l2: Option<f64>,
    window: Option<usize>,
}

fn train_cmd(ctx: &Ctx, a: TrainArgs<'_>) -> Result<()> {
    let out = ctx.out_required("MODEL")?;
    let text = read_file(a.input)?;
    let labels = detect_labels(&ctx.catalog, &text);
    let mut d = parse_conll(&text, &labels, ParseMode::Strict)
        .with_context(|| format!("{}", a.input.display()))?;
    let seed = ctx.seed.unwrap_or(0);
    if let Some(p) = a.sample_config {
        d = adaptive_sample(&d, &sample_config(p, seed)?)?;
        ctx.info(format!("sampled {} sentences", d.len()));
    }
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        learning_rate: a.lr.unwrap_or(defaults.learning_rate),
        seed,
        class_weights: match a.weights {
            Some(p) => Some(
                serde_json::from_str::<ClassWeights>(&read_file(p)?).with_context(|| {
                    format!("{}: expected a JSON object of class weights", p.display())
                })?,
            ),
            None => None,
        },
        l2: a.l2.unwrap_or(defaults.l2),
        context_window: a.window.unwrap_or(defaults.context_window),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
    };
    let alignment = a.alignment.config()?;
    let aligned = aligned_sequences(&d, &alignment)?;
    let params = train(&aligned, &labels, &config)?;
    ctx.info(format!(
        "trained on {} sentences, {} classes",
        d.len(),
        params.num_classes()
    ));
    let tagger = Tagger {
        params,
        train_config: config,
        alignment: Some(alignment),
    };
    write_file(out, &tagger.to_json()?)
}

/// Accepts CoNLL or bare token-per-line input.
fn tokens_only(text: &str) -> String {
    text.lines()
        .map(|l| {
            let l = l.strip_suffix('\r').unwrap_or(l);
            if l.is_empty() || l.contains('\t') {
                format!("{l}\n")
            } else {
                format!("{l}\tO\n")
            }
        })
        .collect()
}

fn predict_cmd(ctx: &Ctx, model: &Path, input: &Path) -> Result<()> {
    let tagger =
        Tagger::from_json(&read_file(model)?).with_context(|| format!("{}", model.display()))?;
    let classes: Vec<Tag> = tagger.params.classes().to_vec();
    let labels = [
        ctx.catalog.composites().clone(),
        ctx.catalog.software_set(),
        ctx.catalog.mention_set(),
    ]
    .into_iter()
    .find(|set| classes.iter().all(|c| set.check_tag(c)))
    .ok_or_else(|| anyhow!("{}: model classes are not in the catalog", model.display()))?;
    let text = tokens_only(&read_file(input)?);
    let d = parse_conll(&text, &labels, ParseMode::Lenient)
        .or_else(|_| {
            // Input tags may come from another label set; only tokens matter.
            let stripped: String = text
                .lines()
                .map(|l| match l.split_once('\t') {
                    Some((w, _)) => format!("{w}\tO\n"),
                    None => format!("{l}\n"),
                })
                .collect();
            parse_conll(&stripped, &labels, ParseMode::Lenient)
        })
        .with_context(|| format!("{}", input.display()))?;
    let mut out = Vec::with_capacity(d.len());
    for s in d.sentences() {
        let tags = tagger.predict(s.tokens(), &labels, None)?;
        out.push(s.with_tags(tags)?);
    }
    ctx.emit(&serialize_conll(&Dataset::new(out, labels)?))
}

fn score_cmd(
    ctx: &Ctx,
    gold: &Path,
    pred: &Path,
    per_class: bool,
    json: Option<&Path>,
) -> Result<()> {
    let text = read_file(gold)?;
    let labels = detect_labels(&ctx.catalog, &text);
    let g = parse_conll(&text, &labels, ParseMode::Strict)
        .with_context(|| format!("{}", gold.display()))?;
    let p = load(pred, &labels, ParseMode::Lenient)?;
    let report = exact_match_score(&g, &p)?;
    if let Some(path) = json {
        write_file(path, &to_json(&report))?;
    }
    ctx.emit(&report.render_table(per_class))
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Applies the global --seed and --catalog to a loaded config.
fn apply_globals(ctx: &Ctx, mut c: ExperimentConfig) -> Result<ExperimentConfig> {
    if let Some(seed) = ctx.seed {
        c.seed = seed;
    }
    if c.catalog.is_none() {
        if let Some(p) = &ctx.catalog_path {
            c.catalog = Some(std::path::absolute(p)?);
        }
    }
    Ok(c)
}

fn run_cmd(ctx: &Ctx, config: &Path) -> Result<()> {
    let out = ctx.out_required("DIR")?;
    let c = apply_globals(ctx, ExperimentConfig::load(config)?)?;
    let outcome = run_experiment(&c, &base_dir(config), out)?;
    ctx.info(format!("wrote {}", out.display()));
    ctx.emit_summary(&outcome.report.render_table(false))
}

impl Ctx {
    /// Human-readable summaries go to standard output unless quiet.
    fn emit_summary(&self, text: &str) -> Result<()> {
        if !self.quiet {
            std::io::stdout().write_all(text.as_bytes())?;
        }
        Ok(())
    }
}

struct GridArgs<'a> {
    config: Option<&'a Path>,
    train: Option<&'a Path>,
    test: Option<&'a Path>,
    epochs: Option<u32>,
    lr: Option<f64>,
    print_config: bool,
}

fn grid_cmd(ctx: &Ctx, a: GridArgs<'_>) -> Result<()> {
    let (configs, base) = match (a.config, a.train, a.test) {
        (Some(path), _, _) => (GridFile::load(path)?.experiment, base_dir(path)),
        (None, Some(train), Some(test)) => {
            let defaults = TrainSettings::default();
            let settings = TrainSettings {
                epochs: a.epochs.unwrap_or(defaults.epochs),
                learning_rate: a.lr.unwrap_or(defaults.learning_rate),
                ..defaults
            };
            let grid = standard_grid(
                &std::path::absolute(train)?,
                &std::path::absolute(test)?,
                ctx.seed.unwrap_or(0),
                &settings,
            );
            (grid, PathBuf::new())
        }
        _ => bail!("give either --config FILE or both --train and --test"),
    };
    let configs = configs
        .into_iter()
        .map(|c| apply_globals(ctx, c))
        .collect::<Result<Vec<_>>>()?;
    if a.print_config {
        return ctx.emit(
            &GridFile {
                experiment: configs,
            }
            .to_toml(),
        );
    }
    let out = ctx.out_required("DIR")?;
    ctx.info(format!("running {} experiments", configs.len()));
    let summary = run_grid(&configs, &base, out)?;
    for row in &summary.rows {
        if let Some(e) = &row.error {
            eprintln!("{}: {e}", row.method);
        }
    }
    ctx.emit_summary(&summary.to_tsv())?;
    if summary.rows.iter().any(|r| r.error.is_some()) {
        bail!(
            "some grid rows failed; see {}",
            out.join("summary.tsv").display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let catalog = match &cli.catalog {
        Some(p) => {
            LabelCatalog::parse(&read_file(p)?).with_context(|| format!("{}", p.display()))?
        }
        None => LabelCatalog::default(),
    };
    let ctx = Ctx {
        catalog,
        catalog_path: cli.catalog,
        seed: cli.seed,
        out: cli.out,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Validate { input } => validate(&ctx, input),
        Command::Stats { input } => {
            let d = load(input, ctx.labels(), ParseMode::Lenient)?;
            ctx.emit(&to_json(&dataset_stats(&d)))
        }
        Command::Align {
            input,
            alignment,
            piece_map,
        } => align_cmd(&ctx, input, alignment, piece_map.as_deref()),
        Command::Weights {
            input,
            w_max,
            mode,
            strategy,
            chunk,
        } => weights_cmd(&ctx, input, *w_max, *mode, *strategy, *chunk),
        Command::Sample {
            input,
            factor,
            multiplier,
        } => {
            let d = load(input, ctx.labels(), ParseMode::Strict)?;
            let config = SamplingConfig::new(*factor, *multiplier, ctx.seed.unwrap_or(0))?;
            let sampled = adaptive_sample(&d, &config)?;
            ctx.info(format!("{} -> {} sentences", d.len(), sampled.len()));
            ctx.emit(&serialize_conll(&sampled))
        }
        Command::Split { input } => split_cmd(&ctx, input),
        Command::Merge {
            software,
            mention,
            policy,
        } => merge_cmd(&ctx, software, mention, *policy),
        Command::Train {
            input,
            alignment,
            weights,
            sample_config,
            epochs,
            lr,
            batch_size,
            l2,
            window,
        } => train_cmd(
            &ctx,
            TrainArgs {
                input,
                alignment,
                weights: weights.as_deref(),
                sample_config: sample_config.as_deref(),
                epochs: *epochs,
                lr: *lr,
                batch_size: *batch_size,
                l2: *l2,
                window: *window,
            },
        ),
        Command::Predict { model, input } => predict_cmd(&ctx, model, input),
        Command::Score {
            gold,
            pred,
            per_class,
            json,
        } => score_cmd(&ctx, gold, pred, *per_class, json.as_deref()),
        Command::Run { config } => run_cmd(&ctx, config),
        Command::Grid {
            config,
            train,
            test,
            epochs,
            lr,
            print_config,
        } => grid_cmd(
            &ctx,
            GridArgs {
                config: config.as_deref(),
                train: train.as_deref(),
                test: test.as_deref(),
                epochs: *epochs,
                lr: *lr,
                print_config: *print_config,
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
