//! Class imbalance: frequency tables, scaled inverse-frequency class weights
//! and adaptive over/under-sampling of sentences.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignedSequence;
use crate::corpus::{Dataset, Tag, TaggedSentence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RebalanceError {
    #[error("every class count is zero")]
    AllZeroCounts,
    #[error("invalid weight range: need w_max > w_min > 0, got w_min={w_min}, w_max={w_max}")]
    InvalidWeightRange { w_min: f64, w_max: f64 },
    #[error("invalid sampling config: {0}")]
    InvalidSampling(String),
}

pub type Result<T, E = RebalanceError> = std::result::Result<T, E>;

/// Counts per tag class, keyed by the tag string (`O`, `B-x`, `I-x`).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ClassFrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl ClassFrequencyTable {
    /// Zero counts for every class of `classes`.
    pub fn with_classes<'a>(classes: impl IntoIterator<Item = &'a Tag>) -> Self {
        ClassFrequencyTable {
            counts: classes.into_iter().map(|t| (t.to_string(), 0)).collect(),
            total: 0,
        }
    }

    pub fn add(&mut self, tag: &Tag, n: u64) {
        *self.counts.entry(tag.to_string()).or_insert(0) += n;
        self.total += n;
    }

    pub fn get(&self, class: &str) -> u64 {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn merge(&self, other: &ClassFrequencyTable) -> ClassFrequencyTable {
        let mut out = self.clone();
        for (k, v) in &other.counts {
            *out.counts.entry(k.clone()).or_insert(0) += v;
        }
        out.total += other.total;
        out
    }
}

/// Word-level tag counts, with a zero entry for every class of the label set.
pub fn class_frequencies(dataset: &Dataset) -> ClassFrequencyTable {
    let classes = dataset.labels().tag_classes();
    let mut table = ClassFrequencyTable::with_classes(&classes);
    for s in dataset.sentences() {
        for tag in s.tags() {
            table.add(tag, 1);
        }
    }
    table
}

/// Piece-level target counts; `Ignore` targets are skipped.
pub fn aligned_class_frequencies<'a>(
    classes: impl IntoIterator<Item = &'a Tag>,
    aligned: &[AlignedSequence],
) -> ClassFrequencyTable {
    let mut table = ClassFrequencyTable::with_classes(classes);
    for seq in aligned {
        for tag in seq.targets.iter().filter_map(|t| t.tag()) {
            table.add(tag, 1);
        }
    }
    table
}

/// Unscaled inverse-frequency weights. Classes never observed cannot get a
/// finite weight and are listed in `unseen` instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawWeights {
    pub values: BTreeMap<String, f64>,
    pub unseen: Vec<String>,
}

/// `total / count` for every class with a non-zero count.
pub fn inverse_frequency_weights(freq: &ClassFrequencyTable) -> Result<RawWeights> {
    if freq.total == 0 {
        return Err(RebalanceError::AllZeroCounts);
    }
    let total = freq.total as f64;
    let mut values = BTreeMap::new();
    let mut unseen = Vec::new();
    for (class, &count) in &freq.counts {
        if count == 0 {
            unseen.push(class.clone());
        } else {
            values.insert(class.clone(), total / count as f64);
        }
    }
    Ok(RawWeights { values, unseen })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// Affine map of `[min raw, max raw]` onto `[w_min, w_max]`.
    #[default]
    Rescale,
    /// Clamp raw weights into `[w_min, w_max]`.
    Clip,
}

impl FromStr for ScalingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rescale" => Ok(ScalingMode::Rescale),
            "clip" => Ok(ScalingMode::Clip),
            other => Err(format!("unknown scaling mode {other:?}")),
        }
    }
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingMode::Rescale => "rescale",
            ScalingMode::Clip => "clip",
        })
    }
}

/// Upper weight bounds studied for the weighted loss.
pub const STUDIED_WEIGHT_MAXIMA: [f64; 4] = [25.0, 50.0, 100.0, 200.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightScalingConfig {
    pub w_min: f64,
    pub w_max: f64,
    pub mode: ScalingMode,
}

impl WeightScalingConfig {
    pub fn new(w_min: f64, w_max: f64, mode: ScalingMode) -> Result<Self> {
        if !(w_min > 0.0 && w_max > w_min && w_max.is_finite()) {
            return Err(RebalanceError::InvalidWeightRange { w_min, w_max });
        }
        Ok(WeightScalingConfig { w_min, w_max, mode })
    }

    pub fn rescale(w_max: f64) -> Result<Self> {
        Self::new(1.0, w_max, ScalingMode::Rescale)
    }
}

impl Default for WeightScalingConfig {
    fn default() -> Self {
        WeightScalingConfig {
            w_min: 1.0,
            w_max: 25.0,
            mode: ScalingMode::Rescale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassWeights {
    pub weights: BTreeMap<String, f64>,
}

impl ClassWeights {
    pub fn get(&self, class: &str) -> Option<f64> {
        self.weights.get(class).copied()
    }
}

pub fn scale_weights(raw: &RawWeights, config: &WeightScalingConfig) -> ClassWeights {
    let WeightScalingConfig { w_min, w_max, mode } = *config;
    let mut weights = BTreeMap::new();
    let lo = raw.values.values().copied().fold(f64::INFINITY, f64::min);
    let hi = raw
        .values
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    for (class, &r) in &raw.values {
        let w = match mode {
            ScalingMode::Clip => r.clamp(w_min, w_max),
            ScalingMode::Rescale if hi == lo => w_min,
            // Endpoints are pinned so they hit the bounds exactly.
            ScalingMode::Rescale if r == lo => w_min,
            ScalingMode::Rescale if r == hi => w_max,
            ScalingMode::Rescale => {
                let t = (r - lo) / (hi - lo);
                (w_min + t * (w_max - w_min)).clamp(w_min, w_max)
            }
        };
        weights.insert(class.clone(), w);
    }
    for class in &raw.unseen {
        weights.insert(class.clone(), w_max);
    }
    ClassWeights { weights }
}

/// Frequencies to scaled weights in one step.
pub fn class_weights(
    freq: &ClassFrequencyTable,
    config: &WeightScalingConfig,
) -> Result<ClassWeights> {
    Ok(scale_weights(&inverse_frequency_weights(freq)?, config))
}

/// Splits sentences into all-`O` (over-represented) and mention-bearing
/// (under-represented) ones, preserving order within each part.
pub fn partition_by_mentions(dataset: &Dataset) -> (Vec<TaggedSentence>, Vec<TaggedSentence>) {
    dataset
        .sentences()
        .iter()
        .cloned()
        .partition(TaggedSentence::is_all_outside)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub oversample_factor: u32,
    pub multiplier: f64,
    pub seed: u64,
}

/// Undersampling multiples studied for adaptive sampling.
pub const STUDIED_MULTIPLIERS: [f64; 3] = [1.0, 1.5, 3.0];

impl SamplingConfig {
    pub fn new(oversample_factor: u32, multiplier: f64, seed: u64) -> Result<Self> {
        let c = SamplingConfig {
            oversample_factor,
            multiplier,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversample_factor < 1 {
            return Err(RebalanceError::InvalidSampling(
                "oversample_factor must be at least 1".into(),
            ));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(RebalanceError::InvalidSampling(format!(
                "multiplier must be positive, got {}",
                self.multiplier
            )));
        }
        Ok(())
    }

    /// Number of all-`O` sentences kept for `under` mention sentences and
    /// `over` available all-`O` sentences.
    pub fn undersample_target(&self, under: usize, over: usize) -> usize {
        let oversampled = self.oversample_factor as usize * under;
        let target = (self.multiplier * oversampled as f64).floor() as usize;
        target.min(over)
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            oversample_factor: 2,
            multiplier: 1.5,
            seed: 0,
        }
    }
}

/// Repeats every mention sentence `oversample_factor` times, keeps a uniform
/// sample without replacement of the all-`O` sentences sized
/// `floor(multiplier * oversampled)` (capped at what is available), and
/// shuffles the union. Deterministic in `config.seed`.
pub fn adaptive_sample(dataset: &Dataset, config: &SamplingConfig) -> Result<Dataset> {
    config.validate()?;
    let (over, under) = partition_by_mentions(dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let keep = config.undersample_target(under.len(), over.len());
    let mut picked = index::sample(&mut rng, over.len(), keep).into_vec();
    picked.sort_unstable();

    let mut out: Vec<TaggedSentence> =
        Vec::with_capacity(under.len() * config.oversample_factor as usize + keep);
    for s in &under {
        for _ in 0..config.oversample_factor {
            out.push(s.clone());
        }
    }
    out.extend(picked.into_iter().map(|i| over[i].clone()));
    out.shuffle(&mut rng);

    Ok(Dataset::new(out, dataset.labels().clone()).expect("labels already checked"))
}
