//! A sparse linear token classifier trained with class-weighted softmax
//! cross-entropy.
//!
//! Features are strings from a fixed template (token identity, shape, affixes
//! and a window of neighbours) hashed into a `2^20` space with 64-bit FNV-1a,
//! folded to 20 bits. Collisions are accepted.
//!
//! The loss over a batch is the weighted mean
//!
//! ```text
//! L = sum_i w(y_i) * -log softmax(s_i)[y_i] / sum_i w(y_i)  +  l2/2 * |W_active|^2
//! ```
//!
//! where `W_active` are the weight rows of features present in the batch.
//! Positions whose target is `Ignore` are dropped before the loss is formed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{
    project_to_words, segment_words, AlignConfig, AlignError, AlignedSequence, WordPieceMap,
};
use crate::corpus::{repair_iob2, LabelSet, Tag};
use crate::rebalance::ClassWeights;

pub const FEATURE_BITS: u32 = 20;
pub const FEATURE_SPACE: u32 = 1 << FEATURE_BITS;
pub const MODEL_FORMAT: &str = "somd-linear-tagger";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("no labeled positions left after dropping ignored targets")]
    EmptyBatchAfterFiltering,
    #[error("training data has no labeled positions")]
    EmptySupervision,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("tag {0} is not part of the label set")]
    UnknownTag(String),
    #[error("model class {0} is not part of the label set used for prediction")]
    IncompatibleTagSet(String),
    #[error("{0} class weights for {1} classes")]
    WeightCount(usize, usize),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TaggerError> = std::result::Result<T, E>;

/// 64-bit FNV-1a, xor-folded to [`FEATURE_BITS`] bits.
pub fn feature_hash(feature: &str) -> u32 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in feature.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ((h ^ (h >> 32)) as u32) & (FEATURE_SPACE - 1)
}

/// Orthographic shape: upper → `X`, lower → `x`, digit → `d`, other kept.
pub fn word_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

fn prefix(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn suffix(s: &str, n: usize) -> String {
    let chars: Vec<char> = s.chars().collect();
    chars[chars.len().saturating_sub(n)..].iter().collect()
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";

/// The feature template, before hashing.
pub fn feature_strings(tokens: &[String], position: usize, window: usize) -> Vec<String> {
    let tok = &tokens[position];
    let lower = tok.to_lowercase();
    let mut out = vec![
        format!("id={lower}"),
        format!("shape={}", word_shape(tok)),
        format!("pre3={}", prefix(&lower, 3)),
        format!("suf3={}", suffix(&lower, 3)),
    ];
    if position == 0 {
        out.push("bos".to_owned());
    }
    if position + 1 == tokens.len() {
        out.push("eos".to_owned());
    }
    let w = window as isize;
    for offset in -w..=w {
        if offset == 0 {
            continue;
        }
        let j = position as isize + offset;
        let value = if j < 0 {
            BOS.to_owned()
        } else if j as usize >= tokens.len() {
            EOS.to_owned()
        } else {
            tokens[j as usize].to_lowercase()
        };
        out.push(format!("w[{offset:+}]={value}"));
    }
    out
}

/// Sorted, duplicate-free hashed feature ids, each with implicit value 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    ids: Vec<u32>,
}

impl FeatureVector {
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        FeatureVector { ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.ids.binary_search(&feature_hash(feature)).is_ok()
    }
}

pub fn extract_features(tokens: &[String], position: usize, window: usize) -> FeatureVector {
    FeatureVector::from_ids(
        feature_strings(tokens, position, window)
            .iter()
            .map(|f| feature_hash(f))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub class_weights: Option<ClassWeights>,
    pub l2: f64,
    pub context_window: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 4,
            learning_rate: 2e-4,
            seed: 0,
            class_weights: None,
            l2: 0.0,
            context_window: 2,
            batch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TaggerError::InvalidConfig(m.to_owned()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        Ok(())
    }
}

/// Sparse weights (feature id → one weight per class) and per-class biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    classes: Vec<Tag>,
    weights: BTreeMap<u32, Vec<f64>>,
    bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(classes: Vec<Tag>) -> Self {
        let k = classes.len();
        ModelParams {
            classes,
            weights: BTreeMap::new(),
            bias: vec![0.0; k],
        }
    }

    pub fn classes(&self) -> &[Tag] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weights(&self) -> &BTreeMap<u32, Vec<f64>> {
        &self.weights
    }

    /// Weight of `feature` for `class`; absent rows are zero.
    pub fn weight(&self, feature: u32, class: usize) -> f64 {
        self.weights.get(&feature).map_or(0.0, |row| row[class])
    }

    pub fn set_weight(&mut self, feature: u32, class: usize, value: f64) {
        let k = self.classes.len();
        self.weights.entry(feature).or_insert_with(|| vec![0.0; k])[class] = value;
    }

    pub fn scores(&self, features: &FeatureVector) -> Vec<f64> {
        let mut s = self.bias.clone();
        for id in features.ids() {
            if let Some(row) = self.weights.get(id) {
                for (acc, w) in s.iter_mut().zip(row) {
                    *acc += w;
                }
            }
        }
        s
    }

    pub fn probabilities(&self, features: &FeatureVector) -> Vec<f64> {
        softmax(&self.scores(features))
    }

    /// Highest-scoring class; ties go to the lowest class index.
    pub fn argmax(&self, features: &FeatureVector) -> usize {
        argmax(&self.scores(features))
    }

    fn apply(&mut self, grad: &Gradient, lr: f64) {
        let k = self.classes.len();
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
        for (id, g_row) in &grad.weights {
            let row = self.weights.entry(*id).or_insert_with(|| vec![0.0; k]);
            for (w, g) in row.iter_mut().zip(g_row) {
                *w -= lr * g;
            }
        }
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// One supervised position. `target` is a class index, `None` for ignored
/// pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: BTreeMap<u32, Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Gradient {
    pub fn weight(&self, feature: u32, class: usize) -> f64 {
        self.weights.get(&feature).map_or(0.0, |row| row[class])
    }
}

/// Weighted-mean cross-entropy and its gradient. `class_weights[k]` is the
/// weight of class index `k`.
pub fn loss_and_gradient(
    params: &ModelParams,
    batch: &[Example],
    class_weights: &[f64],
    l2: f64,
) -> Result<(f64, Gradient)> {
    let k = params.num_classes();
    if class_weights.len() != k {
        return Err(TaggerError::WeightCount(class_weights.len(), k));
    }
    let labeled: Vec<(&FeatureVector, usize)> = batch
        .iter()
        .filter_map(|e| e.target.map(|t| (&e.features, t)))
        .collect();
    if labeled.is_empty() {
        return Err(TaggerError::EmptyBatchAfterFiltering);
    }
    let total_weight: f64 = labeled.iter().map(|(_, y)| class_weights[*y]).sum();

    let mut loss = 0.0;
    let mut grad = Gradient {
        weights: BTreeMap::new(),
        bias: vec![0.0; k],
    };
    for (features, y) in labeled {
        let w = class_weights[y] / total_weight;
        let scores = params.scores(features);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        loss += w * (log_z - scores[y]);

        // d/ds_c = w * (p_c - [c == y])
        let delta: Vec<f64> = scores
            .iter()
            .enumerate()
            .map(|(c, s)| w * ((s - log_z).exp() - if c == y { 1.0 } else { 0.0 }))
            .collect();
        for (g, d) in grad.bias.iter_mut().zip(&delta) {
            *g += d;
        }
        for id in features.ids() {
            let row = grad.weights.entry(*id).or_insert_with(|| vec![0.0; k]);
            for (g, d) in row.iter_mut().zip(&delta) {
                *g += d;
            }
        }
    }
    if l2 > 0.0 {
        for (id, g_row) in grad.weights.iter_mut() {
            if let Some(w_row) = params.weights.get(id) {
                for (g, w) in g_row.iter_mut().zip(w_row) {
                    loss += 0.5 * l2 * w * w;
                    *g += l2 * w;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Classes present among the targets, in label-set class order.
pub fn training_classes(data: &[AlignedSequence], labels: &LabelSet) -> Result<Vec<Tag>> {
    let all = labels.tag_classes();
    let mut seen = vec![false; all.len()];
    for seq in data {
        for tag in seq.targets.iter().filter_map(|t| t.tag()) {
            let i = labels
                .class_index(tag)
                .ok_or_else(|| TaggerError::UnknownTag(tag.to_string()))?;
            seen[i] = true;
        }
    }
    Ok(all
        .into_iter()
        .zip(seen)
        .filter_map(|(t, s)| s.then_some(t))
        .collect())
}

fn class_weight_vector(classes: &[Tag], weights: Option<&ClassWeights>) -> Vec<f64> {
    classes
        .iter()
        .map(|c| weights.and_then(|w| w.get(&c.to_string())).unwrap_or(1.0))
        .collect()
}

/// Mini-batch SGD over the labeled positions of `data`, shuffled each epoch
/// with a generator seeded from `config.seed`.
pub fn train(
    data: &[AlignedSequence],
    labels: &LabelSet,
    config: &TrainConfig,
) -> Result<ModelParams> {
    config.validate()?;
    let classes = training_classes(data, labels)?;
    if classes.is_empty() {
        return Err(TaggerError::EmptySupervision);
    }
    let index_of = |t: &Tag| {
        classes
            .iter()
            .position(|c| c == t)
            .expect("collected above")
    };
    let mut examples = Vec::new();
    for seq in data {
        for (p, target) in seq.targets.iter().enumerate() {
            if let Some(tag) = target.tag() {
                examples.push(Example {
                    features: extract_features(&seq.pieces, p, config.context_window),
                    target: Some(index_of(tag)),
                });
            }
        }
    }
    let class_weights = class_weight_vector(&classes, config.class_weights.as_ref());
    let mut params = ModelParams::zeros(classes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (_, grad) = loss_and_gradient(&params, &batch, &class_weights, config.l2)?;
            params.apply(&grad, config.learning_rate);
        }
    }
    Ok(params)
}

/// Argmax class per token of `tokens`, no repair.
pub fn predict_raw(params: &ModelParams, tokens: &[String], window: usize) -> Vec<Tag> {
    (0..tokens.len())
        .map(|p| params.classes[params.argmax(&extract_features(tokens, p, window))].clone())
        .collect()
}

/// Word-level tags for `words`. With a piece map the model runs over the
/// pieces and predictions are projected back to words; either way the result
/// is repaired to valid IOB2.
pub fn predict_tags(
    params: &ModelParams,
    words: &[String],
    labels: &LabelSet,
    window: usize,
    map: Option<&WordPieceMap>,
) -> Result<Vec<Tag>> {
    if let Some(bad) = params
        .classes
        .iter()
        .find(|c| labels.class_index(c).is_none())
    {
        return Err(TaggerError::IncompatibleTagSet(bad.to_string()));
    }
    match map {
        Some(m) => {
            if m.words() != words {
                return Err(AlignError::WordMismatch.into());
            }
            Ok(project_to_words(
                &predict_raw(params, m.pieces(), window),
                m,
            )?)
        }
        None => Ok(repair_iob2(&predict_raw(params, words, window))),
    }
}

/// Trained parameters together with the settings needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagger {
    pub params: ModelParams,
    pub train_config: TrainConfig,
    /// Piece-level alignment used in training; `None` for word-level models.
    pub alignment: Option<AlignConfig>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    format_version: u32,
    classes: Vec<String>,
    bias: Vec<f64>,
    weights: Vec<(u32, Vec<f64>)>,
    train_config: TrainConfig,
    alignment: Option<AlignConfig>,
}

impl Tagger {
    /// Predicts word-level tags, segmenting with the training segmenter unless
    /// an explicit piece map is given.
    pub fn predict(
        &self,
        words: &[String],
        labels: &LabelSet,
        map: Option<&WordPieceMap>,
    ) -> Result<Vec<Tag>> {
        let window = self.train_config.context_window;
        match (map, &self.alignment) {
            (Some(m), _) => predict_tags(&self.params, words, labels, window, Some(m)),
            (None, Some(a)) => {
                let m = segment_words(words, a.segmenter);
                predict_tags(&self.params, words, labels, window, Some(&m))
            }
            (None, None) => predict_tags(&self.params, words, labels, window, None),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            format_version: MODEL_FORMAT_VERSION,
            classes: self.params.classes.iter().map(Tag::to_string).collect(),
            bias: self.params.bias.clone(),
            weights: self
                .params
                .weights
                .iter()
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            train_config: self.train_config.clone(),
            alignment: self.alignment,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        if probe.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(TaggerError::ModelFormat("not a tagger model file".into()));
        }
        let version = probe.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(TaggerError::ModelFormat(format!(
                "format version {version:?}, expected {MODEL_FORMAT_VERSION}"
            )));
        }
        let file: ModelFile = serde_json::from_value(probe)?;
        let k = file.classes.len();
        let classes = file
            .classes
            .iter()
            .map(|c| {
                c.parse::<Tag>()
                    .map_err(|e| TaggerError::ModelFormat(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if file.bias.len() != k || file.weights.iter().any(|(_, r)| r.len() != k) {
            return Err(TaggerError::ModelFormat(
                "row width does not match class count".into(),
            ));
        }
        Ok(Tagger {
            params: ModelParams {
                classes,
                weights: file.weights.into_iter().collect(),
                bias: file.bias,
            },
            train_config: file.train_config,
            alignment: file.alignment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::Target;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn features_template() {
        let t = toks("with Linux ,");
        let f = feature_strings(&t, 1, 1);
        for want in [
            "id=linux",
            "shape=Xxxxx",
            "suf3=nux",
            "pre3=lin",
            "w[-1]=with",
            "w[+1]=,",
        ] {
            assert!(f.iter().any(|x| x == want), "{want} missing from {f:?}");
        }
        let fv = extract_features(&t, 1, 1);
        assert!(fv.contains("id=linux"));
        assert!(fv.contains("suf3=nux"));

        let first = feature_strings(&t, 0, 1);
        assert!(first.iter().any(|x| x == "bos"));
        assert!(first.iter().any(|x| x == "w[-1]=<s>"));
        let last = feature_strings(&t, 2, 2);
        assert!(last.iter().any(|x| x == "w[+2]=</s>"));
        assert_eq!(extract_features(&t, 1, 2), extract_features(&t, 1, 2));
        assert_eq!(word_shape("Mac-OS-X2"), "Xxx-XX-Xd");
    }

    #[test]
    fn hash_is_stable() {
        // FNV-1a 64 of the empty string is the offset basis.
        let basis: u64 = 0xcbf2_9ce4_8422_2325;
        assert_eq!(
            feature_hash(""),
            ((basis ^ (basis >> 32)) as u32) & (FEATURE_SPACE - 1)
        );
        assert!(feature_hash("id=linux") < FEATURE_SPACE);
        assert_ne!(feature_hash("id=linux"), feature_hash("id=linus"));
    }

    fn example(ids: &[u32], target: Option<usize>) -> Example {
        Example {
            features: FeatureVector::from_ids(ids.to_vec()),
            target,
        }
    }

    #[test]
    fn zero_params_give_log_k() {
        for k in [2usize, 3, 7] {
            let params = ModelParams::zeros(vec![Tag::Outside; k]);
            let (loss, _) =
                loss_and_gradient(&params, &[example(&[1, 2], Some(0))], &vec![1.0; k], 0.0)
                    .unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_scale_cancels() {
        let mut params =
            ModelParams::zeros(vec![Tag::Outside, Tag::begin("A_M"), Tag::inside("A_M")]);
        params.set_weight(3, 1, 0.7);
        params.set_weight(4, 2, -0.3);
        let batch = [
            example(&[3], Some(1)),
            example(&[4], Some(0)),
            example(&[3, 4], Some(2)),
        ];
        let w = [1.0, 5.0, 2.5];
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let (a, ga) = loss_and_gradient(&params, &batch, &w, 0.0).unwrap();
        let (b, gb) = loss_and_gradient(&params, &batch, &w2, 0.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        for (x, y) in ga.bias.iter().zip(&gb.bias) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ignored_positions_are_inert() {
        let params = ModelParams::zeros(vec![Tag::Outside, Tag::begin("A_M")]);
        let w = [1.0, 3.0];
        let base = [example(&[1], Some(1)), example(&[2], None)];
        let moved = [example(&[1], Some(1)), example(&[9, 10, 11], None)];
        let (a, ga) = loss_and_gradient(&params, &base, &w, 0.0).unwrap();
        let (b, gb) = loss_and_gradient(&params, &moved, &w, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert!(!ga.weights.contains_key(&2));
        assert!(matches!(
            loss_and_gradient(&params, &[example(&[1], None)], &w, 0.0),
            Err(TaggerError::EmptyBatchAfterFiltering)
        ));
    }

    #[test]
    fn softmax_is_a_simplex() {
        let p = softmax(&[1000.0, 999.0, -5.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let params = ModelParams::zeros(vec![Tag::Outside, Tag::begin("A_M"), Tag::inside("A_M")]);
        let fv = extract_features(&toks("x"), 0, 1);
        assert_eq!(params.argmax(&fv), 0);
        let mut p = params.clone();
        p.bias_mut()[1] = 1.0;
        p.bias_mut()[2] = 1.0;
        assert_eq!(p.argmax(&fv), 1);
    }

    fn seq(pairs: &[(&str, &str)]) -> AlignedSequence {
        AlignedSequence::word_level(
            &crate::corpus::TaggedSentence::from_pairs(pairs.iter().copied()).unwrap(),
        )
    }

    fn labels() -> LabelSet {
        crate::corpus::LabelCatalog::default().composites().clone()
    }

    #[test]
    fn config_validation() {
        let data = [seq(&[("a", "O")])];
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, &labels(), &cfg),
            Err(TaggerError::InvalidConfig(_))
        ));
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&data, &labels(), &cfg).is_err());
        let empty = [AlignedSequence {
            pieces: toks("a"),
            targets: vec![Target::Ignore],
            strategy: crate::align::Strategy::Selective,
        }];
        assert!(matches!(
            train(&empty, &labels(), &TrainConfig::default()),
            Err(TaggerError::EmptySupervision)
        ));
    }

    #[test]
    fn training_on_outside_only_predicts_outside() {
        let data = [seq(&[("the", "O"), ("cat", "O")]), seq(&[("a", "O")])];
        let params = train(&data, &labels(), &TrainConfig::default()).unwrap();
        assert_eq!(params.classes(), &[Tag::Outside]);
        let out = predict_tags(&params, &toks("Linux runs R"), &labels(), 2, None).unwrap();
        assert!(out.iter().all(Tag::is_outside));
    }

    #[test]
    fn incompatible_tag_set() {
        let data = [seq(&[("R", "B-ProgrammingEnvironment_Usage")])];
        let params = train(&data, &labels(), &TrainConfig::default()).unwrap();
        let other = LabelSet::new(["Application"]).unwrap();
        assert!(matches!(
            predict_tags(&params, &toks("R"), &other, 2, None),
            Err(TaggerError::IncompatibleTagSet(_))
        ));
    }

    #[test]
    fn model_file_roundtrip_and_version_check() {
        let data = [seq(&[("R", "B-ProgrammingEnvironment_Usage"), ("x", "O")])];
        let params = train(&data, &labels(), &TrainConfig::default()).unwrap();
        let tagger = Tagger {
            params,
            train_config: TrainConfig::default(),
            alignment: Some(AlignConfig::default()),
        };
        let json = tagger.to_json().unwrap();
        assert_eq!(Tagger::from_json(&json).unwrap(), tagger);

        let bumped = json.replace("\"format_version\":1", "\"format_version\":2");
        assert!(matches!(
            Tagger::from_json(&bumped),
            Err(TaggerError::ModelFormat(_))
        ));
        assert!(Tagger::from_json("{\"format\":\"other\"}").is_err());
    }
}
