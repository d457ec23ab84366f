//! Random generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use somd::corpus::{Dataset, LabelCatalog, LabelSet, Tag, TaggedSentence};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn composites() -> LabelSet {
    LabelCatalog::default().composites().clone()
}

/// A valid IOB2 sequence of exactly `len` tags: spans of length 1..=4 with
/// random labels, separated by runs of `O` (possibly empty, so adjacent
/// spans of the same label occur).
pub fn valid_tags(rng: &mut ChaCha8Rng, len: usize, labels: &LabelSet) -> Vec<Tag> {
    let mut tags = Vec::with_capacity(len);
    while tags.len() < len {
        if rng.gen_bool(0.45) {
            tags.push(Tag::Outside);
            continue;
        }
        let label = labels.labels().choose(rng).unwrap().clone();
        let n = rng.gen_range(1..=4).min(len - tags.len());
        tags.push(Tag::Begin(label.clone()));
        for _ in 1..n {
            tags.push(Tag::Inside(label.clone()));
        }
    }
    tags
}

/// Arbitrary tags over `labels`, usually not valid IOB2.
pub fn any_tags(rng: &mut ChaCha8Rng, len: usize, labels: &LabelSet) -> Vec<Tag> {
    (0..len)
        .map(|_| {
            let label = labels.labels().choose(rng).unwrap().clone();
            match rng.gen_range(0..3) {
                0 => Tag::Outside,
                1 => Tag::Begin(label),
                _ => Tag::Inside(label),
            }
        })
        .collect()
}

/// Tokens of 1..=11 characters from a small alphabet, so the same word recurs
/// across sentences and chunking splits words unevenly.
pub fn tokens(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    const ALPHABET: &[u8] = b"abcdeXY9-.";
    (0..len)
        .map(|_| {
            let n = rng.gen_range(1..=11);
            (0..n)
                .map(|_| *ALPHABET.choose(rng).unwrap() as char)
                .collect()
        })
        .collect()
}

pub fn sentence(
    rng: &mut ChaCha8Rng,
    max_len: usize,
    labels: &LabelSet,
    mention_prob: f64,
) -> TaggedSentence {
    let len = rng.gen_range(1..=max_len);
    let tags = if rng.gen_bool(mention_prob) {
        valid_tags(rng, len, labels)
    } else {
        vec![Tag::Outside; len]
    };
    TaggedSentence::new(tokens(rng, len), tags).unwrap()
}

pub fn dataset(
    rng: &mut ChaCha8Rng,
    max_sentences: usize,
    max_len: usize,
    labels: &LabelSet,
    mention_prob: f64,
) -> Dataset {
    let n = rng.gen_range(1..=max_sentences);
    let sentences = (0..n)
        .map(|_| sentence(rng, max_len, labels, mention_prob))
        .collect();
    Dataset::new(sentences, labels.clone()).unwrap()
}

/// Same tokens as `gold`, with arbitrary (often invalid) predicted tags that
/// partly copy the gold ones.
pub fn noisy_predictions(rng: &mut ChaCha8Rng, gold: &Dataset) -> Dataset {
    let labels = gold.labels();
    let sentences = gold
        .sentences()
        .iter()
        .map(|s| {
            let noise = any_tags(rng, s.len(), labels);
            let tags = s
                .tags()
                .iter()
                .zip(noise)
                .map(|(g, n)| if rng.gen_bool(0.6) { g.clone() } else { n })
                .collect();
            s.with_tags(tags).unwrap()
        })
        .collect();
    Dataset::new(sentences, labels.clone()).unwrap()
}

/// Span decoder written independently of the library, with
/// conlleval-style handling of invalid input: a span opens at every `B-X`
/// and at every `I-X` that does not continue an open `X` span.
pub fn oracle_spans(tags: &[Tag]) -> Vec<(usize, usize, String)> {
    let mut out: Vec<(usize, usize, String)> = Vec::new();
    let mut open: Option<String> = None;
    for (i, t) in tags.iter().enumerate() {
        match t {
            Tag::Outside => open = None,
            Tag::Begin(l) => {
                out.push((i, i, l.clone()));
                open = Some(l.clone());
            }
            Tag::Inside(l) => {
                if open.as_deref() == Some(l.as_str()) {
                    out.last_mut().unwrap().1 = i;
                } else {
                    out.push((i, i, l.clone()));
                    open = Some(l.clone());
                }
            }
        }
    }
    out
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub gold: usize,
    pub pred: usize,
    pub matched: usize,
}

/// Per-label and micro counts by materializing both span multisets per
/// sentence and intersecting them by exhaustive pairing.
pub fn oracle_counts(
    gold: &Dataset,
    pred: &Dataset,
) -> (OracleCounts, BTreeMap<String, OracleCounts>) {
    let mut per: BTreeMap<String, OracleCounts> = BTreeMap::new();
    for (g, p) in gold.sentences().iter().zip(pred.sentences()) {
        let gs = oracle_spans(g.tags());
        let ps = oracle_spans(p.tags());
        let mut used = vec![false; gs.len()];
        for s in &gs {
            per.entry(s.2.clone()).or_default().gold += 1;
        }
        for s in &ps {
            let c = per.entry(s.2.clone()).or_default();
            c.pred += 1;
            if let Some(j) = (0..gs.len()).find(|&j| !used[j] && gs[j] == *s) {
                used[j] = true;
                c.matched += 1;
            }
        }
    }
    let micro = per
        .values()
        .fold(OracleCounts::default(), |a, c| OracleCounts {
            gold: a.gold + c.gold,
            pred: a.pred + c.pred,
            matched: a.matched + c.matched,
        });
    (micro, per)
}

/// Occurrences of each distinct sentence.
pub fn multiset(sentences: &[TaggedSentence]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for s in sentences {
        *m.entry(format!("{s:?}")).or_insert(0) += 1;
    }
    m
}

pub fn t(s: &str) -> Tag {
    s.parse().unwrap()
}

pub struct GradientCheck {
    pub checked: usize,
    pub worst_relative_error: f64,
}

/// Compares the analytic gradient of one random instance against central
/// differences with step `h`, on every coordinate whose analytic magnitude
/// exceeds `floor`. Returns the first offending coordinate as an error.
pub fn gradient_check(
    seed: u64,
    h: f64,
    tolerance: f64,
    floor: f64,
) -> Result<GradientCheck, String> {
    use somd::tagger::{loss_and_gradient, Example, FeatureVector, ModelParams, FEATURE_SPACE};

    let mut r = rng(seed);
    let k = r.gen_range(2..=5);
    let classes: Vec<Tag> = composites().tag_classes().into_iter().take(k).collect();
    let universe: Vec<u32> = (0..r.gen_range(1..=50))
        .map(|_| r.gen_range(0..FEATURE_SPACE))
        .collect();
    let mut params = ModelParams::zeros(classes);
    for c in 0..k {
        params.bias_mut()[c] = r.gen_range(-1.0..1.0);
        for &f in &universe {
            params.set_weight(f, c, r.gen_range(-1.0..1.0));
        }
    }
    let n = r.gen_range(1..=6);
    let mut batch: Vec<Example> = (0..n)
        .map(|_| {
            let m = r.gen_range(1..=8);
            Example {
                features: FeatureVector::from_ids(
                    (0..m).map(|_| *universe.choose(&mut r).unwrap()).collect(),
                ),
                target: r.gen_bool(0.8).then(|| r.gen_range(0..k)),
            }
        })
        .collect();
    if batch.iter().all(|e| e.target.is_none()) {
        batch[0].target = Some(0);
    }
    let weights: Vec<f64> = (0..k).map(|_| r.gen_range(0.5..5.0)).collect();
    let l2 = if r.gen_bool(0.5) {
        r.gen_range(0.0..0.5)
    } else {
        0.0
    };

    let (_, grad) = loss_and_gradient(&params, &batch, &weights, l2).map_err(|e| e.to_string())?;
    let loss_at = |p: &ModelParams| loss_and_gradient(p, &batch, &weights, l2).unwrap().0;
    let mut report = GradientCheck {
        checked: 0,
        worst_relative_error: 0.0,
    };
    let mut compare = |what: String, analytic: f64, numeric: f64| -> Result<(), String> {
        if analytic.abs() <= floor {
            return Ok(());
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        report.checked += 1;
        report.worst_relative_error = report.worst_relative_error.max(rel);
        if rel > tolerance {
            return Err(format!(
                "seed {seed}: {what}: analytic {analytic:e}, numeric {numeric:e}, rel {rel:e}"
            ));
        }
        Ok(())
    };
    for c in 0..k {
        let mut plus = params.clone();
        plus.bias_mut()[c] += h;
        let mut minus = params.clone();
        minus.bias_mut()[c] -= h;
        compare(
            format!("bias[{c}]"),
            grad.bias[c],
            (loss_at(&plus) - loss_at(&minus)) / (2.0 * h),
        )?;
    }
    for &f in &universe {
        for c in 0..k {
            let w = params.weight(f, c);
            let mut plus = params.clone();
            plus.set_weight(f, c, w + h);
            let mut minus = params.clone();
            minus.set_weight(f, c, w - h);
            compare(
                format!("w[{f}][{c}]"),
                grad.weight(f, c),
                (loss_at(&plus) - loss_at(&minus)) / (2.0 * h),
            )?;
        }
    }
    Ok(report)
}

/// Two disjoint vocabularies: one always tagged `O`, the other always a
/// one-token span of a single label.
pub fn toy_separable_corpus(seed: u64, sentences: usize) -> Dataset {
    const PLAIN: &[&str] = &[
        "apple", "river", "stone", "cloud", "paper", "green", "table", "music",
    ];
    const TOOLS: &[&str] = &[
        "Linux", "Ubuntu", "FreeBSD", "CentOS", "Debian", "Fedora", "Gentoo", "Arch",
    ];
    let mut r = rng(seed);
    let label = "OperatingSystem_Usage";
    let out = (0..sentences)
        .map(|_| {
            let len = r.gen_range(2..=8);
            let (tokens, tags) = (0..len)
                .map(|_| {
                    if r.gen_bool(0.5) {
                        (
                            TOOLS.choose(&mut r).unwrap().to_string(),
                            Tag::Begin(label.into()),
                        )
                    } else {
                        (PLAIN.choose(&mut r).unwrap().to_string(), Tag::Outside)
                    }
                })
                .unzip();
            TaggedSentence::new(tokens, tags).unwrap()
        })
        .collect();
    Dataset::new(out, composites()).unwrap()
}
