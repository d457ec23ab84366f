//! Exact-match span scoring.
//!
//! A predicted span is a true positive iff a gold span of the same sentence
//! has the same start, end and label. Matching is one-to-one. Predicted tags
//! are repaired to valid IOB2 before spans are read off, and the number of
//! rewritten tags is reported. Every `0/0` ratio is taken as 0.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{repair_iob2_counted, tags_to_spans, Dataset, Span, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    SentenceCountMismatch { gold: usize, pred: usize },
    #[error("sentence {0}: gold and predicted tokens differ")]
    TokenMismatch(usize),
    #[error("sentence {sentence}: gold tags are not valid IOB2 ({violation})")]
    InvalidGold {
        sentence: usize,
        violation: Violation,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    pub match_count: usize,
}

impl Prf {
    pub fn from_counts(gold_count: usize, pred_count: usize, match_count: usize) -> Self {
        let precision = ratio(match_count, pred_count);
        let recall = ratio(match_count, gold_count);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            gold_count,
            pred_count,
            match_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Confusion {
    pub gold_label: String,
    pub pred_label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub micro: Prf,
    pub per_class: BTreeMap<String, Prf>,
    pub confusions: Vec<Confusion>,
    /// Predicted tags rewritten by IOB2 repair before scoring.
    pub repairs_applied: usize,
}

#[derive(Default)]
struct Counts {
    gold: usize,
    pred: usize,
    matched: usize,
}

type SpanPairs = Vec<(Vec<Span>, Vec<Span>)>;

/// Gold and (repaired) predicted spans per sentence, plus the repair count.
fn sentence_spans(gold: &Dataset, pred: &Dataset) -> Result<(SpanPairs, usize)> {
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCountMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut repairs = 0;
    let mut out = Vec::with_capacity(gold.len());
    for (i, (g, p)) in gold.sentences().iter().zip(pred.sentences()).enumerate() {
        if g.tokens() != p.tokens() {
            return Err(EvalError::TokenMismatch(i));
        }
        let gold_spans = tags_to_spans(g.tags()).map_err(|e| match e {
            crate::corpus::CorpusError::InvalidIob2 { violation, .. } => EvalError::InvalidGold {
                sentence: i,
                violation,
            },
            other => unreachable!("tags_to_spans only fails on IOB2: {other}"),
        })?;
        let (fixed, n) = repair_iob2_counted(p.tags());
        repairs += n;
        let pred_spans = tags_to_spans(&fixed).expect("repaired tags are valid");
        out.push((gold_spans, pred_spans));
    }
    Ok((out, repairs))
}

pub fn exact_match_score(gold: &Dataset, pred: &Dataset) -> Result<EvalReport> {
    let (spans, repairs) = sentence_spans(gold, pred)?;
    let mut per_label: BTreeMap<String, Counts> = BTreeMap::new();
    for (g, p) in &spans {
        // Multiset intersection of (start, end, label).
        let mut remaining: HashMap<&Span, usize> = HashMap::new();
        for s in g {
            *remaining.entry(s).or_insert(0) += 1;
            per_label.entry(s.label.clone()).or_default().gold += 1;
        }
        for s in p {
            let c = per_label.entry(s.label.clone()).or_default();
            c.pred += 1;
            if let Some(n) = remaining.get_mut(s).filter(|n| **n > 0) {
                *n -= 1;
                c.matched += 1;
            }
        }
    }
    let (mut gold_total, mut pred_total, mut tp) = (0, 0, 0);
    let per_class = per_label
        .into_iter()
        .map(|(label, c)| {
            gold_total += c.gold;
            pred_total += c.pred;
            tp += c.matched;
            (label, Prf::from_counts(c.gold, c.pred, c.matched))
        })
        .collect();
    Ok(EvalReport {
        micro: Prf::from_counts(gold_total, pred_total, tp),
        per_class,
        confusions: confusions_from_spans(&spans),
        repairs_applied: repairs,
    })
}

fn confusions_from_spans(spans: &[(Vec<Span>, Vec<Span>)]) -> Vec<Confusion> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (g, p) in spans {
        for gs in g {
            for ps in p {
                if gs.start == ps.start && gs.end == ps.end && gs.label != ps.label {
                    *counts
                        .entry((gs.label.clone(), ps.label.clone()))
                        .or_insert(0) += 1;
                }
            }
        }
    }
    let mut out: Vec<Confusion> = counts
        .into_iter()
        .map(|((gold_label, pred_label), count)| Confusion {
            gold_label,
            pred_label,
            count,
        })
        .collect();
    // Most frequent first, then by label for a stable order.
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.cmp(b)));
    out
}

/// Span pairs with identical boundaries but different labels, aggregated over
/// the corpus.
pub fn confusion_pairs(gold: &Dataset, pred: &Dataset) -> Result<Vec<Confusion>> {
    let (spans, _) = sentence_spans(gold, pred)?;
    Ok(confusions_from_spans(&spans))
}

impl EvalReport {
    /// Plain-text table; per-class rows only when `per_class` is set.
    pub fn render_table(&self, per_class: bool) -> String {
        let mut out = String::new();
        let width = self
            .per_class
            .keys()
            .map(String::len)
            .chain([5])
            .max()
            .unwrap_or(5)
            .max(5);
        out.push_str(&format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}\n",
            "label", "precision", "recall", "f1", "gold", "pred", "match"
        ));
        let row = |name: &str, m: &Prf| {
            format!(
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>6}  {:>6}  {:>6}\n",
                name, m.precision, m.recall, m.f1, m.gold_count, m.pred_count, m.match_count
            )
        };
        if per_class {
            for (label, m) in &self.per_class {
                out.push_str(&row(label, m));
            }
        }
        out.push_str(&row("micro", &self.micro));
        if !self.confusions.is_empty() {
            out.push_str("\nboundary matches with a wrong label:\n");
            for c in &self.confusions {
                out.push_str(&format!(
                    "  {} -> {}: {}\n",
                    c.gold_label, c.pred_label, c.count
                ));
            }
        }
        if self.repairs_applied > 0 {
            out.push_str(&format!(
                "\nIOB2 repairs applied to predictions: {}\n",
                self.repairs_applied
            ));
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_table(true))
    }
}
