//! Composite label decomposition for the two-classifier setup.
//!
//! A composite tag such as `B-Application_Usage` splits into a software-type
//! tag (`B-Application`) and a mention-type tag (`B-Usage`). Each stream
//! trains its own tagger; [`merge_predictions`] folds the two predicted
//! streams back into composite tags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{repair_iob2, Dataset, LabelCatalog, Tag, TaggedSentence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DualLabelError {
    #[error("label {0:?} is not a composite label of the catalog")]
    UnknownLabel(String),
    #[error("stream lengths differ: {software} software tags, {mention} mention tags")]
    LengthMismatch { software: usize, mention: usize },
    #[error("sentence {0}: software and mention streams have different tokens")]
    TokenMismatch(usize),
}

pub type Result<T, E = DualLabelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositeLabel {
    pub software: String,
    pub mention: String,
}

impl CompositeLabel {
    pub fn parse(label: &str, catalog: &LabelCatalog) -> Result<Self> {
        let (software, mention) = label
            .split_once('_')
            .filter(|(s, m)| {
                catalog.software_types().iter().any(|t| t == s)
                    && catalog.mention_types().iter().any(|t| t == m)
            })
            .ok_or_else(|| DualLabelError::UnknownLabel(label.to_owned()))?;
        Ok(CompositeLabel {
            software: software.to_owned(),
            mention: mention.to_owned(),
        })
    }
}

impl fmt::Display for CompositeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.software, self.mention)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Emit a mention only when both streams are non-`O` with the same prefix.
    #[default]
    Strict,
    /// The software stream decides; a missing or disagreeing mention type
    /// falls back to the catalog's default mention type.
    SoftwarePrecedence,
}

impl FromStr for MergePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(MergePolicy::Strict),
            "software-precedence" | "software_precedence" => Ok(MergePolicy::SoftwarePrecedence),
            other => Err(format!("unknown merge policy {other:?}")),
        }
    }
}

impl fmt::Display for MergePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergePolicy::Strict => "strict",
            MergePolicy::SoftwarePrecedence => "software-precedence",
        })
    }
}

fn with_label(prefix_of: &Tag, label: String) -> Tag {
    match prefix_of {
        Tag::Outside => Tag::Outside,
        Tag::Begin(_) => Tag::Begin(label),
        Tag::Inside(_) => Tag::Inside(label),
    }
}

/// Splits a composite tag into (software tag, mention tag), copying the
/// prefix to both.
pub fn decompose(tag: &Tag, catalog: &LabelCatalog) -> Result<(Tag, Tag)> {
    match tag.label() {
        None => Ok((Tag::Outside, Tag::Outside)),
        Some(label) => {
            let c = CompositeLabel::parse(label, catalog)?;
            Ok((with_label(tag, c.software), with_label(tag, c.mention)))
        }
    }
}

fn same_prefix(a: &Tag, b: &Tag) -> bool {
    matches!(
        (a, b),
        (Tag::Begin(_), Tag::Begin(_)) | (Tag::Inside(_), Tag::Inside(_))
    )
}

pub fn compose(software: &Tag, mention: &Tag, policy: MergePolicy, catalog: &LabelCatalog) -> Tag {
    let Some(sw) = software.label() else {
        return Tag::Outside;
    };
    match (policy, mention.label()) {
        (_, Some(m)) if same_prefix(software, mention) => with_label(software, format!("{sw}_{m}")),
        (MergePolicy::Strict, _) => Tag::Outside,
        (MergePolicy::SoftwarePrecedence, _) => {
            with_label(software, format!("{sw}_{}", catalog.default_mention_type()))
        }
    }
}

pub fn split_sentence(
    sentence: &TaggedSentence,
    catalog: &LabelCatalog,
) -> Result<(TaggedSentence, TaggedSentence)> {
    let (software, mention): (Vec<Tag>, Vec<Tag>) = sentence
        .tags()
        .iter()
        .map(|t| decompose(t, catalog))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok((
        sentence.with_tags(software).expect("same length"),
        sentence.with_tags(mention).expect("same length"),
    ))
}

/// The software-type and mention-type datasets, with identical tokens.
pub fn split_dataset(dataset: &Dataset, catalog: &LabelCatalog) -> Result<(Dataset, Dataset)> {
    let mut software = Vec::with_capacity(dataset.len());
    let mut mention = Vec::with_capacity(dataset.len());
    for s in dataset.sentences() {
        let (a, b) = split_sentence(s, catalog)?;
        software.push(a);
        mention.push(b);
    }
    Ok((
        Dataset::new(software, catalog.software_set())
            .expect("decomposed labels are in the catalog"),
        Dataset::new(mention, catalog.mention_set()).expect("decomposed labels are in the catalog"),
    ))
}

/// Per-position [`compose`], then IOB2 repair.
pub fn merge_predictions(
    software: &[Tag],
    mention: &[Tag],
    policy: MergePolicy,
    catalog: &LabelCatalog,
) -> Result<Vec<Tag>> {
    if software.len() != mention.len() {
        return Err(DualLabelError::LengthMismatch {
            software: software.len(),
            mention: mention.len(),
        });
    }
    let merged: Vec<Tag> = software
        .iter()
        .zip(mention)
        .map(|(s, m)| compose(s, m, policy, catalog))
        .collect();
    Ok(repair_iob2(&merged))
}

/// Merges two prediction datasets sentence by sentence into a composite one.
pub fn merge_datasets(
    software: &Dataset,
    mention: &Dataset,
    policy: MergePolicy,
    catalog: &LabelCatalog,
) -> Result<Dataset> {
    if software.len() != mention.len() {
        return Err(DualLabelError::LengthMismatch {
            software: software.len(),
            mention: mention.len(),
        });
    }
    let mut out = Vec::with_capacity(software.len());
    for (i, (s, m)) in software
        .sentences()
        .iter()
        .zip(mention.sentences())
        .enumerate()
    {
        if s.tokens() != m.tokens() {
            return Err(DualLabelError::TokenMismatch(i));
        }
        let tags = merge_predictions(s.tags(), m.tags(), policy, catalog)?;
        out.push(s.with_tags(tags).expect("same length"));
    }
    Ok(
        Dataset::new(out, catalog.composites().clone())
            .expect("composed labels are in the catalog"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_iob2;

    fn t(s: &str) -> Tag {
        s.parse().unwrap()
    }

    #[test]
    fn decompose_examples() {
        let c = LabelCatalog::default();
        assert_eq!(
            decompose(&t("B-Application_Creation"), &c).unwrap(),
            (t("B-Application"), t("B-Creation"))
        );
        assert_eq!(
            decompose(&Tag::Outside, &c).unwrap(),
            (Tag::Outside, Tag::Outside)
        );
        assert_eq!(
            decompose(&t("I-OperatingSystem_Usage"), &c).unwrap(),
            (t("I-OperatingSystem"), t("I-Usage"))
        );
        assert!(decompose(&t("B-Foo_Bar"), &c).is_err());
        assert!(decompose(&t("B-Application"), &c).is_err());
    }

    #[test]
    fn compose_examples() {
        let c = LabelCatalog::default();
        let strict = MergePolicy::Strict;
        let sp = MergePolicy::SoftwarePrecedence;
        assert_eq!(
            compose(&t("B-Application"), &t("B-Mention"), strict, &c),
            t("B-Application_Mention")
        );
        assert_eq!(
            compose(&t("B-Application"), &Tag::Outside, strict, &c),
            Tag::Outside
        );
        assert_eq!(
            compose(&t("B-Application"), &t("I-Usage"), strict, &c),
            Tag::Outside
        );
        assert_eq!(
            compose(&t("B-Application"), &t("I-Usage"), sp, &c),
            t("B-Application_Mention")
        );
        assert_eq!(
            compose(&t("I-Package"), &Tag::Outside, sp, &c),
            t("I-Package_Mention")
        );
        assert_eq!(compose(&Tag::Outside, &t("B-Usage"), sp, &c), Tag::Outside);
        assert_eq!(
            compose(&Tag::Outside, &t("B-Usage"), strict, &c),
            Tag::Outside
        );
    }

    #[test]
    fn roundtrip_over_catalog() {
        let c = LabelCatalog::default();
        for tag in c.composites().tag_classes() {
            let (s, m) = decompose(&tag, &c).unwrap();
            assert_eq!(compose(&s, &m, MergePolicy::Strict, &c), tag);
        }
    }

    #[test]
    fn merge_examples() {
        let c = LabelCatalog::default();
        let out = merge_predictions(
            &vec![Tag::Outside; 3],
            &[t("B-Usage"), t("I-Usage"), Tag::Outside],
            MergePolicy::Strict,
            &c,
        )
        .unwrap();
        assert_eq!(out, vec![Tag::Outside; 3]);
        assert_eq!(
            merge_predictions(
                &[t("B-Application")],
                &[t("I-Usage")],
                MergePolicy::SoftwarePrecedence,
                &c
            )
            .unwrap(),
            vec![t("B-Application_Mention")]
        );
        // Disagreement on the first token leaves an orphan I- that repair fixes.
        let out = merge_predictions(
            &[t("B-Application"), t("I-Application")],
            &[t("I-Usage"), t("I-Usage")],
            MergePolicy::Strict,
            &c,
        )
        .unwrap();
        assert!(validate_iob2(&out).is_empty());
        assert_eq!(out, vec![Tag::Outside, t("B-Application_Usage")]);
        assert!(merge_predictions(&[Tag::Outside], &[], MergePolicy::Strict, &c).is_err());
    }

    #[test]
    fn split_all_o() {
        let c = LabelCatalog::default();
        let s = TaggedSentence::from_pairs([("a", "O"), ("b", "O")]).unwrap();
        let d = Dataset::new(vec![s], c.composites().clone()).unwrap();
        let (sw, m) = split_dataset(&d, &c).unwrap();
        assert!(sw.sentences()[0].is_all_outside());
        assert!(m.sentences()[0].is_all_outside());
        assert_eq!(merge_datasets(&sw, &m, MergePolicy::Strict, &c).unwrap(), d);
    }
}
