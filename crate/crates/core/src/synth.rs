//! Seeded generator for a synthetic, heavily imbalanced software-mention
//! corpus.
//!
//! Mention sentences come from templates whose wording signals the mention
//! type (using, developing, or merely naming a tool); the software type is a
//! property of the name. Most sentences are filler without any mention, and
//! some filler reuses software names as ordinary words ("the windows were
//! sealed") so identity features alone are not enough.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabelCatalog, Tag, TaggedSentence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sentences: usize,
    /// Share of sentences carrying at least one mention.
    pub mention_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 1000,
            mention_fraction: 0.05,
            seed: 0,
        }
    }
}

const SOFTWARE: &[(&str, &[&str])] = &[
    (
        "Application",
        &[
            "SPSS",
            "VirtualBox",
            "ImageJ",
            "Excel",
            "Stata",
            "GraphPad Prism",
            "Adobe Photoshop",
            "FlowJo",
            "Cytoscape",
            "EndNote",
        ],
    ),
    (
        "PlugIn",
        &[
            "Chaste",
            "MorphoLibJ",
            "Bio-Formats",
            "TrackMate",
            "StackReg",
            "Coloc 2",
        ],
    ),
    (
        "OperatingSystem",
        &[
            "Linux", "Windows", "Mac OS X", "Ubuntu", "FreeBSD", "CentOS",
        ],
    ),
    (
        "ProgrammingEnvironment",
        &["Python", "R", "MATLAB", "Julia", "Perl", "Java"],
    ),
    (
        "Package",
        &[
            "numpy",
            "ggplot2",
            "lme4",
            "scikit-learn",
            "pandas",
            "Biopython",
            "limma",
            "DESeq2",
        ],
    ),
];

/// Templates per mention type; `{}` is replaced by the software name.
const TEMPLATES: &[(&str, &[&str])] = &[
    (
        "Usage",
        &[
            "Data were analysed using {} .",
            "We used {} to fit all models .",
            "All statistical tests were performed in {} .",
            "Images were processed with {} before quantification .",
            "The simulations were run with {} on the cluster .",
            "Figures were prepared using {} .",
        ],
    ),
    (
        "Creation",
        &[
            "Here we present {} , a new tool for this task .",
            "We developed {} to address this gap .",
            "In this work we introduce {} .",
            "{} was implemented by the authors and is described below .",
        ],
    ),
    (
        "Mention",
        &[
            "{} is widely used in the field .",
            "Tools such as {} are popular among biologists .",
            "Previous studies relied on {} .",
            "Alternatives include {} and several commercial packages .",
            "{} has been reviewed elsewhere .",
        ],
    ),
];

const SUBJECTS: &[&str] = &[
    "The samples",
    "Participants",
    "The cells",
    "All animals",
    "The mice",
    "Patients",
    "The cultures",
    "Control groups",
    "The specimens",
    "Volunteers",
    "The windows",
    "The python",
    "The plates",
    "Our results",
];
const VERBS: &[&str] = &[
    "were incubated",
    "were recruited",
    "were stored",
    "were measured",
    "were exposed",
    "were collected",
    "were sealed",
    "were randomized",
    "were observed",
    "showed no change",
];
const OBJECTS: &[&str] = &[
    "for 24 hours",
    "at room temperature",
    "in the dark",
    "after two weeks",
    "under standard conditions",
    "in triplicate",
    "at baseline",
    "during the trial",
    "in the field",
    "before sequencing",
    "with a new protocol",
    "in a follow-up study",
    "using a standard method",
];
const TAILS: &[&str] = &[
    "",
    "as described previously",
    "according to the guidelines",
    "in accordance with ethics approval",
    "unless stated otherwise",
    "with minor modifications",
];

fn filler(rng: &mut ChaCha8Rng) -> Vec<(String, Tag)> {
    let mut text = format!(
        "{} {} {}",
        SUBJECTS.choose(rng).unwrap(),
        VERBS.choose(rng).unwrap(),
        OBJECTS.choose(rng).unwrap()
    );
    let tail = TAILS.choose(rng).unwrap();
    if !tail.is_empty() {
        text.push(' ');
        text.push_str(tail);
    }
    text.push_str(" .");
    text.split_whitespace()
        .map(|w| (w.to_owned(), Tag::Outside))
        .collect()
}

fn mention(rng: &mut ChaCha8Rng) -> Vec<(String, Tag)> {
    let (software_type, names) = SOFTWARE.choose(rng).unwrap();
    let (mention_type, templates) = TEMPLATES.choose(rng).unwrap();
    let name = names.choose(rng).unwrap();
    let template = templates.choose(rng).unwrap();
    let label = format!("{software_type}_{mention_type}");
    let mut out = Vec::new();
    for word in template.split_whitespace() {
        if word == "{}" {
            for (i, part) in name.split_whitespace().enumerate() {
                let tag = if i == 0 {
                    Tag::Begin(label.clone())
                } else {
                    Tag::Inside(label.clone())
                };
                out.push((part.to_owned(), tag));
            }
        } else {
            out.push((word.to_owned(), Tag::Outside));
        }
    }
    out
}

fn to_sentence(rows: Vec<(String, Tag)>) -> TaggedSentence {
    let (tokens, tags) = rows.into_iter().unzip();
    TaggedSentence::new(tokens, tags).expect("templates yield valid sentences")
}

/// Generates `config.sentences` sentences over the default catalog.
pub fn generate(config: &SynthConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mentions = (config.sentences as f64 * config.mention_fraction).round() as usize;
    let mut sentences = Vec::with_capacity(config.sentences);
    for i in 0..config.sentences {
        let rows = if i < mentions {
            mention(&mut rng)
        } else {
            filler(&mut rng)
        };
        sentences.push(to_sentence(rows));
    }
    sentences.shuffle(&mut rng);
    // A few mention sentences get a second, filler-derived clause with
    // software used as ordinary vocabulary.
    for s in sentences.iter_mut() {
        if !s.is_all_outside() && rng.gen_bool(0.2) {
            let mut rows: Vec<(String, Tag)> = s
                .tokens()
                .iter()
                .cloned()
                .zip(s.tags().iter().cloned())
                .collect();
            rows.pop();
            rows.push(("while".to_owned(), Tag::Outside));
            let mut extra = filler(&mut rng);
            extra[0].0 = extra[0].0.to_lowercase();
            rows.extend(extra);
            *s = to_sentence(rows);
        }
    }
    Dataset::new(sentences, LabelCatalog::default().composites().clone())
        .expect("synthetic labels come from the default catalog")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset_stats;

    #[test]
    fn deterministic_and_imbalanced() {
        let c = SynthConfig {
            sentences: 400,
            mention_fraction: 0.05,
            seed: 3,
        };
        let a = generate(&c);
        assert_eq!(a, generate(&c));
        let st = dataset_stats(&a);
        assert_eq!(st.sentences_with_mention, 20);
        assert_eq!(st.sentences_all_o, 380);
        assert!(a.violations().is_empty());
    }
}
