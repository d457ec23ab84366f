//! IOB2-tagged corpora in the two-column CoNLL interchange format.
//!
//! A corpus file holds one `token<TAB>tag` pair per line with a single blank
//! line between sentences. Tags are `O`, `B-<label>` or `I-<label>`, where a
//! label is drawn from a [`LabelSet`] (usually the composite labels of a
//! [`LabelCatalog`]).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: expected 2 tab-separated columns, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: malformed tag {tag:?}")]
    MalformedTag { line: usize, tag: String },
    #[error("line {line}: label {label:?} is not in the label set")]
    UnknownLabel { line: usize, label: String },
    #[error("empty sentence at line {line}")]
    EmptySentence { line: usize },
    #[error("sentence {sentence}: invalid IOB2 ({violation})")]
    InvalidIob2 {
        sentence: usize,
        violation: Violation,
    },
    #[error("token {0:?} is empty or contains whitespace")]
    InvalidToken(String),
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("spans ({first_start},{first_end}) and ({second_start},{second_end}) overlap")]
    OverlappingSpans {
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
    },
    #[error("span ({start},{end}) does not fit a sentence of length {length}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        length: usize,
    },
    #[error("catalog: {0}")]
    InvalidCatalog(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// A single IOB2 tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn begin(label: impl Into<String>) -> Self {
        Tag::Begin(label.into())
    }

    pub fn inside(label: impl Into<String>) -> Self {
        Tag::Inside(label.into())
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::Outside)
    }

    /// Same label, with a `B-` prefix. `O` stays `O`.
    pub fn to_begin(&self) -> Tag {
        match self {
            Tag::Outside => Tag::Outside,
            Tag::Begin(l) | Tag::Inside(l) => Tag::Begin(l.clone()),
        }
    }

    pub fn to_inside(&self) -> Tag {
        match self {
            Tag::Outside => Tag::Outside,
            Tag::Begin(l) | Tag::Inside(l) => Tag::Inside(l.clone()),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed tag {0:?}")]
pub struct ParseTagError(pub String);

impl FromStr for Tag {
    type Err = ParseTagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (prefix, label) = s
            .split_once('-')
            .ok_or_else(|| ParseTagError(s.to_owned()))?;
        if label.is_empty() {
            return Err(ParseTagError(s.to_owned()));
        }
        match prefix {
            "B" => Ok(Tag::Begin(label.to_owned())),
            "I" => Ok(Tag::Inside(label.to_owned())),
            _ => Err(ParseTagError(s.to_owned())),
        }
    }
}

/// Ordered, duplicate-free set of entity labels that tags may carry.
///
/// The order defines the tag class order used everywhere a deterministic
/// ordering of classes is needed: `O` first, then `B-`/`I-` for each label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for l in &labels {
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidCatalog(format!("bad label {l:?}")));
            }
            if !seen.insert(l.as_str()) {
                return Err(CorpusError::InvalidCatalog(format!(
                    "duplicate label {l:?}"
                )));
            }
        }
        Ok(LabelSet { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Every tag class in canonical order: `O`, then `B-l`, `I-l` per label.
    pub fn tag_classes(&self) -> Vec<Tag> {
        let mut out = Vec::with_capacity(1 + 2 * self.labels.len());
        out.push(Tag::Outside);
        for l in &self.labels {
            out.push(Tag::Begin(l.clone()));
            out.push(Tag::Inside(l.clone()));
        }
        out
    }

    /// Position of `tag` in [`LabelSet::tag_classes`].
    pub fn class_index(&self, tag: &Tag) -> Option<usize> {
        match tag {
            Tag::Outside => Some(0),
            Tag::Begin(l) => self.index_of(l).map(|i| 1 + 2 * i),
            Tag::Inside(l) => self.index_of(l).map(|i| 2 + 2 * i),
        }
    }

    pub fn check_tag(&self, tag: &Tag) -> bool {
        tag.label().is_none_or(|l| self.contains(l))
    }
}

/// Software types crossed with mention types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCatalog {
    software_types: Vec<String>,
    mention_types: Vec<String>,
    composites: LabelSet,
}

pub const DEFAULT_SOFTWARE_TYPES: &[&str] = &[
    "Application",
    "PlugIn",
    "OperatingSystem",
    "ProgrammingEnvironment",
    "Package",
    "SoftwareCoreference",
];

pub const DEFAULT_MENTION_TYPES: &[&str] = &["Mention", "Usage", "Creation", "Deposition"];

impl LabelCatalog {
    pub fn new<S: Into<String>>(
        software: impl IntoIterator<Item = S>,
        mention: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let software_types: Vec<String> = software.into_iter().map(Into::into).collect();
        let mention_types: Vec<String> = mention.into_iter().map(Into::into).collect();
        for (what, types) in [("software", &software_types), ("mention", &mention_types)] {
            if types.is_empty() {
                return Err(CorpusError::InvalidCatalog(format!("no {what} types")));
            }
            if let Some(bad) = types.iter().find(|t| t.contains('_')) {
                return Err(CorpusError::InvalidCatalog(format!(
                    "{what} type {bad:?} contains an underscore"
                )));
            }
            // Duplicate and whitespace checks.
            LabelSet::new(types.iter().cloned())?;
        }
        let composites = LabelSet::new(
            software_types
                .iter()
                .flat_map(|s| mention_types.iter().map(move |m| format!("{s}_{m}"))),
        )?;
        Ok(LabelCatalog {
            software_types,
            mention_types,
            composites,
        })
    }

    /// Parse the catalog file format: a `software:` section and a `mention:`
    /// section, each followed by one type name per line. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        enum Section {
            None,
            Software,
            Mention,
        }
        let mut section = Section::None;
        let (mut software, mut mention) = (Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "software:" => section = Section::Software,
                "mention:" => section = Section::Mention,
                name => match section {
                    Section::Software => software.push(name.to_owned()),
                    Section::Mention => mention.push(name.to_owned()),
                    Section::None => {
                        return Err(CorpusError::InvalidCatalog(format!(
                            "line {}: type name before any section header",
                            i + 1
                        )))
                    }
                },
            }
        }
        LabelCatalog::new(software, mention)
    }

    pub fn to_catalog_text(&self) -> String {
        let mut out = String::from("software:\n");
        for s in &self.software_types {
            out.push_str(s);
            out.push('\n');
        }
        out.push_str("mention:\n");
        for m in &self.mention_types {
            out.push_str(m);
            out.push('\n');
        }
        out
    }

    pub fn software_types(&self) -> &[String] {
        &self.software_types
    }

    pub fn mention_types(&self) -> &[String] {
        &self.mention_types
    }

    pub fn composites(&self) -> &LabelSet {
        &self.composites
    }

    pub fn software_set(&self) -> LabelSet {
        LabelSet {
            labels: self.software_types.clone(),
        }
    }

    pub fn mention_set(&self) -> LabelSet {
        LabelSet {
            labels: self.mention_types.clone(),
        }
    }

    /// The mention type used when only a software type is known: `Mention`
    /// when the catalog has it, otherwise the first mention type.
    pub fn default_mention_type(&self) -> &str {
        self.mention_types
            .iter()
            .find(|m| *m == "Mention")
            .unwrap_or(&self.mention_types[0])
    }
}

impl Default for LabelCatalog {
    fn default() -> Self {
        LabelCatalog::new(
            DEFAULT_SOFTWARE_TYPES.iter().copied(),
            DEFAULT_MENTION_TYPES.iter().copied(),
        )
        .expect("default catalog is well-formed")
    }
}

/// Tokens paired with their tags. Tags are not required to be valid IOB2;
/// see [`validate_iob2`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaggedSentence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(CorpusError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: 0 });
        }
        if let Some(bad) = tokens.iter().find(|t| !is_valid_token(t)) {
            return Err(CorpusError::InvalidToken(bad.clone()));
        }
        Ok(TaggedSentence { tokens, tags })
    }

    /// Convenience constructor from `(token, tag)` string pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for (line, (tok, tag)) in pairs.into_iter().enumerate() {
            tokens.push(tok.to_owned());
            tags.push(tag.parse::<Tag>().map_err(|e| CorpusError::MalformedTag {
                line: line + 1,
                tag: e.0,
            })?);
        }
        TaggedSentence::new(tokens, tags)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_all_outside(&self) -> bool {
        self.tags.iter().all(Tag::is_outside)
    }

    /// Same tokens, different tags.
    pub fn with_tags(&self, tags: Vec<Tag>) -> Result<Self> {
        TaggedSentence::new(self.tokens.clone(), tags)
    }
}

fn is_valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

/// Whether IOB2 violations abort parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Reject any IOB2 violation. Used for gold files.
    Strict,
    /// Accept violations; they can be listed with [`Dataset::violations`].
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    sentences: Vec<TaggedSentence>,
    labels: LabelSet,
}

impl Dataset {
    pub fn new(sentences: Vec<TaggedSentence>, labels: LabelSet) -> Result<Self> {
        for (i, s) in sentences.iter().enumerate() {
            if let Some(tag) = s.tags().iter().find(|t| !labels.check_tag(t)) {
                return Err(CorpusError::UnknownLabel {
                    line: i,
                    label: tag.label().unwrap_or_default().to_owned(),
                });
            }
        }
        Ok(Dataset { sentences, labels })
    }

    pub fn sentences(&self) -> &[TaggedSentence] {
        &self.sentences
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn into_sentences(self) -> Vec<TaggedSentence> {
        self.sentences
    }

    /// IOB2 violations per sentence index.
    pub fn violations(&self) -> Vec<(usize, Violation)> {
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(i, s)| validate_iob2(s.tags()).into_iter().map(move |v| (i, v)))
            .collect()
    }

    /// Concatenation of two datasets over the same label set.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut sentences = self.sentences.clone();
        sentences.extend(other.sentences.iter().cloned());
        Dataset {
            sentences,
            labels: self.labels.clone(),
        }
    }
}

pub fn parse_conll(text: &str, labels: &LabelSet, mode: ParseMode) -> Result<Dataset> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut block_start = 1;
    let mut line_no = 0;

    let finish = |tokens: &mut Vec<String>,
                  tags: &mut Vec<Tag>,
                  block_start: usize,
                  sentences: &mut Vec<TaggedSentence>|
     -> Result<()> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: block_start });
        }
        let sentence = TaggedSentence::new(std::mem::take(tokens), std::mem::take(tags))?;
        if mode == ParseMode::Strict {
            if let Some(v) = validate_iob2(sentence.tags()).into_iter().next() {
                return Err(CorpusError::InvalidIob2 {
                    sentence: sentences.len(),
                    violation: v,
                });
            }
        }
        sentences.push(sentence);
        Ok(())
    };

    let lines: Vec<&str> = text.split('\n').collect();
    // Trailing blank lines are permitted.
    let last_content = lines
        .iter()
        .rposition(|l| !l.trim_end_matches('\r').is_empty())
        .map_or(0, |p| p + 1);

    for raw in &lines[..last_content] {
        line_no += 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            finish(&mut tokens, &mut tags, block_start, &mut sentences)?;
            block_start = line_no + 1;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                found: cols.len(),
            });
        }
        if !is_valid_token(cols[0]) {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                found: cols.len(),
            });
        }
        let tag: Tag = cols[1]
            .parse()
            .map_err(|e: ParseTagError| CorpusError::MalformedTag {
                line: line_no,
                tag: e.0,
            })?;
        if let Some(label) = tag.label() {
            if !labels.contains(label) {
                return Err(CorpusError::UnknownLabel {
                    line: line_no,
                    label: label.to_owned(),
                });
            }
        }
        tokens.push(cols[0].to_owned());
        tags.push(tag);
    }
    finish(&mut tokens, &mut tags, block_start, &mut sentences)?;

    Ok(Dataset {
        sentences,
        labels: labels.clone(),
    })
}

pub fn serialize_conll(dataset: &Dataset) -> String {
    serialize_sentences(dataset.sentences())
}

pub fn serialize_sentences(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (tok, tag) in s.tokens().iter().zip(s.tags()) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// `I-` tag after `O` or at the start of the sentence.
    OrphanInside,
    /// `I-X` after a `B-`/`I-` tag of another label.
    LabelMismatch { previous: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub index: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::OrphanInside => {
                write!(
                    f,
                    "I- tag without a preceding B-/I- at index {}",
                    self.index
                )
            }
            ViolationKind::LabelMismatch { previous, found } => write!(
                f,
                "I-{found} follows a span labeled {previous} at index {}",
                self.index
            ),
        }
    }
}

pub fn validate_iob2(tags: &[Tag]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut prev: Option<&str> = None;
    for (index, tag) in tags.iter().enumerate() {
        if let Tag::Inside(label) = tag {
            match prev {
                None => out.push(Violation {
                    index,
                    kind: ViolationKind::OrphanInside,
                }),
                Some(p) if p != label => out.push(Violation {
                    index,
                    kind: ViolationKind::LabelMismatch {
                        previous: p.to_owned(),
                        found: label.clone(),
                    },
                }),
                Some(_) => {}
            }
        }
        prev = tag.label();
    }
    out
}

/// Rewrites every violating `I-` tag to `B-` with the same label.
pub fn repair_iob2(tags: &[Tag]) -> Vec<Tag> {
    repair_iob2_counted(tags).0
}

/// Like [`repair_iob2`], also returning the number of rewritten tags.
pub fn repair_iob2_counted(tags: &[Tag]) -> (Vec<Tag>, usize) {
    let mut out: Vec<Tag> = Vec::with_capacity(tags.len());
    let mut repairs = 0;
    for tag in tags {
        let fixed = match tag {
            Tag::Inside(label) if out.last().and_then(Tag::label) != Some(label.as_str()) => {
                repairs += 1;
                Tag::Begin(label.clone())
            }
            other => other.clone(),
        };
        out.push(fixed);
    }
    (out, repairs)
}

/// A labeled region of a sentence; `start` and `end` are inclusive token
/// indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }
}

pub fn tags_to_spans(tags: &[Tag]) -> Result<Vec<Span>> {
    if let Some(v) = validate_iob2(tags).into_iter().next() {
        return Err(CorpusError::InvalidIob2 {
            sentence: 0,
            violation: v,
        });
    }
    let mut spans: Vec<Span> = Vec::new();
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {}
            Tag::Begin(label) => spans.push(Span::new(i, i, label.clone())),
            Tag::Inside(_) => {
                // Validity guarantees an open span of the same label.
                spans.last_mut().expect("validated").end = i;
            }
        }
    }
    Ok(spans)
}

pub fn spans_to_tags(spans: &[Span], length: usize) -> Result<Vec<Tag>> {
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.start > s.end || s.end >= length {
            return Err(CorpusError::SpanOutOfRange {
                start: s.start,
                end: s.end,
                length,
            });
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(CorpusError::OverlappingSpans {
                first_start: pair[0].start,
                first_end: pair[0].end,
                second_start: pair[1].start,
                second_end: pair[1].end,
            });
        }
    }
    let mut tags = vec![Tag::Outside; length];
    for s in sorted {
        tags[s.start] = Tag::Begin(s.label.clone());
        for t in &mut tags[s.start + 1..=s.end] {
            *t = Tag::Inside(s.label.clone());
        }
    }
    Ok(tags)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    /// Occurrences per tag string (`O`, `B-x`, `I-x`).
    pub token_counts: BTreeMap<String, usize>,
    /// Spans per label, after repairing invalid IOB2.
    pub span_counts: BTreeMap<String, usize>,
    pub sentences_all_o: usize,
    pub sentences_with_mention: usize,
    pub o_fraction: f64,
}

impl StatsReport {
    pub fn o_count(&self) -> usize {
        self.token_counts.get("O").copied().unwrap_or(0)
    }

    pub fn non_o_count(&self) -> usize {
        self.token_counts
            .iter()
            .filter(|(k, _)| *k != "O")
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn dataset_stats(dataset: &Dataset) -> StatsReport {
    let mut token_counts = BTreeMap::new();
    let mut span_counts = BTreeMap::new();
    let (mut all_o, mut with_mention, mut total) = (0, 0, 0usize);
    for s in dataset.sentences() {
        for tag in s.tags() {
            *token_counts.entry(tag.to_string()).or_insert(0) += 1;
        }
        total += s.len();
        let spans = tags_to_spans(&repair_iob2(s.tags())).expect("repaired tags are valid");
        if spans.is_empty() {
            all_o += 1;
        } else {
            with_mention += 1;
        }
        for span in spans {
            *span_counts.entry(span.label).or_insert(0) += 1;
        }
    }
    let o = token_counts.get("O").copied().unwrap_or(0);
    StatsReport {
        token_counts,
        span_counts,
        sentences_all_o: all_o,
        sentences_with_mention: with_mention,
        o_fraction: if total == 0 {
            0.0
        } else {
            o as f64 / total as f64
        },
    }
}
