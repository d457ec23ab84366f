//! Word to subtoken label alignment.
//!
//! Words are segmented into pieces, either by the built-in fixed-width
//! chunker or by an imported piece map produced by a real tokenizer. Word
//! tags are then mapped onto piece targets with one of two strategies:
//!
//! * [`Strategy::Unified`] copies a word's tag onto every one of its pieces.
//! * [`Strategy::Selective`] tags only the first piece and marks the rest
//!   [`Target::Ignore`], so they contribute nothing to training.
//!
//! Predictions come back to word level through [`project_to_words`], which
//! reads the first piece of every word.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{repair_iob2, Tag, TaggedSentence};

pub const CONTINUATION_MARKER: &str = "##";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("{what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("piece map words do not match the sentence tokens")]
    WordMismatch,
    #[error("sentence {sentence}, piece {piece}: word index {index} goes backwards")]
    NonMonotoneWordIndex {
        sentence: usize,
        piece: usize,
        index: usize,
    },
    #[error("sentence {sentence}: word index {missing} has no pieces")]
    GapInWordIndices { sentence: usize, missing: usize },
    #[error("line {line}: malformed piece line {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("piece {piece:?} of word {word:?} does not reproduce the word")]
    PieceMismatch { word: String, piece: String },
    #[error("segmenter chunk size must be at least 1")]
    ZeroChunk,
}

pub type Result<T, E = AlignError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Unified,
    Selective,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Unified => "unified",
            Strategy::Selective => "selective",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unified" => Ok(Strategy::Unified),
            "selective" => Ok(Strategy::Selective),
            other => Err(format!("unknown labeling strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub chunk: usize,
}

impl SegmenterConfig {
    pub fn new(chunk: usize) -> Result<Self> {
        if chunk == 0 {
            return Err(AlignError::ZeroChunk);
        }
        Ok(SegmenterConfig { chunk })
    }
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig { chunk: 4 }
    }
}

/// Alignment settings shared by training and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub strategy: Strategy,
    pub segmenter: SegmenterConfig,
    /// Under unified labeling, turn `B-` into `I-` on continuation pieces.
    #[serde(default)]
    pub unified_bi_conversion: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            strategy: Strategy::Selective,
            segmenter: SegmenterConfig::default(),
            unified_bi_conversion: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPieceMap {
    words: Vec<String>,
    pieces: Vec<String>,
    word_of_piece: Vec<usize>,
}

impl WordPieceMap {
    /// Checks that `word_of_piece` is non-decreasing and covers every word.
    pub fn new(words: Vec<String>, pieces: Vec<String>, word_of_piece: Vec<usize>) -> Result<Self> {
        Self::checked(words, pieces, word_of_piece, 0)
    }

    fn checked(
        words: Vec<String>,
        pieces: Vec<String>,
        word_of_piece: Vec<usize>,
        sentence: usize,
    ) -> Result<Self> {
        if pieces.len() != word_of_piece.len() {
            return Err(AlignError::LengthMismatch {
                what: "word indices",
                expected: pieces.len(),
                found: word_of_piece.len(),
            });
        }
        for piece in 1..word_of_piece.len() {
            let index = word_of_piece[piece];
            if index < word_of_piece[piece - 1] {
                return Err(AlignError::NonMonotoneWordIndex {
                    sentence,
                    piece,
                    index,
                });
            }
        }
        let mut expected_next = 0;
        for &index in &word_of_piece {
            if index > expected_next {
                return Err(AlignError::GapInWordIndices {
                    sentence,
                    missing: expected_next,
                });
            }
            if index == expected_next {
                expected_next += 1;
            }
        }
        if expected_next != words.len() {
            return Err(AlignError::GapInWordIndices {
                sentence,
                missing: expected_next,
            });
        }
        Ok(WordPieceMap {
            words,
            pieces,
            word_of_piece,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn word_of_piece(&self) -> &[usize] {
        &self.word_of_piece
    }

    /// Whether piece `p` is the first piece of its word.
    pub fn is_first_piece(&self, p: usize) -> bool {
        p == 0 || self.word_of_piece[p - 1] != self.word_of_piece[p]
    }

    /// Index of the first piece of every word.
    pub fn first_pieces(&self) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&p| self.is_first_piece(p))
            .collect()
    }

    /// Checks that the pieces of every word, continuation markers stripped,
    /// concatenate back to the word.
    pub fn check_reconstruction(&self) -> Result<()> {
        let mut rebuilt = vec![String::new(); self.words.len()];
        for (p, piece) in self.pieces.iter().enumerate() {
            let text = if self.is_first_piece(p) {
                piece.as_str()
            } else {
                piece.strip_prefix(CONTINUATION_MARKER).unwrap_or(piece)
            };
            rebuilt[self.word_of_piece[p]].push_str(text);
        }
        for (word, r) in self.words.iter().zip(&rebuilt) {
            if word != r {
                return Err(AlignError::PieceMismatch {
                    word: word.clone(),
                    piece: r.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Splits each word greedily into `chunk`-character pieces; continuation
/// pieces carry the `##` marker.
pub fn segment_words(words: &[String], config: SegmenterConfig) -> WordPieceMap {
    let chunk = config.chunk.max(1);
    let mut pieces = Vec::new();
    let mut word_of_piece = Vec::new();
    for (w, word) in words.iter().enumerate() {
        let chars: Vec<char> = word.chars().collect();
        for (c, part) in chars.chunks(chunk).enumerate() {
            let text: String = part.iter().collect();
            pieces.push(if c == 0 {
                text
            } else {
                format!("{CONTINUATION_MARKER}{text}")
            });
            word_of_piece.push(w);
        }
    }
    WordPieceMap {
        words: words.to_vec(),
        pieces,
        word_of_piece,
    }
}

pub fn segment_sentence(sentence: &TaggedSentence, config: SegmenterConfig) -> WordPieceMap {
    segment_words(sentence.tokens(), config)
}

/// Parses a piece-map file: per sentence, one `piece<TAB>word_index` line per
/// piece, sentences separated by blank lines. `words` gives the tokens of
/// each sentence, in order.
pub fn import_piece_maps(text: &str, words: &[Vec<String>]) -> Result<Vec<WordPieceMap>> {
    let mut blocks: Vec<Vec<(String, usize)>> = Vec::new();
    let mut current: Vec<(String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let malformed = || AlignError::MalformedLine {
            line: i + 1,
            text: line.to_owned(),
        };
        let (piece, index) = line.split_once('\t').ok_or_else(malformed)?;
        let index: usize = index.trim().parse().map_err(|_| malformed())?;
        if piece.is_empty() {
            return Err(malformed());
        }
        current.push((piece.to_owned(), index));
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.len() != words.len() {
        return Err(AlignError::LengthMismatch {
            what: "piece map sentences",
            expected: words.len(),
            found: blocks.len(),
        });
    }
    blocks
        .into_iter()
        .zip(words)
        .enumerate()
        .map(|(s, (block, words))| {
            let (pieces, indices) = block.into_iter().unzip();
            WordPieceMap::checked(words.clone(), pieces, indices, s)
        })
        .collect()
}

pub fn export_piece_maps(maps: &[WordPieceMap]) -> String {
    let mut out = String::new();
    for (i, m) in maps.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (piece, w) in m.pieces.iter().zip(&m.word_of_piece) {
            out.push_str(&format!("{piece}\t{w}\n"));
        }
    }
    out
}

/// A per-piece training target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Label(Tag),
    /// Excluded from the loss and from class frequencies.
    Ignore,
}

impl Target {
    pub fn tag(&self) -> Option<&Tag> {
        match self {
            Target::Label(t) => Some(t),
            Target::Ignore => None,
        }
    }
}

pub const IGNORE_TOKEN: &str = "<IGNORE>";

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Label(t) => t.fmt(f),
            Target::Ignore => f.write_str(IGNORE_TOKEN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSequence {
    pub pieces: Vec<String>,
    pub targets: Vec<Target>,
    pub strategy: Strategy,
}

impl AlignedSequence {
    /// Word-level supervision: every token is its own piece.
    pub fn word_level(sentence: &TaggedSentence) -> Self {
        AlignedSequence {
            pieces: sentence.tokens().to_vec(),
            targets: sentence.tags().iter().cloned().map(Target::Label).collect(),
            strategy: Strategy::Unified,
        }
    }

    pub fn labeled_count(&self) -> usize {
        self.targets.iter().filter(|t| t.tag().is_some()).count()
    }
}

fn check_words(sentence: &TaggedSentence, map: &WordPieceMap) -> Result<()> {
    if map.words.len() != sentence.len() {
        return Err(AlignError::LengthMismatch {
            what: "words",
            expected: sentence.len(),
            found: map.words.len(),
        });
    }
    if map.words != sentence.tokens() {
        return Err(AlignError::WordMismatch);
    }
    Ok(())
}

pub fn align_unified(
    sentence: &TaggedSentence,
    map: &WordPieceMap,
    bi_conversion: bool,
) -> Result<AlignedSequence> {
    check_words(sentence, map)?;
    let targets = map
        .word_of_piece
        .iter()
        .enumerate()
        .map(|(p, &w)| {
            let tag = &sentence.tags()[w];
            Target::Label(if bi_conversion && !map.is_first_piece(p) {
                tag.to_inside()
            } else {
                tag.clone()
            })
        })
        .collect();
    Ok(AlignedSequence {
        pieces: map.pieces.clone(),
        targets,
        strategy: Strategy::Unified,
    })
}

pub fn align_selective(sentence: &TaggedSentence, map: &WordPieceMap) -> Result<AlignedSequence> {
    check_words(sentence, map)?;
    let targets = map
        .word_of_piece
        .iter()
        .enumerate()
        .map(|(p, &w)| {
            if map.is_first_piece(p) {
                Target::Label(sentence.tags()[w].clone())
            } else {
                Target::Ignore
            }
        })
        .collect();
    Ok(AlignedSequence {
        pieces: map.pieces.clone(),
        targets,
        strategy: Strategy::Selective,
    })
}

pub fn align(
    sentence: &TaggedSentence,
    map: &WordPieceMap,
    config: &AlignConfig,
) -> Result<AlignedSequence> {
    match config.strategy {
        Strategy::Unified => align_unified(sentence, map, config.unified_bi_conversion),
        Strategy::Selective => align_selective(sentence, map),
    }
}

/// Word tag = prediction at the word's first piece, then IOB2 repair.
pub fn project_to_words(piece_predictions: &[Tag], map: &WordPieceMap) -> Result<Vec<Tag>> {
    if piece_predictions.len() != map.pieces.len() {
        return Err(AlignError::LengthMismatch {
            what: "piece predictions",
            expected: map.pieces.len(),
            found: piece_predictions.len(),
        });
    }
    let words: Vec<Tag> = map
        .first_pieces()
        .into_iter()
        .map(|p| piece_predictions[p].clone())
        .collect();
    Ok(repair_iob2(&words))
}

/// Renders aligned sequences as `piece<TAB>target` lines, blank line between
/// sentences.
pub fn render_aligned(seqs: &[AlignedSequence]) -> String {
    let mut out = String::new();
    for (i, s) in seqs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (p, t) in s.pieces.iter().zip(&s.targets) {
            out.push_str(&format!("{p}\t{t}\n"));
        }
    }
    out
}
