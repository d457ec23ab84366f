//! Software mention detection toolkit.
//!
//! Everything needed to train and score an IOB2 software-mention tagger with
//! the usual strategy knobs: subtoken label alignment ([`align`]), class
//! imbalance remediation ([`rebalance`]), composite-label decomposition for a
//! two-classifier setup ([`duallabel`]), a sparse linear tagger ([`tagger`]),
//! exact-match span scoring ([`eval`]) and a declarative experiment runner
//! ([`experiment`]).

pub mod align;
pub mod corpus;
pub mod duallabel;
pub mod eval;
pub mod experiment;
pub mod fixtures;
pub mod rebalance;
pub mod synth;
pub mod tagger;

pub use corpus::{Dataset, LabelCatalog, LabelSet, ParseMode, Span, Tag, TaggedSentence};
pub use eval::{exact_match_score, EvalReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
