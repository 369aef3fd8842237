//! Item search: dictionary tagging of queries and item text, scored by
//! token overlap plus typed-span matches.

mod lexicon;
mod ner;
mod search;

use thiserror::Error;

pub use lexicon::{Lexicon, LexiconEntry, SEED_TYPES};
pub use ner::{ner_tag, tag_tokens, Span, TaggedText};
pub use search::{jaccard, score, search, Catalog, ItemDoc, ScoreWeights, SearchHit, PROFILE_ATTR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("invalid lexicon entry {0}")]
    InvalidEntry(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}
