//! Intent routing and answering: view requests go to item search, item
//! questions to KBQA with an FAQ fallback, everything else to a configured
//! reply.

mod engine;
mod exhibition;
mod faq;
mod intent;
mod kbqa;
mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{Payload, QaConfig, QaEngine, QaResponse, Route, Stage};
pub use exhibition::{item_card, ItemCard, PoiEntry, PropertyEntry, COMMENT_ATTR};
pub use faq::{
    faq_fallback, EncoderSimilarity, FaqEntry, FaqSimilarity, FaqStore, TfIdfSimilarity, DEFAULT_THETA,
};
pub use intent::{classify_intent, Intent, IntentRules};
pub use kbqa::{kbqa, AnswerTemplates, DEFAULT_ANSWER_TEMPLATE};
pub use session::Session;

use crate::retrieval::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Kbqa,
    Faq,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerPayload {
    pub text: String,
    /// Image entity ids.
    pub images: Vec<String>,
    pub source: AnswerSource,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaError {
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("io: {0}")]
    Io(String),
}
