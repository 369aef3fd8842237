//! Cross-modal encoders: pretraining, matching fine-tune, indexing and
//! evaluation.

mod bench;
mod checkpoint;
mod config;
mod encoder;
mod finetune;
pub mod gradcheck;
mod index;
mod joint;
pub mod layers;
mod loss;
mod metrics;
pub mod params;
mod patch;
pub mod synthetic;
mod train;
mod vocab;

use thiserror::Error;

pub use bench::{speedup_benchmark, SpeedupReport};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{LossWeights, ModelConfig};
pub use encoder::{Encoded, Encoders, ForwardCounters, Heads, ImageEncoder, TextEncoder};
pub use finetune::{
    finetune_matching, match_probability, matching_objective, FinetuneConfig, FinetuneReport, MatchExample,
};
pub use index::{build_index, EmbeddingIndex, IndexHit};
pub use joint::JointScorer;
pub use loss::{
    cmr_from_scores, cmr_loss, mlm_loss, mpfr_loss, pretrain_objective, LossBreakdown, TrainingBatch, TrainingPair,
};
pub use metrics::{auc, auc_f64};
pub use patch::{fit_image, patchify, unpatchify, PatchSequence};
pub use train::{pretrain, train_loop, EpochLog, Optimizer, TrainConfig};
pub use vocab::{TokenSequence, Vocab, CLS, MASK, PAD, SPECIAL_TOKENS, UNK};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sequence length {len} exceeds {max}")]
    LengthExceeded { len: usize, max: usize },
    #[error("image {height}x{width} not divisible into {patch}x{patch} patches")]
    IndivisibleDimensions { height: usize, width: usize, patch: usize },
    #[error("no maskable tokens in batch")]
    NoMaskableTokens,
    #[error("no maskable patches in batch")]
    NoMaskablePatches,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("labelled set is empty")]
    EmptySet,
    #[error("index is empty")]
    EmptyIndex,
    #[error("evaluation set needs both positive and negative examples")]
    SingleClass,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}
