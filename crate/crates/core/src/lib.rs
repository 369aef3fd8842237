//! Multi-modal product knowledge graph and the live-assistant logic built on it.

pub mod crossmodal;
pub mod ingest;
pub mod kg;
pub mod qa;
pub mod retrieval;
pub mod scalar;
pub mod storyboard;
pub mod tokenize;

pub use scalar::Scalar;

pub type Encoders32 = crossmodal::Encoders<f32>;
pub type Encoders64 = crossmodal::Encoders<f64>;
pub type EmbeddingIndex32 = crossmodal::EmbeddingIndex<f32>;
