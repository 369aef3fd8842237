//! Ontology-typed multi-modal knowledge graph.

mod completion;
mod graph;
mod jsonl;
mod model;
mod paths;
mod stats;

use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard};
use thiserror::Error;

pub use completion::{run_completion, JoinRule, ITEM_POI_RULE, RULES, USER_PREFERENCE_RULE};
pub use graph::{Direction, KnowledgeGraph};
pub use jsonl::{export_jsonl, import_jsonl, read_jsonl, write_jsonl, ImportError, Record};
pub use model::{
    Entity, EntityKind, Provenance, RelationKind, Triple, TripleKey, IMAGE_PATH_ATTR,
};
pub use paths::{cognitive_paths, CognitivePath};
pub use stats::{stats, GraphStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KgError {
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
    #[error("entity {0:?} has an empty label")]
    EmptyLabel(String),
    #[error("image entity {0:?} has no {IMAGE_PATH_ATTR:?} attribute")]
    MissingImagePath(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("{relation} does not accept {source_kind} -> {target_kind}")]
    SignatureViolation {
        relation: RelationKind,
        source_kind: EntityKind,
        target_kind: EntityKind,
    },
    #[error("{0} requires a qualifier exactly when it is has_property")]
    QualifierMismatch(RelationKind),
    #[error("{0} triples cannot carry this provenance")]
    InvalidProvenance(RelationKind),
    #[error("triple {0} already present")]
    AlreadyPresent(String),
}

/// Readers-writer handle over a graph. Batch mutations run under one write
/// lock, so readers see either the state before or after the whole batch.
#[derive(Debug, Clone, Default)]
pub struct SharedGraph(Arc<RwLock<KnowledgeGraph>>);

impl SharedGraph {
    pub fn new(kg: KnowledgeGraph) -> Self {
        SharedGraph(Arc::new(RwLock::new(kg)))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, KnowledgeGraph> {
        self.0.read()
    }

    pub fn complete(&self) -> usize {
        run_completion(&mut self.0.write())
    }

    /// Applies `f` to a scratch copy and publishes it only on success.
    pub fn batch<T, E>(&self, f: impl FnOnce(&mut KnowledgeGraph) -> Result<T, E>) -> Result<T, E> {
        let mut guard = self.0.write();
        let mut scratch = guard.clone();
        let out = f(&mut scratch)?;
        *guard = scratch;
        Ok(out)
    }
}
