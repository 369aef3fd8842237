use serde::Serialize;

use super::QaError;
use crate::kg::{EntityKind, KnowledgeGraph};
use crate::retrieval::SearchHit;

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Session {
    pub id: String,
    pub current_item: Option<String>,
    pub last_ranked: Option<Vec<SearchHit>>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            ..Session::default()
        }
    }

    /// Sets the current item; it must be an Item entity of `kg`.
    pub fn select(&mut self, kg: &KnowledgeGraph, item: &str) -> Result<(), QaError> {
        match kg.entity(item) {
            Some(e) if e.kind == EntityKind::Item => {
                self.current_item = Some(item.to_string());
                Ok(())
            }
            _ => Err(QaError::UnknownItem(item.to_string())),
        }
    }
}
