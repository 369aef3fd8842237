use serde::Serialize;

use super::QaError;
use crate::kg::{EntityKind, KnowledgeGraph, RelationKind};

/// Item attribute key holding a comment; `comment.<n>` keys add more.
pub const COMMENT_ATTR: &str = "comment";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoiEntry {
    pub id: String,
    pub label: String,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyEntry {
    pub name: String,
    pub value: String,
}

/// Item detail grouped into appearance, POI and comment sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemCard {
    pub item: String,
    pub title: String,
    pub appearance: Vec<String>,
    pub poi: Vec<PoiEntry>,
    pub comment: Vec<String>,
    pub properties: Vec<PropertyEntry>,
}

pub fn item_card(kg: &KnowledgeGraph, item: &str) -> Result<ItemCard, QaError> {
    let entity = kg
        .entity(item)
        .filter(|e| e.kind == EntityKind::Item)
        .ok_or_else(|| QaError::UnknownItem(item.to_string()))?;
    let ids = |v: Vec<&crate::kg::Entity>| v.into_iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    let poi = kg
        .targets(item, RelationKind::HasPoi)
        .into_iter()
        .map(|p| PoiEntry {
            id: p.id.clone(),
            label: p.label.clone(),
            images: ids(kg.images_of(&p.id)),
        })
        .collect();
    let comment = entity
        .attributes
        .iter()
        .filter(|(k, _)| *k == COMMENT_ATTR || k.strip_prefix(COMMENT_ATTR).is_some_and(|r| r.starts_with('.')))
        .map(|(_, v)| v.clone())
        .collect();
    let mut properties: Vec<PropertyEntry> = kg
        .outgoing(item, RelationKind::HasProperty)
        .map(|t| PropertyEntry {
            name: t.qualifier.clone().unwrap_or_default(),
            value: kg.entity(&t.target).expect("triple targets exist").label.clone(),
        })
        .collect();
    properties.sort_by(|a, b| (&a.name, &a.value).cmp(&(&b.name, &b.value)));
    properties.dedup();
    Ok(ItemCard {
        item: item.to_string(),
        title: entity.label.clone(),
        appearance: ids(kg.images_of(item)),
        poi,
        comment,
        properties,
    })
}
