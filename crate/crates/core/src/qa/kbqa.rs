use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnswerPayload, AnswerSource, QaError};
use crate::kg::{EntityKind, KnowledgeGraph, RelationKind};
use crate::retrieval::{ner_tag, Lexicon};

pub const DEFAULT_ANSWER_TEMPLATE: &str = "{item}的{property}是{value}。";

/// Per-property answer templates with `{item}`, `{property}` and `{value}`
/// placeholders. In the JSON map form the key `"*"` replaces the default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct AnswerTemplates {
    pub default: String,
    pub by_property: BTreeMap<String, String>,
}

impl Default for AnswerTemplates {
    fn default() -> Self {
        AnswerTemplates {
            default: DEFAULT_ANSWER_TEMPLATE.to_string(),
            by_property: BTreeMap::new(),
        }
    }
}

impl From<BTreeMap<String, String>> for AnswerTemplates {
    fn from(mut map: BTreeMap<String, String>) -> Self {
        let default = map.remove("*").unwrap_or_else(|| DEFAULT_ANSWER_TEMPLATE.to_string());
        AnswerTemplates {
            default,
            by_property: map,
        }
    }
}

impl From<AnswerTemplates> for BTreeMap<String, String> {
    fn from(t: AnswerTemplates) -> Self {
        let mut map = t.by_property;
        map.insert("*".to_string(), t.default);
        map
    }
}

impl AnswerTemplates {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, QaError> {
        let text = std::fs::read_to_string(path).map_err(|e| QaError::Io(e.to_string()))?;
        let t: AnswerTemplates = serde_json::from_str(&text).map_err(|e| QaError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), QaError> {
        for (name, t) in std::iter::once(("*", &self.default)).chain(self.by_property.iter().map(|(k, v)| (k.as_str(), v))) {
            if !t.contains("{value}") {
                return Err(QaError::InvalidConfig(format!("template {name:?} lacks {{value}}")));
            }
        }
        Ok(())
    }

    pub fn render(&self, item: &str, property: &str, value: &str) -> String {
        self.by_property
            .get(property)
            .unwrap_or(&self.default)
            .replace("{item}", item)
            .replace("{property}", property)
            .replace("{value}", value)
    }
}

/// Answers the first property named in `query` from the item's
/// `has_property` triples. `Ok(None)` when no property is named or the item
/// stores no value for it.
pub fn kbqa(
    query: &str,
    item: &str,
    kg: &KnowledgeGraph,
    properties: &Lexicon,
    templates: &AnswerTemplates,
) -> Result<Option<AnswerPayload>, QaError> {
    let entity = kg
        .entity(item)
        .filter(|e| e.kind == EntityKind::Item)
        .ok_or_else(|| QaError::UnknownItem(item.to_string()))?;
    let tagged = ner_tag(query, properties);
    let Some(first) = tagged.spans.first() else {
        return Ok(None);
    };
    if tagged.spans.len() > 1 {
        log::debug!("kbqa answers {:?} only; also named {:?}", first.semantic_type, &tagged.spans[1..]);
    }
    let property = first.semantic_type.as_str();
    let mut values: Vec<&str> = kg
        .outgoing(item, RelationKind::HasProperty)
        .filter(|t| t.qualifier.as_deref() == Some(property))
        .map(|t| t.target.as_str())
        .collect();
    values.sort_unstable();
    values.dedup();
    if values.is_empty() {
        return Ok(None);
    }
    let mut labels = Vec::with_capacity(values.len());
    let mut images = Vec::new();
    for id in values {
        labels.push(kg.entity(id).expect("triple targets exist").label.as_str());
        for img in kg.images_of(id) {
            if !images.contains(&img.id) {
                images.push(img.id.clone());
            }
        }
    }
    Ok(Some(AnswerPayload {
        text: templates.render(&entity.label, property, &labels.join("、")),
        images,
        source: AnswerSource::Kbqa,
    }))
}
