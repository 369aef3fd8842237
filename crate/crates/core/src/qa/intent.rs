use serde::{Deserialize, Serialize};

use super::Session;
use crate::kg::{EntityKind, KnowledgeGraph};
use crate::retrieval::{ner_tag, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intent {
    ViewItem,
    ItemQuestion,
    OutOfScope,
}

/// Phrases matched as lower-cased substrings of the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntentRules {
    pub view_triggers: Vec<String>,
    pub question_markers: Vec<String>,
    /// Semantic types that make a view request concrete.
    pub view_types: Vec<String>,
}

impl Default for IntentRules {
    fn default() -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        IntentRules {
            view_triggers: strings(&["看", "show", "see"]),
            question_markers: strings(&["吗", "?", "？", "多大", "什么"]),
            view_types: strings(&["category", "brand"]),
        }
    }
}

fn contains_any(haystack: &str, needles: &[String]) -> bool {
    needles.iter().any(|n| !n.is_empty() && haystack.contains(&n.to_lowercase()))
}

fn mentions_item(query: &str, kg: &KnowledgeGraph) -> bool {
    kg.entities_of(EntityKind::Item)
        .flat_map(|e| e.surface_forms())
        .any(|s| !s.is_empty() && query.contains(&s.to_lowercase()))
}

/// First matching rule wins:
/// 1. a view trigger plus a category/brand span or an item mention;
/// 2. a current item plus a property span or a question marker;
/// 3. anything else.
pub fn classify_intent(
    query: &str,
    session: &Session,
    kg: &KnowledgeGraph,
    semantic: &Lexicon,
    properties: &Lexicon,
    rules: &IntentRules,
) -> Intent {
    let lowered = query.to_lowercase();
    if contains_any(&lowered, &rules.view_triggers) {
        let tagged = ner_tag(query, semantic);
        let typed = rules.view_types.iter().any(|t| tagged.has_type(t));
        if typed || mentions_item(&lowered, kg) {
            return Intent::ViewItem;
        }
    }
    if session.current_item.is_some()
        && (!ner_tag(query, properties).spans.is_empty() || contains_any(&lowered, &rules.question_markers))
    {
        return Intent::ItemQuestion;
    }
    Intent::OutOfScope
}
