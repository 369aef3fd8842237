use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::ner::{ner_tag, TaggedText};
use super::RetrievalError;
use crate::kg::{EntityKind, KnowledgeGraph, RelationKind};

/// Item attribute holding free-text profile copy.
pub const PROFILE_ATTR: &str = "profile";

/// Search view of one item: its tokens and `(type, surface)` pairs drawn
/// from label, aliases, profile and property-value labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemDoc {
    pub item: String,
    pub tokens: BTreeSet<String>,
    pub typed: BTreeSet<(String, String)>,
}

impl ItemDoc {
    /// Each text is tagged on its own so no span crosses two fields.
    pub fn from_texts<'a>(item: impl Into<String>, texts: impl IntoIterator<Item = &'a str>, lexicon: &Lexicon) -> Self {
        let mut tokens = BTreeSet::new();
        let mut typed = BTreeSet::new();
        for text in texts {
            let tagged = ner_tag(text, lexicon);
            for s in tagged.spans {
                typed.insert((s.semantic_type, s.surface));
            }
            tokens.extend(tagged.tokens);
        }
        ItemDoc {
            item: item.into(),
            tokens,
            typed,
        }
    }

    pub fn from_kg(kg: &KnowledgeGraph, item: &str, lexicon: &Lexicon) -> Result<Self, RetrievalError> {
        let entity = kg
            .entity(item)
            .filter(|e| e.kind == EntityKind::Item)
            .ok_or_else(|| RetrievalError::UnknownItem(item.to_string()))?;
        let mut texts: Vec<&str> = entity.surface_forms().collect();
        if let Some(profile) = entity.attributes.get(PROFILE_ATTR) {
            texts.push(profile);
        }
        let values = kg.targets(item, RelationKind::HasProperty);
        texts.extend(values.iter().map(|v| v.label.as_str()));
        Ok(Self::from_texts(item, texts, lexicon))
    }
}

/// Every item of a graph as an [`ItemDoc`], in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    pub docs: Vec<ItemDoc>,
}

impl Catalog {
    pub fn from_kg(kg: &KnowledgeGraph, lexicon: &Lexicon) -> Self {
        let docs = kg
            .entities_of(EntityKind::Item)
            .map(|e| ItemDoc::from_kg(kg, &e.id, lexicon).expect("item listed by the graph"))
            .collect();
        Catalog { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    /// Weight of token-set Jaccard overlap.
    pub alpha: f64,
    /// Per-type bonus; types not listed use `default_beta`.
    pub beta: BTreeMap<String, f64>,
    pub default_beta: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            alpha: 1.0,
            beta: BTreeMap::from([("category".to_string(), 2.0), ("brand".to_string(), 1.5)]),
            default_beta: 1.0,
        }
    }
}

impl ScoreWeights {
    pub fn beta_for(&self, semantic_type: &str) -> f64 {
        self.beta.get(semantic_type).copied().unwrap_or(self.default_beta)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let ok = self.alpha >= 0.0 && self.default_beta >= 0.0 && self.beta.values().all(|&b| b >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(RetrievalError::InvalidParams(format!("negative weight in {self:?}")))
        }
    }
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// `alpha * jaccard + sum of beta_t` over the types `t` for which some
/// query span of type `t` also appears, same surface, among the doc's
/// type-`t` spans. Each type counts once.
pub fn score(q: &TaggedText, d: &ItemDoc, w: &ScoreWeights) -> f64 {
    let q_tokens: BTreeSet<String> = q.tokens.iter().cloned().collect();
    let mut matched = BTreeSet::new();
    for s in &q.spans {
        if d.typed.contains(&(s.semantic_type.clone(), s.surface.clone())) {
            matched.insert(s.semantic_type.as_str());
        }
    }
    let bonus: f64 = matched.into_iter().map(|t| w.beta_for(t)).sum();
    w.alpha * jaccard(&q_tokens, &d.tokens) + bonus
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub item: String,
    pub score: f64,
}

/// Top `k` items by score, ties by item id; zero scores dropped.
pub fn search(
    query: &str,
    catalog: &Catalog,
    lexicon: &Lexicon,
    w: &ScoreWeights,
    k: usize,
) -> Result<Vec<SearchHit>, RetrievalError> {
    if catalog.is_empty() {
        return Err(RetrievalError::EmptyCatalog);
    }
    if k == 0 {
        return Err(RetrievalError::InvalidParams("k must be at least 1".into()));
    }
    let q = ner_tag(query, lexicon);
    let mut hits: Vec<SearchHit> = catalog
        .docs
        .iter()
        .map(|d| SearchHit {
            item: d.item.clone(),
            score: score(&q, d, w),
        })
        .filter(|h| h.score > 0.0)
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.item.cmp(&b.item))
    });
    hits.truncate(k);
    Ok(hits)
}
