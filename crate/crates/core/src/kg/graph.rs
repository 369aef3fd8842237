use std::collections::{BTreeMap, HashMap};

use super::model::{Entity, EntityKind, Provenance, RelationKind, Triple, TripleKey, IMAGE_PATH_ATTR};
use super::KgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

/// Typed triple store with source/target indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<String, Entity>,
    by_label: BTreeMap<(EntityKind, String), Vec<String>>,
    triples: Vec<Triple>,
    keys: HashMap<TripleKey, usize>,
    by_source: BTreeMap<(String, RelationKind), Vec<usize>>,
    by_target: BTreeMap<(String, RelationKind), Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, entity: Entity) -> Result<String, KgError> {
        if entity.label.trim().is_empty() {
            return Err(KgError::EmptyLabel(entity.id));
        }
        if self.entities.contains_key(&entity.id) {
            return Err(KgError::DuplicateId(entity.id));
        }
        if entity.kind == EntityKind::Image && !entity.attributes.contains_key(IMAGE_PATH_ATTR) {
            return Err(KgError::MissingImagePath(entity.id));
        }
        let id = entity.id.clone();
        self.by_label
            .entry((entity.kind, entity.label.clone()))
            .or_default()
            .push(id.clone());
        self.entities.insert(id.clone(), entity);
        Ok(id)
    }

    /// Inserts an asserted triple. Exact duplicates leave the graph untouched
    /// and report [`KgError::AlreadyPresent`].
    pub fn add_triple(&mut self, triple: Triple) -> Result<(), KgError> {
        if triple.provenance != Provenance::Asserted {
            return Err(KgError::InvalidProvenance(triple.relation));
        }
        self.insert_checked(triple)
    }

    /// Validates and inserts a triple of either provenance. Derived triples
    /// are accepted only for derivable relations.
    pub(crate) fn insert_checked(&mut self, triple: Triple) -> Result<(), KgError> {
        self.validate(&triple)?;
        if self.keys.contains_key(&triple.key()) {
            return Err(KgError::AlreadyPresent(triple.key().to_string()));
        }
        self.push(triple);
        Ok(())
    }

    pub fn validate(&self, triple: &Triple) -> Result<(), KgError> {
        let source = self.require(&triple.source)?;
        let target = self.require(&triple.target)?;
        if !triple.relation.admits(source.kind, target.kind) {
            return Err(KgError::SignatureViolation {
                relation: triple.relation,
                source_kind: source.kind,
                target_kind: target.kind,
            });
        }
        if triple.relation.requires_qualifier() != triple.qualifier.is_some() {
            return Err(KgError::QualifierMismatch(triple.relation));
        }
        if triple.provenance == Provenance::Derived && !triple.relation.is_derivable() {
            return Err(KgError::InvalidProvenance(triple.relation));
        }
        Ok(())
    }

    fn push(&mut self, triple: Triple) {
        let idx = self.triples.len();
        self.keys.insert(triple.key(), idx);
        self.by_source
            .entry((triple.source.clone(), triple.relation))
            .or_default()
            .push(idx);
        self.by_target
            .entry((triple.target.clone(), triple.relation))
            .or_default()
            .push(idx);
        self.triples.push(triple);
    }

    /// Appends completion output; callers guarantee validity and novelty.
    pub(crate) fn push_derived(&mut self, batch: Vec<Triple>) {
        for t in batch {
            debug_assert!(self.validate(&t).is_ok());
            if !self.keys.contains_key(&t.key()) {
                self.push(t);
            }
        }
    }

    pub fn contains(&self, key: &TripleKey) -> bool {
        self.keys.contains_key(key)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&Entity, KgError> {
        self.entities
            .get(id)
            .ok_or_else(|| KgError::UnknownEntity(id.to_string()))
    }

    /// Entities of `kind` whose label equals `label`, in id order.
    pub fn find_by_label(&self, kind: EntityKind, label: &str) -> Vec<&Entity> {
        let mut ids: Vec<&String> = self
            .by_label
            .get(&(kind, label.to_string()))
            .map(|v| v.iter().collect())
            .unwrap_or_default();
        ids.sort();
        ids.into_iter().filter_map(|id| self.entities.get(id)).collect()
    }

    /// All entities in id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entities_of(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(move |e| e.kind == kind)
    }

    /// Triples in insertion order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Triples leaving `source` via `relation`, in insertion order.
    pub fn outgoing(&self, source: &str, relation: RelationKind) -> impl Iterator<Item = &Triple> {
        self.indexed(&self.by_source, source, relation)
    }

    /// Triples entering `target` via `relation`, in insertion order.
    pub fn incoming(&self, target: &str, relation: RelationKind) -> impl Iterator<Item = &Triple> {
        self.indexed(&self.by_target, target, relation)
    }

    pub(crate) fn outgoing_indexed(
        &self,
        source: &str,
        relation: RelationKind,
    ) -> impl Iterator<Item = (usize, &Triple)> {
        self.by_source
            .get(&(source.to_string(), relation))
            .into_iter()
            .flatten()
            .map(|&i| (i, &self.triples[i]))
    }

    fn indexed<'a>(
        &'a self,
        index: &'a BTreeMap<(String, RelationKind), Vec<usize>>,
        id: &str,
        relation: RelationKind,
    ) -> impl Iterator<Item = &'a Triple> {
        index
            .get(&(id.to_string(), relation))
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
    }

    /// Matching triples with their far-end entity, ordered by relation, far-end
    /// id, then qualifier.
    pub fn neighbors(
        &self,
        id: &str,
        relation: Option<RelationKind>,
        direction: Direction,
    ) -> Result<Vec<(&Triple, &Entity)>, KgError> {
        self.require(id)?;
        let relations: Vec<RelationKind> = match relation {
            Some(r) => vec![r],
            None => RelationKind::ALL.to_vec(),
        };
        let mut out = Vec::new();
        for r in relations {
            let (triples, far): (Vec<&Triple>, fn(&Triple) -> &str) = match direction {
                Direction::Out => (self.outgoing(id, r).collect(), |t| t.target.as_str()),
                Direction::In => (self.incoming(id, r).collect(), |t| t.source.as_str()),
            };
            for t in triples {
                out.push((t, &self.entities[far(t)]));
            }
        }
        out.sort_by(|(a, ea), (b, eb)| {
            (a.relation, &ea.id, &a.qualifier).cmp(&(b.relation, &eb.id, &b.qualifier))
        });
        Ok(out)
    }

    /// Far-end entities of `id` along `relation`, sorted by id.
    pub fn targets(&self, id: &str, relation: RelationKind) -> Vec<&Entity> {
        let mut v: Vec<&Entity> = self
            .outgoing(id, relation)
            .filter_map(|t| self.entities.get(&t.target))
            .collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v.dedup_by(|a, b| a.id == b.id);
        v
    }

    /// Image entities linked from `id`, sorted by id.
    pub fn images_of(&self, id: &str) -> Vec<&Entity> {
        self.targets(id, RelationKind::HasImage)
    }
}
