use std::collections::BTreeMap;

use serde::Serialize;

use super::graph::KnowledgeGraph;
use super::model::{EntityKind, Provenance, RelationKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub entities: BTreeMap<EntityKind, usize>,
    pub relations: BTreeMap<RelationKind, usize>,
    pub asserted: usize,
    pub derived: usize,
}

impl GraphStats {
    pub fn entity_total(&self) -> usize {
        self.entities.values().sum()
    }

    pub fn triple_total(&self) -> usize {
        self.relations.values().sum()
    }
}

/// Counts per entity kind and relation kind; every kind appears, zero or not.
pub fn stats(kg: &KnowledgeGraph) -> GraphStats {
    let mut entities: BTreeMap<_, _> = EntityKind::ALL.iter().map(|&k| (k, 0)).collect();
    let mut relations: BTreeMap<_, _> = RelationKind::ALL.iter().map(|&k| (k, 0)).collect();
    for e in kg.entities() {
        *entities.get_mut(&e.kind).unwrap() += 1;
    }
    let (mut asserted, mut derived) = (0, 0);
    for t in kg.triples() {
        *relations.get_mut(&t.relation).unwrap() += 1;
        match t.provenance {
            Provenance::Asserted => asserted += 1,
            Provenance::Derived => derived += 1,
        }
    }
    GraphStats {
        entities,
        relations,
        asserted,
        derived,
    }
}
