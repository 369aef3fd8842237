use serde::Serialize;

use super::graph::KnowledgeGraph;
use super::model::RelationKind;
use super::KgError;

/// Chain `Scenario -cause-> Problem -need-> POI <-satisfy- PropertyValue
/// <-has_property- Item`, stored as entity ids in that order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CognitivePath {
    pub scenario: String,
    pub problem: String,
    pub poi: String,
    pub property_value: String,
    pub item: String,
}

impl CognitivePath {
    pub fn nodes(&self) -> [&str; 5] {
        [
            &self.scenario,
            &self.problem,
            &self.poi,
            &self.property_value,
            &self.item,
        ]
    }
}

/// Every cognitive path ending at `item_id`, sorted by node ids.
pub fn cognitive_paths(kg: &KnowledgeGraph, item_id: &str) -> Result<Vec<CognitivePath>, KgError> {
    kg.require(item_id)?;
    let mut paths = Vec::new();
    for has_prop in kg.outgoing(item_id, RelationKind::HasProperty) {
        let pv = &has_prop.target;
        for sat in kg.outgoing(pv, RelationKind::Satisfy) {
            let poi = &sat.target;
            for need in kg.incoming(poi, RelationKind::Need) {
                let problem = &need.source;
                for cause in kg.incoming(problem, RelationKind::Cause) {
                    paths.push(CognitivePath {
                        scenario: cause.source.clone(),
                        problem: problem.clone(),
                        poi: poi.clone(),
                        property_value: pv.clone(),
                        item: item_id.to_string(),
                    });
                }
            }
        }
    }
    paths.sort();
    // several property names may link the same item/value pair
    paths.dedup();
    Ok(paths)
}
