//! Forward-chaining completion.
//!
//! Two rules, iterated to a fixpoint with derived provenance:
//!
//! ```text
//! (item, has_property:p, pv) ∧ (pv, satisfy, poi)   ⇒ (item, has_poi, poi)
//! (user, has_problem, pr)    ∧ (pr, need, poi)      ⇒ (user, prefer, poi)
//! ```
//!
//! Each round joins only against triples added in the previous round (the
//! first round treats every triple as new). Neither rule consumes its own
//! output today, so the loop ends after one productive round, but the
//! driver stays correct if chaining rules are added.

use std::collections::BTreeSet;

use super::graph::KnowledgeGraph;
use super::model::{RelationKind, Triple};

/// A binary join rule `(a, first, b) ∧ (b, second, c) ⇒ (a, head, c)`.
#[derive(Debug, Clone, Copy)]
pub struct JoinRule {
    pub first: RelationKind,
    pub second: RelationKind,
    pub head: RelationKind,
}

pub const ITEM_POI_RULE: JoinRule = JoinRule {
    first: RelationKind::HasProperty,
    second: RelationKind::Satisfy,
    head: RelationKind::HasPoi,
};

pub const USER_PREFERENCE_RULE: JoinRule = JoinRule {
    first: RelationKind::HasProblem,
    second: RelationKind::Need,
    head: RelationKind::Prefer,
};

pub const RULES: [JoinRule; 2] = [ITEM_POI_RULE, USER_PREFERENCE_RULE];

/// Runs completion to a fixpoint and returns the number of triples added.
pub fn run_completion(kg: &mut KnowledgeGraph) -> usize {
    let mut added = 0;
    let mut delta: Option<BTreeSet<usize>> = None;
    loop {
        let start = kg.triple_count();
        let batch = derive_round(kg, delta.as_ref());
        if batch.is_empty() {
            return added;
        }
        kg.push_derived(batch);
        let end = kg.triple_count();
        added += end - start;
        delta = Some((start..end).collect());
    }
}

fn derive_round(kg: &KnowledgeGraph, delta: Option<&BTreeSet<usize>>) -> Vec<Triple> {
    let triples = kg.triples();
    let is_new = |i: usize| delta.is_none_or(|d| d.contains(&i));
    let mut out: BTreeSet<Triple> = BTreeSet::new();
    for rule in RULES {
        for (i, first) in triples.iter().enumerate() {
            if first.relation != rule.first {
                continue;
            }
            for (j, second) in kg.outgoing_indexed(&first.target, rule.second) {
                if !(is_new(i) || is_new(j)) {
                    continue;
                }
                let t = Triple::derived(&first.source, rule.head, &second.target);
                if !kg.contains(&t.key()) {
                    out.insert(t);
                }
            }
        }
    }
    out.into_iter().collect()
}
