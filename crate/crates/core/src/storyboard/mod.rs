//! Short-video storyboards: one templated utterance and the linked images
//! per node of a cognitive path.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{cognitive_paths, CognitivePath, EntityKind, KnowledgeGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoryboardError {
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} has no complete cognitive path")]
    NoPath(String),
    #[error("selector matched none of the {0} paths")]
    NoSelection(usize),
    #[error("invalid templates: {0}")]
    InvalidTemplates(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub node: String,
    pub kind: EntityKind,
    pub utterance: String,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Storyboard {
    pub item: String,
    pub frames: Vec<Frame>,
}

/// Chooses one of the item's paths, which arrive sorted by node ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSelector {
    #[default]
    First,
    Nth(usize),
    /// First path with this entity id among its nodes.
    Through(String),
}

impl PathSelector {
    pub fn select<'a>(&self, paths: &'a [CognitivePath]) -> Option<&'a CognitivePath> {
        match self {
            PathSelector::First => paths.first(),
            PathSelector::Nth(n) => paths.get(*n),
            PathSelector::Through(id) => paths.iter().find(|p| p.nodes().contains(&id.as_str())),
        }
    }
}

/// Per-kind utterance templates. Placeholders: `{scenario}`, `{problem}`,
/// `{poi}`, `{value}`, `{item}` for the labels of the path's nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoryTemplates {
    pub scenario: String,
    pub problem: String,
    pub poi: String,
    pub property_value: String,
    pub item: String,
}

impl Default for StoryTemplates {
    fn default() -> Self {
        StoryTemplates {
            scenario: "{scenario}容易导致{problem}。".into(),
            problem: "{problem}的时候，需要{poi}。".into(),
            poi: "想要{poi}，可以试试{value}。".into(),
            property_value: "{value}能帮助{poi}。".into(),
            item: "推荐这款含有{value}的{item}。".into(),
        }
    }
}

impl StoryTemplates {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoryboardError> {
        let text = std::fs::read_to_string(path).map_err(|e| StoryboardError::Io(e.to_string()))?;
        let t: StoryTemplates =
            serde_json::from_str(&text).map_err(|e| StoryboardError::InvalidTemplates(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), StoryboardError> {
        for (name, t) in self.in_order() {
            if t.trim().is_empty() {
                return Err(StoryboardError::InvalidTemplates(format!("{name} template is empty")));
            }
        }
        Ok(())
    }

    fn in_order(&self) -> [(&'static str, &str); 5] {
        [
            ("scenario", &self.scenario),
            ("problem", &self.problem),
            ("poi", &self.poi),
            ("property_value", &self.property_value),
            ("item", &self.item),
        ]
    }
}

fn fill(template: &str, labels: &BTreeMap<&str, &str>) -> String {
    labels
        .iter()
        .fold(template.to_string(), |s, (k, v)| s.replace(&format!("{{{k}}}"), v))
}

pub const FRAME_KINDS: [EntityKind; 5] = [
    EntityKind::Scenario,
    EntityKind::Problem,
    EntityKind::Poi,
    EntityKind::PropertyValue,
    EntityKind::Item,
];

/// Storyboard along `path`, one frame per node in path order.
pub fn storyboard_for_path(kg: &KnowledgeGraph, path: &CognitivePath, templates: &StoryTemplates) -> Storyboard {
    let nodes = path.nodes();
    let label = |id: &str| kg.entity(id).map(|e| e.label.as_str()).expect("path nodes exist");
    let labels: BTreeMap<&str, &str> = ["scenario", "problem", "poi", "value", "item"]
        .into_iter()
        .zip(nodes.iter().map(|id| label(id)))
        .collect();
    let frames = nodes
        .iter()
        .zip(FRAME_KINDS)
        .zip(templates.in_order())
        .map(|((id, kind), (_, template))| Frame {
            node: id.to_string(),
            kind,
            utterance: fill(template, &labels),
            images: kg.images_of(id).into_iter().map(|e| e.id.clone()).collect(),
        })
        .collect();
    Storyboard {
        item: path.item.clone(),
        frames,
    }
}

pub fn generate_storyboard(
    kg: &KnowledgeGraph,
    item: &str,
    selector: &PathSelector,
    templates: &StoryTemplates,
) -> Result<Storyboard, StoryboardError> {
    if kg.entity(item).is_none_or(|e| e.kind != EntityKind::Item) {
        return Err(StoryboardError::UnknownItem(item.to_string()));
    }
    let paths = cognitive_paths(kg, item).expect("item checked above");
    if paths.is_empty() {
        return Err(StoryboardError::NoPath(item.to_string()));
    }
    let path = selector
        .select(&paths)
        .ok_or(StoryboardError::NoSelection(paths.len()))?;
    Ok(storyboard_for_path(kg, path, templates))
}
