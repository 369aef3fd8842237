use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ontology concept of a node. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    User,
    Item,
    Scenario,
    Problem,
    #[serde(rename = "POI")]
    Poi,
    PropertyValue,
    Image,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::User,
        EntityKind::Item,
        EntityKind::Scenario,
        EntityKind::Problem,
        EntityKind::Poi,
        EntityKind::PropertyValue,
        EntityKind::Image,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "User",
            EntityKind::Item => "Item",
            EntityKind::Scenario => "Scenario",
            EntityKind::Problem => "Problem",
            EntityKind::Poi => "POI",
            EntityKind::PropertyValue => "PropertyValue",
            EntityKind::Image => "Image",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown entity kind {s:?}"))
    }
}

/// Link type between two entities, each with a fixed kind signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// Scenario -> Problem
    Cause,
    /// Problem -> POI
    Need,
    /// PropertyValue -> POI
    Satisfy,
    /// Item -> PropertyValue, qualified by the property name
    HasProperty,
    /// any non-Image -> Image
    HasImage,
    /// User -> Problem
    HasProblem,
    /// Item -> POI, derivable
    HasPoi,
    /// User -> POI, derivable
    Prefer,
}

impl RelationKind {
    pub const ALL: [RelationKind; 8] = [
        RelationKind::Cause,
        RelationKind::Need,
        RelationKind::Satisfy,
        RelationKind::HasProperty,
        RelationKind::HasImage,
        RelationKind::HasProblem,
        RelationKind::HasPoi,
        RelationKind::Prefer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Cause => "cause",
            RelationKind::Need => "need",
            RelationKind::Satisfy => "satisfy",
            RelationKind::HasProperty => "has_property",
            RelationKind::HasImage => "has_image",
            RelationKind::HasProblem => "has_problem",
            RelationKind::HasPoi => "has_poi",
            RelationKind::Prefer => "prefer",
        }
    }

    /// Whether `(source, target)` kinds are admissible for this relation.
    pub fn admits(self, source: EntityKind, target: EntityKind) -> bool {
        use EntityKind::*;
        match self {
            RelationKind::Cause => source == Scenario && target == Problem,
            RelationKind::Need => source == Problem && target == Poi,
            RelationKind::Satisfy => source == PropertyValue && target == Poi,
            RelationKind::HasProperty => source == Item && target == PropertyValue,
            RelationKind::HasImage => source != Image && target == Image,
            RelationKind::HasProblem => source == User && target == Problem,
            RelationKind::HasPoi => source == Item && target == Poi,
            RelationKind::Prefer => source == User && target == Poi,
        }
    }

    /// Relations that completion may materialize.
    pub fn is_derivable(self) -> bool {
        matches!(self, RelationKind::HasPoi | RelationKind::Prefer)
    }

    pub fn requires_qualifier(self) -> bool {
        self == RelationKind::HasProperty
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Asserted,
    Derived,
}

/// Attribute key that locates the raster file of an Image entity.
pub const IMAGE_PATH_ATTR: &str = "path";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Entity {
    pub fn new(id: impl Into<String>, kind: EntityKind, label: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            kind,
            label: label.into(),
            aliases: Vec::new(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_alias(mut self, alias: impl Into<String>) -> Self {
        self.aliases.push(alias.into());
        self
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    /// Label followed by aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub source: String,
    pub relation: RelationKind,
    pub target: String,
    pub qualifier: Option<String>,
    pub provenance: Provenance,
}

impl Triple {
    pub fn asserted(
        source: impl Into<String>,
        relation: RelationKind,
        target: impl Into<String>,
    ) -> Self {
        Triple {
            source: source.into(),
            relation,
            target: target.into(),
            qualifier: None,
            provenance: Provenance::Asserted,
        }
    }

    pub fn property(
        item: impl Into<String>,
        name: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Triple {
            qualifier: Some(name.into()),
            ..Triple::asserted(item, RelationKind::HasProperty, value)
        }
    }

    pub(crate) fn derived(source: &str, relation: RelationKind, target: &str) -> Self {
        Triple {
            provenance: Provenance::Derived,
            ..Triple::asserted(source, relation, target)
        }
    }

    /// Uniqueness key; provenance is not part of identity.
    pub fn key(&self) -> TripleKey {
        TripleKey {
            source: self.source.clone(),
            relation: self.relation,
            qualifier: self.qualifier.clone(),
            target: self.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey {
    pub source: String,
    pub relation: RelationKind,
    pub qualifier: Option<String>,
    pub target: String,
}

impl fmt::Display for TripleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "({}, {}:{}, {})", self.source, self.relation, q, self.target),
            None => write!(f, "({}, {}, {})", self.source, self.relation, self.target),
        }
    }
}
