//! Line-oriented JSON persistence.
//!
//! ```text
//! {"rec":"entity","id":..,"kind":..,"label":..,"aliases":[..],"attributes":{..}}
//! {"rec":"triple","source":..,"relation":..,"qualifier":..,"target":..,"provenance":..}
//! ```
//!
//! Entities are written first (id order), then triples (insertion order).
//! Unknown fields are rejected.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::KnowledgeGraph;
use super::model::{Entity, EntityKind, Provenance, RelationKind, Triple};
use super::KgError;

#[derive(Debug, Error)]
pub enum ImportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: KgError },
}

impl ImportError {
    /// 1-based line of the offending record, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            ImportError::Io(_) => None,
            ImportError::Parse { line, .. } | ImportError::Invalid { line, .. } => Some(*line),
        }
    }

    pub fn graph_error(&self) -> Option<&KgError> {
        match self {
            ImportError::Invalid { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityRecord {
    id: String,
    kind: EntityKind,
    label: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripleRecord {
    source: String,
    relation: RelationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qualifier: Option<String>,
    target: String,
    #[serde(default = "asserted")]
    provenance: Provenance,
}

fn asserted() -> Provenance {
    Provenance::Asserted
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    rec: &'a str,
    #[serde(flatten)]
    body: T,
}

/// One parsed line.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Entity(Entity),
    Triple(Triple),
}

impl Record {
    pub fn parse(line: &str) -> Result<Record, String> {
        let mut value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| "record is not a JSON object".to_string())?;
        let rec = obj
            .remove("rec")
            .ok_or_else(|| "missing \"rec\" field".to_string())?;
        match rec.as_str() {
            Some("entity") => {
                let r: EntityRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
                Ok(Record::Entity(Entity {
                    id: r.id,
                    kind: r.kind,
                    label: r.label,
                    aliases: r.aliases,
                    attributes: r.attributes,
                }))
            }
            Some("triple") => {
                let r: TripleRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
                Ok(Record::Triple(Triple {
                    source: r.source,
                    relation: r.relation,
                    target: r.target,
                    qualifier: r.qualifier,
                    provenance: r.provenance,
                }))
            }
            _ => Err(format!("unknown record type {rec}")),
        }
    }

    pub fn to_line(&self) -> String {
        let s = match self {
            Record::Entity(e) => serde_json::to_string(&Tagged {
                rec: "entity",
                body: EntityRecord {
                    id: e.id.clone(),
                    kind: e.kind,
                    label: e.label.clone(),
                    aliases: e.aliases.clone(),
                    attributes: e.attributes.clone(),
                },
            }),
            Record::Triple(t) => serde_json::to_string(&Tagged {
                rec: "triple",
                body: TripleRecord {
                    source: t.source.clone(),
                    relation: t.relation,
                    qualifier: t.qualifier.clone(),
                    target: t.target.clone(),
                    provenance: t.provenance,
                },
            }),
        };
        s.expect("records serialize")
    }
}

/// Reads a graph, validating every record. Exact duplicate triples are
/// skipped; any other violation aborts with its line number. No completion
/// is run.
pub fn read_jsonl(reader: impl Read) -> Result<KnowledgeGraph, ImportError> {
    let mut kg = KnowledgeGraph::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = Record::parse(&line).map_err(|message| ImportError::Parse {
            line: line_no,
            message,
        })?;
        let res = match record {
            Record::Entity(e) => kg.add_entity(e).map(|_| ()),
            Record::Triple(t) => match kg.insert_checked(t) {
                Err(KgError::AlreadyPresent(_)) => Ok(()),
                other => other,
            },
        };
        res.map_err(|source| ImportError::Invalid {
            line: line_no,
            source,
        })?;
    }
    Ok(kg)
}

pub fn write_jsonl(kg: &KnowledgeGraph, writer: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    for e in kg.entities() {
        writeln!(w, "{}", Record::Entity(e.clone()).to_line())?;
    }
    for t in kg.triples() {
        writeln!(w, "{}", Record::Triple(t.clone()).to_line())?;
    }
    w.flush()
}

pub fn import_jsonl(path: impl AsRef<Path>) -> Result<KnowledgeGraph, ImportError> {
    read_jsonl(File::open(path)?)
}

pub fn export_jsonl(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> io::Result<()> {
    write_jsonl(kg, File::create(path)?)
}
