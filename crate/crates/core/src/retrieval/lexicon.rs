use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::RetrievalError;
use crate::tokenize::tokenize;

/// Seed semantic types; the set is open and any other type string is
/// accepted.
pub const SEED_TYPES: [&str; 5] = ["category", "brand", "functionality", "color", "size"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    /// Surface form as written in the source.
    pub surface: String,
    pub semantic_type: String,
}

/// Surface form to semantic type, keyed by the surface's token sequence so
/// matching runs over tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, LexiconEntry>,
    max_tokens: usize,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces an entry; returns the entry it replaced. Surfaces
    /// that tokenize to nothing are rejected.
    pub fn insert(&mut self, surface: &str, semantic_type: &str) -> Result<Option<LexiconEntry>, RetrievalError> {
        let key = tokenize(surface);
        if key.is_empty() || semantic_type.trim().is_empty() {
            return Err(RetrievalError::InvalidEntry(format!("{surface:?} -> {semantic_type:?}")));
        }
        self.max_tokens = self.max_tokens.max(key.len());
        let entry = LexiconEntry {
            surface: surface.trim().to_string(),
            semantic_type: semantic_type.trim().to_string(),
        };
        Ok(self.entries.insert(key, entry))
    }

    pub fn get(&self, tokens: &[String]) -> Option<&LexiconEntry> {
        self.entries.get(tokens)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest entry in tokens.
    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[String], &LexiconEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// TSV `surface<TAB>type`, one entry per line. Blank lines and lines
    /// starting with `#` are skipped; a later line for the same surface wins.
    pub fn read_tsv(reader: impl Read) -> Result<Self, RetrievalError> {
        let mut lex = Lexicon::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| RetrievalError::Io(e.to_string()))?;
            let n = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, ty) = line.split_once('\t').ok_or_else(|| RetrievalError::Parse {
                line: n,
                message: "expected surface<TAB>type".into(),
            })?;
            let previous = lex.insert(surface, ty).map_err(|e| RetrievalError::Parse {
                line: n,
                message: e.to_string(),
            })?;
            if let Some(p) = previous {
                log::warn!(
                    "lexicon line {n}: {:?} redefined ({:?} -> {:?})",
                    surface.trim(),
                    p.semantic_type,
                    ty.trim()
                );
            }
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| RetrievalError::Io(format!("{}: {e}", path.display())))?;
        Self::read_tsv(file)
    }
}
