use serde::Serialize;

use super::lexicon::Lexicon;
use crate::tokenize::tokenize;

/// Half-open token range tagged with a semantic type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub semantic_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TaggedText {
    pub tokens: Vec<String>,
    /// Sorted by start, pairwise disjoint.
    pub spans: Vec<Span>,
}

impl TaggedText {
    pub fn has_type(&self, semantic_type: &str) -> bool {
        self.spans.iter().any(|s| s.semantic_type == semantic_type)
    }

    pub fn first_of(&self, semantic_type: &str) -> Option<&Span> {
        self.spans.iter().find(|s| s.semantic_type == semantic_type)
    }
}

/// Greedy left-to-right longest match over token n-grams.
pub fn tag_tokens(tokens: Vec<String>, lexicon: &Lexicon) -> TaggedText {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = (1..=lexicon.max_tokens().min(tokens.len() - i))
            .rev()
            .find_map(|n| lexicon.get(&tokens[i..i + n]).map(|e| (n, e)));
        match longest {
            Some((n, entry)) => {
                spans.push(Span {
                    start: i,
                    end: i + n,
                    surface: entry.surface.clone(),
                    semantic_type: entry.semantic_type.clone(),
                });
                i += n;
            }
            None => i += 1,
        }
    }
    TaggedText { tokens, spans }
}

pub fn ner_tag(text: &str, lexicon: &Lexicon) -> TaggedText {
    tag_tokens(tokenize(text), lexicon)
}
