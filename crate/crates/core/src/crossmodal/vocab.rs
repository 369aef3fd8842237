use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tokenize::tokenize;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const MASK: usize = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[MASK]"];

/// Token ids with a leading CLS. Mask positions index into `ids` and never
/// include 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub mask_positions: Vec<usize>,
}

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        TokenSequence {
            ids,
            mask_positions: Vec::new(),
        }
    }

    pub fn with_mask(mut self, positions: Vec<usize>) -> Self {
        self.mask_positions = positions;
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn check(&self, max_text_len: usize, vocab_size: usize) -> Result<(), ModelError> {
        if self.ids.first() != Some(&CLS) {
            return Err(ModelError::InvalidInput("token sequence must start with CLS".into()));
        }
        if self.ids.len() > max_text_len + 1 {
            return Err(ModelError::LengthExceeded {
                len: self.ids.len(),
                max: max_text_len + 1,
            });
        }
        if let Some(&bad) = self.ids.iter().find(|&&id| id >= vocab_size) {
            return Err(ModelError::InvalidInput(format!("token id {bad} >= vocab size {vocab_size}")));
        }
        if self.mask_positions.iter().any(|&p| p == 0 || p >= self.ids.len()) {
            return Err(ModelError::InvalidInput("mask position outside maskable tokens".into()));
        }
        Ok(())
    }
}

/// Corpus vocabulary: special tokens, then tokens by descending frequency,
/// ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            ranked
                .into_iter()
                .map(|(t, _)| t)
                .take(max_size.saturating_sub(SPECIAL_TOKENS.len())),
        );
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// CLS followed by at most `max_len` token ids.
    pub fn encode(&self, text: &str, max_len: usize) -> TokenSequence {
        let mut ids = vec![CLS];
        ids.extend(tokenize(text).iter().take(max_len).map(|t| self.id(t)));
        TokenSequence::new(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_unk() {
        let v = Vocab::build(["口红 red", "口红 blue", "red"], 100);
        assert_eq!(&v.tokens()[..4], &SPECIAL_TOKENS.map(String::from));
        // 口, 红, red each appear twice; blue once
        assert_eq!(&v.tokens()[4..], ["red", "口", "红", "blue"]);
        let seq = v.encode("口红 green", 10);
        assert_eq!(seq.ids, vec![CLS, 5, 6, UNK]);
        assert_eq!(v.encode("口红 green", 1).ids, vec![CLS, 5]);
    }

    #[test]
    fn sequence_checks() {
        let s = TokenSequence::new(vec![CLS, 4, 5]);
        assert!(s.check(2, 10).is_ok());
        assert!(matches!(s.check(1, 10), Err(ModelError::LengthExceeded { len: 3, max: 2 })));
        assert!(s.clone().with_mask(vec![0]).check(2, 10).is_err());
        assert!(TokenSequence::new(vec![4]).check(2, 10).is_err());
    }
}
