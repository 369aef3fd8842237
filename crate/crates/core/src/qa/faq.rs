use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnswerPayload, AnswerSource, QaError};
use crate::crossmodal::Encoders;
use crate::tokenize::tokenize;
use crate::Scalar;

pub const DEFAULT_THETA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaqEntry {
    pub q: String,
    pub a: String,
}

/// Similarity of a query to each stored question, in store order.
pub trait FaqSimilarity: Send + Sync {
    fn similarities(&self, query: &str) -> Vec<f64>;
}

type SparseVec = BTreeMap<String, f64>;

/// Cosine over tf-idf vectors of the shared tokens, with smoothed
/// `idf = ln((1 + n) / (1 + df)) + 1`. Query tokens unseen in the store are
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfSimilarity {
    idf: BTreeMap<String, f64>,
    docs: Vec<SparseVec>,
}

impl TfIdfSimilarity {
    pub fn new(entries: &[FaqEntry]) -> Self {
        let n = entries.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let token_lists: Vec<Vec<String>> = entries.iter().map(|e| tokenize(&e.q)).collect();
        for tokens in &token_lists {
            let mut seen: Vec<&String> = tokens.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let mut out = TfIdfSimilarity { idf, docs: Vec::new() };
        out.docs = token_lists.iter().map(|t| out.vectorize(t)).collect();
        out
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.idf.get(token).copied()
    }

    fn vectorize(&self, tokens: &[String]) -> SparseVec {
        let mut v = SparseVec::new();
        for t in tokens {
            if let Some(&w) = self.idf.get(t) {
                *v.entry(t.clone()).or_default() += w;
            }
        }
        v
    }
}

fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum()
}

/// `a.b / sqrt(|a|^2 |b|^2)` so that identical vectors give exactly 1.
fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let denom = (dot(a, a) * dot(b, b)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (dot(a, b) / denom).clamp(0.0, 1.0)
    }
}

impl FaqSimilarity for TfIdfSimilarity {
    fn similarities(&self, query: &str) -> Vec<f64> {
        let q = self.vectorize(&tokenize(query));
        self.docs.iter().map(|d| cosine(&q, d)).collect()
    }
}

/// Cosine of text-encoder CLS vectors, clamped below at 0.
pub struct EncoderSimilarity<T: Scalar> {
    encoders: Encoders<T>,
    questions: Vec<Vec<f64>>,
}

impl<T: Scalar> EncoderSimilarity<T> {
    pub fn new(encoders: Encoders<T>, entries: &[FaqEntry]) -> Self {
        let mut out = EncoderSimilarity {
            encoders,
            questions: Vec::new(),
        };
        out.questions = entries.iter().map(|e| out.embed(&e.q)).collect();
        out
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let cls = self.encoders.text_cls(text).expect("tokenize truncates to the model length");
        cls.iter().map(|v| v.as_f64()).collect()
    }
}

impl<T: Scalar> FaqSimilarity for EncoderSimilarity<T> {
    fn similarities(&self, query: &str) -> Vec<f64> {
        let q = self.embed(query);
        let qq: f64 = q.iter().map(|v| v * v).sum();
        self.questions
            .iter()
            .map(|d| {
                let dd: f64 = d.iter().map(|v| v * v).sum();
                let denom = (qq * dd).sqrt();
                if denom == 0.0 {
                    0.0
                } else {
                    (q.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / denom).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

pub struct FaqStore {
    entries: Vec<FaqEntry>,
    similarity: Box<dyn FaqSimilarity>,
}

impl std::fmt::Debug for FaqStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FaqStore").field("entries", &self.entries).finish_non_exhaustive()
    }
}

impl FaqStore {
    /// Store with the tf-idf backend.
    pub fn new(entries: Vec<FaqEntry>) -> Result<Self, QaError> {
        let sim = TfIdfSimilarity::new(&entries);
        Self::with_similarity(entries, Box::new(sim))
    }

    pub fn with_similarity(entries: Vec<FaqEntry>, similarity: Box<dyn FaqSimilarity>) -> Result<Self, QaError> {
        if let Some(i) = entries.iter().position(|e| e.q.trim().is_empty() || e.a.trim().is_empty()) {
            return Err(QaError::InvalidConfig(format!("FAQ entry {i} has an empty field")));
        }
        Ok(FaqStore { entries, similarity })
    }

    /// JSONL, one `{"q": ..., "a": ...}` per line; blank lines skipped.
    pub fn read_entries(reader: impl Read) -> Result<Vec<FaqEntry>, QaError> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| QaError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FaqEntry = serde_json::from_str(&line).map_err(|e| QaError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(entry);
        }
        Ok(out)
    }

    pub fn load_entries(path: impl AsRef<Path>) -> Result<Vec<FaqEntry>, QaError> {
        let file = std::fs::File::open(path).map_err(|e| QaError::Io(e.to_string()))?;
        Self::read_entries(file)
    }

    pub fn entries(&self) -> &[FaqEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn similarities(&self, query: &str) -> Vec<f64> {
        self.similarity.similarities(query)
    }

    /// Index and similarity of the most similar question; the earliest entry
    /// wins ties.
    pub fn best_match(&self, query: &str) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.similarities(query).into_iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    }
}

/// Answer of the best FAQ when its similarity reaches `theta`, otherwise
/// `default_reply` as a fallback.
///
/// # Panics
/// If `theta` is outside `[0, 1]`.
pub fn faq_fallback(query: &str, store: &FaqStore, theta: f64, default_reply: &str) -> AnswerPayload {
    assert!((0.0..=1.0).contains(&theta), "theta {theta} outside [0, 1]");
    match store.best_match(query) {
        Some((i, s)) if s >= theta => AnswerPayload {
            text: store.entries[i].a.clone(),
            images: Vec::new(),
            source: AnswerSource::Faq,
        },
        _ => AnswerPayload {
            text: default_reply.to_string(),
            images: Vec::new(),
            source: AnswerSource::Fallback,
        },
    }
}
