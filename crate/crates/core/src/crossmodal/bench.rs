use std::time::Instant;

use serde::Serialize;

use super::encoder::Encoders;
use super::index::EmbeddingIndex;
use super::joint::JointScorer;
use super::patch::PatchSequence;
use super::ModelError;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub candidates: usize,
    pub queries: usize,
    pub two_stream_secs: f64,
    pub single_stream_secs: f64,
    /// `single_stream_secs / two_stream_secs`.
    pub speedup: f64,
    pub text_forwards_per_query: f64,
    pub image_forwards_during_match: usize,
    pub joint_forwards_per_query: f64,
}

/// Times top-`k` retrieval of every query against `candidates`, once
/// through the prebuilt `index` and once by scoring each pair with the
/// single-stream `joint` model. Row `i` of `index` must embed
/// `candidates[i]`; building it is not timed.
pub fn speedup_benchmark<T: Scalar>(
    enc: &Encoders<T>,
    joint: &JointScorer<T>,
    index: &EmbeddingIndex<T>,
    candidates: &[PatchSequence<T>],
    queries: &[String],
    k: usize,
) -> Result<SpeedupReport, ModelError> {
    if index.len() != candidates.len() {
        return Err(ModelError::InvalidInput(format!(
            "index has {} rows for {} candidates",
            index.len(),
            candidates.len()
        )));
    }
    if queries.is_empty() {
        return Err(ModelError::InvalidInput("no queries".into()));
    }
    enc.counters.reset();
    let start = Instant::now();
    for q in queries {
        std::hint::black_box(index.match_text(enc, q, k)?);
    }
    let two_stream_secs = start.elapsed().as_secs_f64();
    let text_forwards = enc.counters.text();
    let image_forwards = enc.counters.image();

    joint.reset_counter();
    let start = Instant::now();
    for q in queries {
        let tokens = enc.tokenize(q);
        let mut scored: Vec<(T, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| joint.score(&tokens, c).map(|s| (s, i)))
            .collect::<Result<_, _>>()?;
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores").then(a.1.cmp(&b.1)));
        scored.truncate(k);
        std::hint::black_box(scored);
    }
    let single_stream_secs = start.elapsed().as_secs_f64();
    let n = queries.len() as f64;
    Ok(SpeedupReport {
        candidates: candidates.len(),
        queries: queries.len(),
        two_stream_secs,
        single_stream_secs,
        speedup: single_stream_secs / two_stream_secs,
        text_forwards_per_query: text_forwards as f64 / n,
        image_forwards_during_match: image_forwards,
        joint_forwards_per_query: joint.forwards() as f64 / n,
    })
}
