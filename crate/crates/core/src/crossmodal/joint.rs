//! Single-stream comparator: text tokens and image patches share one
//! self-attention stack, so every (text, image) pair needs its own full
//! forward. Used only as a cost baseline for the two-stream index.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{random_matrix, random_vector, Linear, Stream};
use super::patch::PatchSequence;
use super::vocab::TokenSequence;
use super::ModelError;
use crate::Scalar;

#[derive(Debug)]
pub struct JointScorer<T> {
    config: ModelConfig,
    tok_emb: Array2<T>,
    text_pos: Array2<T>,
    patch_proj: Linear<T>,
    image_pos: Array2<T>,
    /// Row 0 marks text slots, row 1 image slots.
    segment: Array2<T>,
    stream: Stream<T>,
    head: Array1<T>,
    forwards: AtomicUsize,
}

impl<T: Scalar> JointScorer<T> {
    /// Random weights with the same width and depth as the two-stream
    /// encoders built from `config`.
    pub fn new(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
        let d = config.d_model;
        Ok(JointScorer {
            config: config.clone(),
            tok_emb: random_matrix(&mut rng, config.vocab_size, d, 0.1),
            text_pos: random_matrix(&mut rng, config.max_text_len + 1, d, 0.02),
            patch_proj: Linear::new(&mut rng, config.patch_dim(), d),
            image_pos: random_matrix(&mut rng, config.num_patches(), d, 0.02),
            segment: random_matrix(&mut rng, 2, d, 0.02),
            stream: Stream::new(&mut rng, d, config.n_layers, config.n_heads),
            head: random_vector(&mut rng, d, 1.0 / (d as f64).sqrt()),
            forwards: AtomicUsize::new(0),
        })
    }

    /// Full joint forward; the output at the text CLS slot is scored by a
    /// linear head and squashed to (0, 1).
    pub fn score(&self, text: &TokenSequence, image: &PatchSequence<T>) -> Result<T, ModelError> {
        text.check(self.config.max_text_len, self.config.vocab_size)?;
        let n = self.config.num_patches();
        if image.patches.dim() != (n, self.config.patch_dim()) {
            return Err(ModelError::LengthExceeded { len: image.len(), max: n });
        }
        let lt = text.len();
        let mut x = Array2::zeros((lt + n, self.config.d_model));
        for (i, &id) in text.ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row.assign(&self.tok_emb.row(id));
            row += &self.text_pos.row(i);
            row += &self.segment.row(0);
        }
        {
            let mut tail = x.slice_mut(s![lt.., ..]);
            tail.assign(&self.patch_proj.forward(&image.patches.view()));
            tail += &self.image_pos;
            tail += &self.segment.row(1);
        }
        self.forwards.fetch_add(1, Ordering::Relaxed);
        let y = self.stream.infer(x);
        let z = y.row(0).dot(&self.head);
        Ok(T::one() / (T::one() + (-z).exp()))
    }

    pub fn forwards(&self) -> usize {
        self.forwards.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.forwards.store(0, Ordering::Relaxed);
    }
}
