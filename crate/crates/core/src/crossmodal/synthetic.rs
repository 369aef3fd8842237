//! Class-structured toy corpus: class `k` texts carry the token `t{k}` among
//! shared filler words; class `k` images sit at intensity level `k` with
//! per-pixel noise and a brighter patch cell `k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{LossWeights, ModelConfig};
use super::encoder::Encoders;
use super::finetune::MatchExample;
use super::train::{Optimizer, TrainConfig};
use crate::ingest::RawImage;
use crate::Scalar;

const FILLER: [&str; 8] = ["soft", "new", "daily", "hot", "sale", "gift", "fresh", "style"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub class: usize,
    pub text: String,
    pub image: RawImage,
}

/// Geometry used by [`class_pairs`]: 16x16 gray images, 4x4 patches.
pub fn synthetic_config() -> ModelConfig {
    ModelConfig {
        d_model: 32,
        n_layers: 1,
        n_heads: 4,
        vocab_size: 64,
        max_text_len: 8,
        patch_size: 4,
        image_h: 16,
        image_w: 16,
        channels: 1,
        mask_prob: 0.15,
        loss_weights: LossWeights {
            mlm: 0.1,
            mpfr: 0.1,
            cmr: 1.0,
        },
        seed: 7,
    }
}

/// Most classes [`class_pairs`] can keep apart.
pub const MAX_CLASSES: usize = 10;

/// `n` pairs with classes drawn uniformly from `0..classes`.
pub fn class_pairs(n: usize, classes: usize, seed: u64) -> Vec<SyntheticPair> {
    assert!((1..=MAX_CLASSES).contains(&classes), "at most {MAX_CLASSES} classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let class = rng.random_range(0..classes);
            let mut words: Vec<String> = (0..3).map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string()).collect();
            words.insert(rng.random_range(0..=words.len()), format!("t{class}"));
            let level = 10 + 20 * class as u8;
            let mut px: Vec<u8> = (0..16 * 16).map(|_| level + rng.random_range(0..12)).collect();
            let (cy, cx) = (class / 4 * 4, class % 4 * 4);
            for y in cy..cy + 4 {
                for x in cx..cx + 4 {
                    px[y * 16 + x] = level + 40;
                }
            }
            SyntheticPair {
                class,
                text: words.join(" "),
                image: RawImage::new(16, 16, 1, px).expect("fixed geometry"),
            }
        })
        .collect()
}

/// Pretraining schedule under which [`class_pairs`] corpora become
/// retrievable.
pub fn synthetic_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        batch_size: 20,
        learning_rate: 0.003,
        clip_norm: 1.0,
        optimizer: Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
    }
}

/// Each pair as a positive, plus its text against the next image of a
/// different class as a negative.
pub fn matching_examples<T: Scalar>(enc: &Encoders<T>, pairs: &[SyntheticPair]) -> Vec<MatchExample<T>> {
    let mut out = Vec::with_capacity(2 * pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let text = enc.tokenize(&p.text);
        out.push(MatchExample {
            text: text.clone(),
            image: enc.prepare_image(&p.image),
            label: true,
        });
        let other = (1..pairs.len())
            .map(|o| &pairs[(i + o) % pairs.len()])
            .find(|q| q.class != p.class);
        if let Some(q) = other {
            out.push(MatchExample {
                text,
                image: enc.prepare_image(&q.image),
                label: false,
            });
        }
    }
    out
}
