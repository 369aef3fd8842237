use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LossWeights, ModelConfig};
use super::encoder::Encoders;
use super::loss::{pretrain_objective, TrainingBatch, TrainingPair};
use super::params::{flatten, l2_norm, scale, zeros_like, Params};
use super::patch::PatchSequence;
use super::vocab::{TokenSequence, Vocab};
use super::ModelError;
use crate::ingest::RawImage;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient L2 norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.05,
            clip_norm: 1.0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.batch_size >= 1
            && self.learning_rate >= 0.0
            && self.clip_norm >= 0.0
            && match self.optimizer {
                Optimizer::Sgd => true,
                Optimizer::Momentum { beta } => (0.0..1.0).contains(&beta),
                Optimizer::Adam { beta1, beta2, eps } => {
                    (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
                }
            };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Mean losses over the batches of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub total: f64,
    pub mlm: Option<f64>,
    pub mpfr: Option<f64>,
    pub cmr: Option<f64>,
}

/// Optimizer state over a flattened parameter vector.
pub(crate) struct Stepper<T> {
    kind: Optimizer,
    lr: T,
    clip: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Stepper<T> {
    pub(crate) fn new(cfg: &TrainConfig, n: usize) -> Self {
        Stepper {
            kind: cfg.optimizer,
            lr: T::of(cfg.learning_rate),
            clip: T::of(cfg.clip_norm),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// Clips `grad` in place, then applies one update to `params`.
    pub(crate) fn step<P: Params<T>>(&mut self, params: &mut P, grad: &mut P) {
        if self.clip > T::zero() {
            let norm = l2_norm(grad);
            if norm > self.clip {
                scale(grad, self.clip / norm);
            }
        }
        let g = flatten(grad);
        self.t += 1;
        let update: Vec<T> = match self.kind {
            Optimizer::Sgd => g.iter().map(|&x| self.lr * x).collect(),
            Optimizer::Momentum { beta } => {
                let beta = T::of(beta);
                for (m, &x) in self.m.iter_mut().zip(&g) {
                    *m = beta * *m + x;
                }
                self.m.iter().map(|&m| self.lr * m).collect()
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                let c1 = T::one() - b1.powi(self.t);
                let c2 = T::one() - b2.powi(self.t);
                let mut out = Vec::with_capacity(g.len());
                for ((m, v), &x) in self.m.iter_mut().zip(self.v.iter_mut()).zip(&g) {
                    *m = b1 * *m + (T::one() - b1) * x;
                    *v = b2 * *v + (T::one() - b2) * x * x;
                    out.push(self.lr * (*m / c1) / ((*v / c2).sqrt() + eps));
                }
                out
            }
        };
        let mut offset = 0;
        params.visit_mut("", &mut |_, _, data| {
            for (p, &u) in data.iter_mut().zip(&update[offset..]) {
                *p -= u;
            }
            offset += data.len();
        });
    }
}

/// Independent Bernoulli(`prob`) choice over `candidates`, forcing one pick
/// when none is drawn and a candidate exists.
pub(crate) fn sample_mask(rng: &mut impl Rng, candidates: std::ops::Range<usize>, prob: f64) -> Vec<usize> {
    let mut picked: Vec<usize> = candidates.clone().filter(|_| rng.random::<f64>() < prob).collect();
    if picked.is_empty() && !candidates.is_empty() {
        picked.push(rng.random_range(candidates));
    }
    picked
}

/// Builds the vocabulary from the corpus, initializes encoders from
/// `config.seed` and trains on the weighted objective. The same seed gives
/// the same parameter trajectory.
pub fn pretrain<T: Scalar>(
    corpus: &[(RawImage, String)],
    config: ModelConfig,
    train: &TrainConfig,
) -> Result<(Encoders<T>, Vec<EpochLog>), ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    config.validate()?;
    train.validate()?;
    let vocab = Vocab::build(corpus.iter().map(|(_, t)| t.as_str()), config.vocab_size);
    let mut enc = Encoders::new(config, vocab)?;
    let texts: Vec<TokenSequence> = corpus.iter().map(|(_, t)| enc.tokenize(t)).collect();
    let images: Vec<PatchSequence<T>> = corpus.iter().map(|(img, _)| enc.prepare_image(img)).collect();
    let logs = train_loop(&mut enc, &texts, &images, train)?;
    Ok((enc, logs))
}

/// Continues pretraining already-initialized encoders on encoded pairs.
pub fn train_loop<T: Scalar>(
    enc: &mut Encoders<T>,
    texts: &[TokenSequence],
    images: &[PatchSequence<T>],
    train: &TrainConfig,
) -> Result<Vec<EpochLog>, ModelError> {
    if texts.is_empty() || texts.len() != images.len() {
        return Err(ModelError::EmptyCorpus);
    }
    let cfg = enc.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut stepper = Stepper::new(train, flatten(&*enc).len());
    let mut order: Vec<usize> = (0..texts.len()).collect();
    let mut logs = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        for chunk in order.chunks(train.batch_size) {
            let pairs = chunk
                .iter()
                .map(|&i| TrainingPair {
                    text: texts[i]
                        .clone()
                        .with_mask(sample_mask(&mut rng, 1..texts[i].len(), cfg.mask_prob)),
                    image: images[i]
                        .clone()
                        .with_mask(sample_mask(&mut rng, 0..images[i].len(), cfg.mask_prob)),
                })
                .collect();
            let batch = TrainingBatch::new(pairs);
            // a batch of bare-CLS texts has nothing to reconstruct
            let weights = LossWeights {
                mlm: if batch.masked_tokens() == 0 { 0.0 } else { cfg.loss_weights.mlm },
                ..cfg.loss_weights
            };
            let mut grad = zeros_like(&*enc);
            let out = pretrain_objective(enc, &batch, weights, Some(&mut grad))?;
            stepper.step(enc, &mut grad);
            for (slot, value) in [Some(out.total), out.mlm, out.mpfr, out.cmr].into_iter().enumerate() {
                if let Some(v) = value {
                    sums[slot] += v.as_f64();
                    counts[slot] += 1;
                }
            }
        }
        let mean = |slot: usize| (counts[slot] > 0).then(|| sums[slot] / counts[slot] as f64);
        let entry = EpochLog {
            epoch,
            total: mean(0).unwrap_or(0.0),
            mlm: mean(1),
            mpfr: mean(2),
            cmr: mean(3),
        };
        let part = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        log::info!(
            "epoch {} loss {:.6} (mlm {} mpfr {} cmr {})",
            entry.epoch,
            entry.total,
            part(entry.mlm),
            part(entry.mpfr),
            part(entry.cmr)
        );
        logs.push(entry);
    }
    Ok(logs)
}
