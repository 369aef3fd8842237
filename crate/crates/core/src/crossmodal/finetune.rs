use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::Encoders;
use super::params::{flatten, zeros_like};
use super::patch::PatchSequence;
use super::train::{Optimizer, Stepper, TrainConfig};
use super::vocab::TokenSequence;
use super::ModelError;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchExample<T> {
    pub text: TokenSequence,
    pub image: PatchSequence<T>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    /// Damped Newton steps fitting only the matching scale and bias on
    /// frozen embeddings before joint training.
    pub head_steps: usize,
    pub train: TrainConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            head_steps: 20,
            train: TrainConfig {
                epochs: 5,
                learning_rate: 0.001,
                optimizer: Optimizer::Adam {
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinetuneReport {
    /// Mean binary cross-entropy per epoch.
    pub losses: Vec<f64>,
    /// Fraction of training examples on the right side of 0.5 after the
    /// final epoch.
    pub train_accuracy: f64,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (T::one() + (-z.abs()).exp()).ln()
}

impl<T: Scalar> Encoders<T> {
    /// Matching logit `scale * dot + bias`.
    pub fn match_logit(&self, text_cls: &Array1<T>, image_cls: &Array1<T>) -> T {
        self.heads.match_scale[0] * text_cls.dot(image_cls) + self.heads.match_bias[0]
    }

    /// Matching probability; a pair matches when this is at least 0.5.
    pub fn match_probability(&self, text_cls: &Array1<T>, image_cls: &Array1<T>) -> T {
        sigmoid(self.match_logit(text_cls, image_cls))
    }
}

pub fn match_probability<T: Scalar>(enc: &Encoders<T>, text_cls: &Array1<T>, image_cls: &Array1<T>) -> T {
    enc.match_probability(text_cls, image_cls)
}

/// Mean binary cross-entropy of the matching head over `examples`; adds
/// its gradient into `grad` when given.
pub fn matching_objective<T: Scalar>(
    enc: &Encoders<T>,
    examples: &[&MatchExample<T>],
    mut grad: Option<&mut Encoders<T>>,
) -> Result<T, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let n = T::of(examples.len() as f64);
    let mut loss = T::zero();
    for ex in examples {
        let (ty, tcache) = enc.text_forward(&ex.text, &[], None)?;
        let (iy, icache) = enc.image_forward(&ex.image, &[], None)?;
        let (t, i) = (ty.row(0).to_owned(), iy.row(0).to_owned());
        let z = enc.match_logit(&t, &i);
        let y = if ex.label { T::one() } else { T::zero() };
        loss += (softplus(z) - y * z) / n;
        if let Some(g) = grad.as_deref_mut() {
            let dz = (sigmoid(z) - y) / n;
            let scale = enc.heads.match_scale[0];
            g.heads.match_scale[0] += dz * t.dot(&i);
            g.heads.match_bias[0] += dz;
            let mut dty = Array2::zeros(ty.dim());
            dty.row_mut(0).assign(&(&i * (dz * scale)));
            enc.text_backward(&ex.text, &[], &tcache, &dty, g);
            let mut diy = Array2::zeros(iy.dim());
            diy.row_mut(0).assign(&(&t * (dz * scale)));
            enc.image_backward(&ex.image, &[], &icache, &diy, g);
        }
    }
    Ok(loss)
}

/// Logistic regression of the labels on the frozen dot products, updating
/// only the matching scale and bias.
fn fit_head<T: Scalar>(enc: &mut Encoders<T>, examples: &[MatchExample<T>], steps: usize) -> Result<(), ModelError> {
    let mut dots = Vec::with_capacity(examples.len());
    for ex in examples {
        let t = enc.encode_text(&ex.text)?.cls();
        let i = enc.encode_image(&ex.image)?.cls();
        dots.push((t.dot(&i).as_f64(), if ex.label { 1.0 } else { 0.0 }));
    }
    let n = dots.len() as f64;
    let (mut a, mut b) = (enc.heads.match_scale[0].as_f64(), enc.heads.match_bias[0].as_f64());
    for _ in 0..steps {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-3, 0.0, 1e-3);
        for &(x, y) in &dots {
            let p = 1.0 / (1.0 + (-(a * x + b)).exp());
            let w = p * (1.0 - p) / n;
            ga += (p - y) * x / n;
            gb += (p - y) / n;
            haa += w * x * x;
            hab += w * x;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        a -= (hbb * ga - hab * gb) / det;
        b -= (haa * gb - hab * ga) / det;
    }
    enc.heads.match_scale[0] = T::of(a);
    enc.heads.match_bias[0] = T::of(b);
    Ok(())
}

/// Fits the matching head on frozen embeddings, then trains both streams
/// and the head on labelled pairs.
pub fn finetune_matching<T: Scalar>(
    enc: &mut Encoders<T>,
    examples: &[MatchExample<T>],
    config: &FinetuneConfig,
) -> Result<FinetuneReport, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let train = &config.train;
    train.validate()?;
    fit_head(enc, examples, config.head_steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(enc.config.seed.wrapping_add(2));
    let mut stepper = Stepper::new(train, flatten(&*enc).len());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut losses = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(train.batch_size) {
            let batch: Vec<&MatchExample<T>> = chunk.iter().map(|&i| &examples[i]).collect();
            let mut grad = zeros_like(&*enc);
            total += matching_objective(enc, &batch, Some(&mut grad))?.as_f64();
            batches += 1;
            stepper.step(enc, &mut grad);
        }
        let mean = total / batches as f64;
        log::info!("finetune epoch {epoch} loss {mean:.6}");
        losses.push(mean);
    }
    let mut correct = 0;
    for ex in examples {
        let t = enc.encode_text(&ex.text)?.cls();
        let i = enc.encode_image(&ex.image)?.cls();
        let predicted = enc.match_probability(&t, &i) >= T::of(0.5);
        correct += usize::from(predicted == ex.label);
    }
    Ok(FinetuneReport {
        losses,
        train_accuracy: correct as f64 / examples.len() as f64,
    })
}
