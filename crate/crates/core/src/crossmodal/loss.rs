//! Pretraining objectives with analytic gradients.
//!
//! Each example runs through its own stream instance, so no padding or
//! attention masking is needed. The clean (unmasked) forward of every text
//! and image is shared: its CLS feeds CMR and is injected into the masked
//! forward of the other modality, and all three losses send gradient back
//! through it.

use ndarray::{s, Array1, Array2, Axis};

use super::config::LossWeights;
use super::encoder::Encoders;
use super::patch::PatchSequence;
use super::vocab::TokenSequence;
use super::ModelError;
use crate::Scalar;

/// One matched pair. Mask lists on the sequences select the MLM and MPFR
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<T> {
    pub text: TokenSequence,
    pub image: PatchSequence<T>,
}

/// Pairing is positional: text `k` matches image `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch<T> {
    pub pairs: Vec<TrainingPair<T>>,
}

impl<T: Scalar> TrainingBatch<T> {
    pub fn new(pairs: Vec<TrainingPair<T>>) -> Self {
        TrainingBatch { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn masked_tokens(&self) -> usize {
        self.pairs.iter().map(|p| p.text.mask_positions.len()).sum()
    }

    pub fn masked_patches(&self) -> usize {
        self.pairs.iter().map(|p| p.image.mask_positions.len()).sum()
    }
}

/// Unweighted component losses; a component is `None` when its weight was 0
/// and it was skipped. `total` is the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub mlm: Option<T>,
    pub mpfr: Option<T>,
    pub cmr: Option<T>,
    pub total: T,
}

/// Bidirectional in-batch contrastive loss on `s[a][b] = image_a . text_b`.
/// Returns the loss and its gradient with respect to `s`.
pub fn cmr_from_scores<T: Scalar>(s: &Array2<T>) -> (T, Array2<T>) {
    let m = s.nrows();
    assert_eq!(m, s.ncols(), "score matrix must be square");
    let mf = T::of(m as f64);
    let half = T::of(0.5);
    let mut loss = T::zero();
    let mut grad = Array2::zeros((m, m));
    // rows: image a queries texts; columns: text b queries images
    for (transpose, view) in [(false, s.view()), (true, s.t())] {
        for a in 0..m {
            let row = view.row(a);
            let max = row.fold(T::neg_infinity(), |acc, &x| acc.max(x));
            let sum: T = row.iter().map(|&x| (x - max).exp()).sum();
            let lse = max + sum.ln();
            loss += (lse - row[a]) / mf;
            for b in 0..m {
                let p = (row[b] - max).exp() / sum;
                let g = (p - if a == b { T::one() } else { T::zero() }) * half / mf;
                let (i, j) = if transpose { (b, a) } else { (a, b) };
                grad[[i, j]] += g;
            }
        }
    }
    (loss * half, grad)
}

/// Weighted pretraining objective. When `grad` is given, the gradient of
/// `total` is added into it.
pub fn pretrain_objective<T: Scalar>(
    enc: &Encoders<T>,
    batch: &TrainingBatch<T>,
    weights: LossWeights,
    mut grad: Option<&mut Encoders<T>>,
) -> Result<LossBreakdown<T>, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::InvalidInput("empty batch".into()));
    }
    let m = batch.len();
    let d = enc.config.d_model;
    let use_mlm = weights.mlm > 0.0;
    let use_mpfr = weights.mpfr > 0.0;
    let use_cmr = weights.cmr > 0.0;
    let masked_tokens = batch.masked_tokens();
    let masked_patches = batch.masked_patches();
    if use_mlm && masked_tokens == 0 {
        return Err(ModelError::NoMaskableTokens);
    }
    if use_mpfr && masked_patches == 0 {
        return Err(ModelError::NoMaskablePatches);
    }

    let mut text_clean = Vec::with_capacity(m);
    let mut image_clean = Vec::with_capacity(m);
    for pair in &batch.pairs {
        text_clean.push(enc.text_forward(&pair.text, &[], None)?);
        image_clean.push(enc.image_forward(&pair.image, &[], None)?);
    }
    let text_cls: Vec<Array1<T>> = text_clean.iter().map(|(y, _)| y.row(0).to_owned()).collect();
    let image_cls: Vec<Array1<T>> = image_clean.iter().map(|(y, _)| y.row(0).to_owned()).collect();
    // gradients w.r.t. the clean CLS outputs
    let mut d_text_cls = vec![Array1::<T>::zeros(d); m];
    let mut d_image_cls = vec![Array1::<T>::zeros(d); m];
    let want_grad = grad.is_some();
    let mut total = T::zero();

    let cmr = if use_cmr {
        let w = T::of(weights.cmr);
        let mut scores = Array2::zeros((m, m));
        for a in 0..m {
            for b in 0..m {
                scores[[a, b]] = image_cls[a].dot(&text_cls[b]);
            }
        }
        let (loss, ds) = cmr_from_scores(&scores);
        total += w * loss;
        if want_grad {
            for a in 0..m {
                for b in 0..m {
                    let g = w * ds[[a, b]];
                    d_image_cls[a].scaled_add(g, &text_cls[b]);
                    d_text_cls[b].scaled_add(g, &image_cls[a]);
                }
            }
        }
        Some(loss)
    } else {
        None
    };

    let mlm = if use_mlm {
        let w = T::of(weights.mlm);
        let norm = T::of(masked_tokens as f64);
        let head = &enc.heads.mlm;
        let mut loss = T::zero();
        for (k, pair) in batch.pairs.iter().enumerate() {
            let mask = &pair.text.mask_positions;
            if mask.is_empty() {
                continue;
            }
            let (y, cache) = enc.text_forward(&pair.text, mask, Some(&image_cls[k]))?;
            let rows = y.select(Axis(0), mask);
            let logits = head.forward(&rows.view());
            let mut dlogits = Array2::zeros(logits.dim());
            for (r, &pos) in mask.iter().enumerate() {
                let row = logits.row(r);
                let max = row.fold(T::neg_infinity(), |acc, &x| acc.max(x));
                let sum: T = row.iter().map(|&x| (x - max).exp()).sum();
                let target = pair.text.ids[pos];
                loss += (max + sum.ln() - row[target]) / norm;
                for (v, g) in dlogits.row_mut(r).iter_mut().enumerate() {
                    let p = (row[v] - max).exp() / sum;
                    *g = w * (p - if v == target { T::one() } else { T::zero() }) / norm;
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                let drows = head.backward(&rows.view(), &dlogits.view(), &mut g.heads.mlm);
                let mut dy = Array2::zeros(y.dim());
                for (r, &pos) in mask.iter().enumerate() {
                    let mut row = dy.row_mut(pos);
                    row += &drows.row(r);
                }
                let d_inject = enc.text_backward(&pair.text, mask, &cache, &dy, g);
                d_image_cls[k] += &d_inject;
            }
        }
        total += w * loss;
        Some(loss)
    } else {
        None
    };

    let mpfr = if use_mpfr {
        let w = T::of(weights.mpfr);
        let norm = T::of((masked_patches * enc.config.patch_dim()) as f64);
        let head = &enc.heads.mpfr;
        let mut loss = T::zero();
        for (k, pair) in batch.pairs.iter().enumerate() {
            let mask = &pair.image.mask_positions;
            if mask.is_empty() {
                continue;
            }
            let (y, cache) = enc.image_forward(&pair.image, mask, Some(&text_cls[k]))?;
            let slots: Vec<usize> = mask.iter().map(|&j| j + 1).collect();
            let rows = y.select(Axis(0), &slots);
            let pred = head.forward(&rows.view());
            let target = pair.image.patches.select(Axis(0), mask);
            let diff = &pred - &target;
            loss += diff.iter().map(|&e| e * e).sum::<T>() / norm;
            if let Some(g) = grad.as_deref_mut() {
                let dpred = diff.mapv(|e| w * T::of(2.0) * e / norm);
                let drows = head.backward(&rows.view(), &dpred.view(), &mut g.heads.mpfr);
                let mut dy = Array2::zeros(y.dim());
                for (r, &slot) in slots.iter().enumerate() {
                    let mut row = dy.row_mut(slot);
                    row += &drows.row(r);
                }
                let d_inject = enc.image_backward(&pair.image, mask, &cache, &dy, g);
                d_text_cls[k] += &d_inject;
            }
        }
        total += w * loss;
        Some(loss)
    } else {
        None
    };

    if let Some(g) = grad {
        for (k, pair) in batch.pairs.iter().enumerate() {
            let (ty, tcache) = &text_clean[k];
            let mut dy = Array2::zeros(ty.dim());
            dy.row_mut(0).assign(&d_text_cls[k]);
            enc.text_backward(&pair.text, &[], tcache, &dy, g);
            let (iy, icache) = &image_clean[k];
            let mut dy = Array2::zeros(iy.dim());
            dy.slice_mut(s![0, ..]).assign(&d_image_cls[k]);
            enc.image_backward(&pair.image, &[], icache, &dy, g);
        }
    }

    Ok(LossBreakdown { mlm, mpfr, cmr, total })
}

fn single<T: Scalar>(
    enc: &Encoders<T>,
    batch: &TrainingBatch<T>,
    weights: LossWeights,
    grad: Option<&mut Encoders<T>>,
) -> Result<T, ModelError> {
    Ok(pretrain_objective(enc, batch, weights, grad)?.total)
}

/// Mean cross-entropy over masked tokens, the paired image CLS added to each
/// masked token embedding.
pub fn mlm_loss<T: Scalar>(
    enc: &Encoders<T>,
    batch: &TrainingBatch<T>,
    grad: Option<&mut Encoders<T>>,
) -> Result<T, ModelError> {
    let w = LossWeights { mlm: 1.0, mpfr: 0.0, cmr: 0.0 };
    single(enc, batch, w, grad)
}

/// Mean squared error over every element of every masked patch, the paired
/// text CLS added to each masked patch embedding.
pub fn mpfr_loss<T: Scalar>(
    enc: &Encoders<T>,
    batch: &TrainingBatch<T>,
    grad: Option<&mut Encoders<T>>,
) -> Result<T, ModelError> {
    let w = LossWeights { mlm: 0.0, mpfr: 1.0, cmr: 0.0 };
    single(enc, batch, w, grad)
}

pub fn cmr_loss<T: Scalar>(
    enc: &Encoders<T>,
    batch: &TrainingBatch<T>,
    grad: Option<&mut Encoders<T>>,
) -> Result<T, ModelError> {
    let w = LossWeights { mlm: 0.0, mpfr: 0.0, cmr: 1.0 };
    single(enc, batch, w, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cmr_single_pair_is_zero() {
        for s in [-3.0, 0.0, 7.5, 1e6] {
            let (loss, grad) = cmr_from_scores(&array![[s]]);
            assert_eq!(loss, 0.0);
            assert_eq!(grad[[0, 0]], 0.0);
        }
    }

    #[test]
    fn cmr_symmetric_closed_form() {
        for s in [0.0f64, 0.5, 2.0, -1.0, 10.0] {
            let (loss, _) = cmr_from_scores(&array![[s, 0.0], [0.0, s]]);
            let expected = (1.0 + (-s).exp()).ln();
            assert!((loss - expected).abs() < 1e-12, "{s}: {loss} vs {expected}");
        }
    }

    #[test]
    fn cmr_transpose_invariant() {
        let s = array![[1.0f64, -0.5, 2.0], [0.3, 0.9, -1.2], [0.0, 4.0, 0.1]];
        let (a, ga) = cmr_from_scores(&s);
        let (b, gb) = cmr_from_scores(&s.t().to_owned());
        assert!((a - b).abs() < 1e-14);
        assert!((ga.t().to_owned() - gb).iter().all(|e| e.abs() < 1e-14));
    }
}
