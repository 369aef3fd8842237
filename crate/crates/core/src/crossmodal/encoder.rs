//! Two-stream encoder: a text transformer and a patch transformer that never
//! attend to each other. Each stream's representation is the final hidden
//! state of its leading CLS slot.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{random_matrix, random_vector, Linear, Stream, StreamCache};
use super::params::{join, Params, Visitor, VisitorMut};
use super::patch::{fit_image, patchify, PatchSequence};
use super::vocab::{TokenSequence, Vocab, MASK};
use super::ModelError;
use crate::ingest::RawImage;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder<T> {
    /// `(vocab, d)`; the `[MASK]` row doubles as the learned mask embedding.
    pub tok_emb: Array2<T>,
    /// `(max_text_len + 1, d)`
    pub pos_emb: Array2<T>,
    pub stream: Stream<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder<T> {
    /// Linear patch embedding `(P^2 C, d)`.
    pub patch_proj: Linear<T>,
    pub cls: Array1<T>,
    pub segment: Array1<T>,
    /// `(N + 1, d)`
    pub pos_emb: Array2<T>,
    pub mask: Array1<T>,
    pub stream: Stream<T>,
}

/// Pretraining and matching heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads<T> {
    /// `(d, vocab)` token classifier for masked language modelling.
    pub mlm: Linear<T>,
    /// `(d, P^2 C)` regressor for masked patch features.
    pub mpfr: Linear<T>,
    /// Matching score `sigmoid(scale * dot + bias)`; both of length 1.
    pub match_scale: Array1<T>,
    pub match_bias: Array1<T>,
}

/// Forward-pass instrumentation; not a parameter.
#[derive(Debug, Default)]
pub struct ForwardCounters {
    text: AtomicUsize,
    image: AtomicUsize,
}

impl ForwardCounters {
    pub fn text(&self) -> usize {
        self.text.load(Ordering::Relaxed)
    }

    pub fn image(&self) -> usize {
        self.image.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.text.store(0, Ordering::Relaxed);
        self.image.store(0, Ordering::Relaxed);
    }
}

impl Clone for ForwardCounters {
    fn clone(&self) -> Self {
        ForwardCounters::default()
    }
}

#[derive(Debug, Clone)]
pub struct Encoders<T> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub text: TextEncoder<T>,
    pub image: ImageEncoder<T>,
    pub heads: Heads<T>,
    pub counters: ForwardCounters,
}

pub struct TextCache<T> {
    stream: StreamCache<T>,
}

pub struct ImageCache<T> {
    stream: StreamCache<T>,
}

/// Hidden states of one stream: row 0 is CLS.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded<T> {
    pub outputs: Array2<T>,
}

impl<T: Scalar> Encoded<T> {
    pub fn cls(&self) -> Array1<T> {
        self.outputs.row(0).to_owned()
    }
}

impl<T: Scalar> Encoders<T> {
    /// Random initialization from `config.seed`. `config.vocab_size` is set
    /// to the vocabulary size.
    pub fn new(mut config: ModelConfig, vocab: Vocab) -> Result<Self, ModelError> {
        config.vocab_size = vocab.len();
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let (v, n, pd) = (config.vocab_size, config.num_patches(), config.patch_dim());
        let text = TextEncoder {
            tok_emb: random_matrix(&mut rng, v, d, 0.1),
            pos_emb: random_matrix(&mut rng, config.max_text_len + 1, d, 0.02),
            stream: Stream::new(&mut rng, d, config.n_layers, config.n_heads),
        };
        let image = ImageEncoder {
            patch_proj: Linear::new(&mut rng, pd, d),
            cls: random_vector(&mut rng, d, 0.1),
            segment: random_vector(&mut rng, d, 0.02),
            pos_emb: random_matrix(&mut rng, n + 1, d, 0.02),
            mask: random_vector(&mut rng, d, 0.1),
            stream: Stream::new(&mut rng, d, config.n_layers, config.n_heads),
        };
        let heads = Heads {
            mlm: Linear::new(&mut rng, d, v),
            mpfr: Linear::new(&mut rng, d, pd),
            match_scale: Array1::from_elem(1, T::of(1.0 / d as f64)),
            match_bias: Array1::zeros(1),
        };
        Ok(Encoders {
            config,
            vocab,
            text,
            image,
            heads,
            counters: ForwardCounters::default(),
        })
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        self.vocab.encode(text, self.config.max_text_len)
    }

    /// Resamples to the configured geometry, then patchifies.
    pub fn prepare_image(&self, img: &RawImage) -> PatchSequence<T> {
        let c = &self.config;
        let fitted = if (img.width(), img.height(), img.channels()) == (c.image_w, c.image_h, c.channels) {
            img.clone()
        } else {
            fit_image(img, c.image_w, c.image_h, c.channels)
        };
        patchify(&fitted, c.patch_size).expect("configured geometry is divisible")
    }

    fn text_input(&self, seq: &TokenSequence, mask: &[usize], inject: Option<&Array1<T>>) -> Result<Array2<T>, ModelError> {
        seq.check(self.config.max_text_len, self.config.vocab_size)?;
        if mask.iter().any(|&i| i == 0 || i >= seq.len()) {
            return Err(ModelError::InvalidInput("mask position outside maskable tokens".into()));
        }
        let d = self.config.d_model;
        let mut x = Array2::zeros((seq.len(), d));
        for (i, &id) in seq.ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            if mask.contains(&i) {
                row.assign(&self.text.tok_emb.row(MASK));
                if let Some(c) = inject {
                    row += c;
                }
            } else {
                row.assign(&self.text.tok_emb.row(id));
            }
            row += &self.text.pos_emb.row(i);
        }
        Ok(x)
    }

    fn image_input(&self, seq: &PatchSequence<T>, mask: &[usize], inject: Option<&Array1<T>>) -> Result<Array2<T>, ModelError> {
        let n = self.config.num_patches();
        if seq.patches.dim() != (n, self.config.patch_dim()) {
            return Err(ModelError::LengthExceeded {
                len: seq.len(),
                max: n,
            });
        }
        if mask.iter().any(|&j| j >= n) {
            return Err(ModelError::InvalidInput("mask position outside patch range".into()));
        }
        let mut x = Array2::zeros((n + 1, self.config.d_model));
        x.row_mut(0).assign(&self.image.cls);
        let projected = self.image.patch_proj.forward(&seq.patches.view());
        x.slice_mut(s![1.., ..]).assign(&projected);
        for &j in mask {
            let mut row = x.row_mut(j + 1);
            row.assign(&self.image.mask);
            if let Some(c) = inject {
                row += c;
            }
        }
        x += &self.image.pos_emb;
        x += &self.image.segment;
        Ok(x)
    }

    /// Inference pass over text; counts one text forward.
    pub fn encode_text(&self, seq: &TokenSequence) -> Result<Encoded<T>, ModelError> {
        let x = self.text_input(seq, &seq.mask_positions, None)?;
        self.counters.text.fetch_add(1, Ordering::Relaxed);
        Ok(Encoded {
            outputs: self.text.stream.infer(x),
        })
    }

    /// Inference pass over patches; counts one image forward.
    pub fn encode_image(&self, seq: &PatchSequence<T>) -> Result<Encoded<T>, ModelError> {
        let x = self.image_input(seq, &seq.mask_positions, None)?;
        self.counters.image.fetch_add(1, Ordering::Relaxed);
        Ok(Encoded {
            outputs: self.image.stream.infer(x),
        })
    }

    pub fn text_cls(&self, text: &str) -> Result<Array1<T>, ModelError> {
        Ok(self.encode_text(&self.tokenize(text))?.cls())
    }

    pub fn image_cls(&self, img: &RawImage) -> Result<Array1<T>, ModelError> {
        Ok(self.encode_image(&self.prepare_image(img))?.cls())
    }

    /// Training pass. Positions in `mask` take the mask embedding plus
    /// `inject`; the sequence's own mask list is ignored.
    pub(crate) fn text_forward(
        &self,
        seq: &TokenSequence,
        mask: &[usize],
        inject: Option<&Array1<T>>,
    ) -> Result<(Array2<T>, TextCache<T>), ModelError> {
        let x = self.text_input(seq, mask, inject)?;
        let (y, stream) = self.text.stream.forward(x);
        Ok((y, TextCache { stream }))
    }

    /// Accumulates gradients; returns the gradient of the injected vector.
    pub(crate) fn text_backward(
        &self,
        seq: &TokenSequence,
        mask: &[usize],
        cache: &TextCache<T>,
        dy: &Array2<T>,
        grad: &mut Encoders<T>,
    ) -> Array1<T> {
        let dx = self.text.stream.backward(&cache.stream, &dy.view(), &mut grad.text.stream);
        let mut d_inject = Array1::zeros(self.config.d_model);
        for (i, &id) in seq.ids.iter().enumerate() {
            let g = dx.row(i);
            let mut pos = grad.text.pos_emb.row_mut(i);
            pos += &g;
            if mask.contains(&i) {
                let mut m = grad.text.tok_emb.row_mut(MASK);
                m += &g;
                d_inject += &g;
            } else {
                let mut t = grad.text.tok_emb.row_mut(id);
                t += &g;
            }
        }
        d_inject
    }

    pub(crate) fn image_forward(
        &self,
        seq: &PatchSequence<T>,
        mask: &[usize],
        inject: Option<&Array1<T>>,
    ) -> Result<(Array2<T>, ImageCache<T>), ModelError> {
        let x = self.image_input(seq, mask, inject)?;
        let (y, stream) = self.image.stream.forward(x);
        Ok((y, ImageCache { stream }))
    }

    pub(crate) fn image_backward(
        &self,
        seq: &PatchSequence<T>,
        mask: &[usize],
        cache: &ImageCache<T>,
        dy: &Array2<T>,
        grad: &mut Encoders<T>,
    ) -> Array1<T> {
        let dx = self.image.stream.backward(&cache.stream, &dy.view(), &mut grad.image.stream);
        let g = &mut grad.image;
        g.pos_emb += &dx;
        g.segment += &dx.sum_axis(Axis(0));
        g.cls += &dx.row(0);
        let mut d_proj = dx.slice(s![1.., ..]).to_owned();
        let mut d_inject = Array1::zeros(self.config.d_model);
        for &j in mask {
            let row = d_proj.row(j).to_owned();
            g.mask += &row;
            d_inject += &row;
            d_proj.row_mut(j).fill(T::zero());
        }
        g.patch_proj.w += &seq.patches.t().dot(&d_proj);
        g.patch_proj.b += &d_proj.sum_axis(Axis(0));
        d_inject
    }
}

impl<T: Scalar> Params<T> for TextEncoder<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.tok_emb.visit(&join(prefix, "tok_emb"), f);
        self.pos_emb.visit(&join(prefix, "pos_emb"), f);
        self.stream.visit(&join(prefix, "stream"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.tok_emb.visit_mut(&join(prefix, "tok_emb"), f);
        self.pos_emb.visit_mut(&join(prefix, "pos_emb"), f);
        self.stream.visit_mut(&join(prefix, "stream"), f);
    }
}

impl<T: Scalar> Params<T> for ImageEncoder<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.patch_proj.visit(&join(prefix, "patch_proj"), f);
        self.cls.visit(&join(prefix, "cls"), f);
        self.segment.visit(&join(prefix, "segment"), f);
        self.pos_emb.visit(&join(prefix, "pos_emb"), f);
        self.mask.visit(&join(prefix, "mask"), f);
        self.stream.visit(&join(prefix, "stream"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.patch_proj.visit_mut(&join(prefix, "patch_proj"), f);
        self.cls.visit_mut(&join(prefix, "cls"), f);
        self.segment.visit_mut(&join(prefix, "segment"), f);
        self.pos_emb.visit_mut(&join(prefix, "pos_emb"), f);
        self.mask.visit_mut(&join(prefix, "mask"), f);
        self.stream.visit_mut(&join(prefix, "stream"), f);
    }
}

impl<T: Scalar> Params<T> for Heads<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.mlm.visit(&join(prefix, "mlm"), f);
        self.mpfr.visit(&join(prefix, "mpfr"), f);
        self.match_scale.visit(&join(prefix, "match_scale"), f);
        self.match_bias.visit(&join(prefix, "match_bias"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.mlm.visit_mut(&join(prefix, "mlm"), f);
        self.mpfr.visit_mut(&join(prefix, "mpfr"), f);
        self.match_scale.visit_mut(&join(prefix, "match_scale"), f);
        self.match_bias.visit_mut(&join(prefix, "match_bias"), f);
    }
}

impl<T: Scalar> Params<T> for Encoders<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.text.visit(&join(prefix, "text"), f);
        self.image.visit(&join(prefix, "image"), f);
        self.heads.visit(&join(prefix, "heads"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.text.visit_mut(&join(prefix, "text"), f);
        self.image.visit_mut(&join(prefix, "image"), f);
        self.heads.visit_mut(&join(prefix, "heads"), f);
    }
}
