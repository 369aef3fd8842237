//! Transformer building blocks with hand-written backward passes.
//!
//! Activations are `(seq_len, width)` row-major matrices. Every `forward`
//! returns a cache consumed by the matching `backward`, which accumulates
//! parameter gradients into a same-shaped gradient value and returns the
//! gradient with respect to its input.
//!
//! ```text
//! x ─ LN1 ─ MHA ─(+)─ LN2 ─ FF1 ─ GELU ─ FF2 ─(+)─ ...  ─ LN_f ─ y
//! └────────────┘  └──────────────────────────────┘
//! ```

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{join, Params, Visitor, VisitorMut};
use crate::Scalar;

// Draws in f64 so initialization is identical across scalar types.
fn uniform(rng: &mut impl Rng, bound: f64) -> f64 {
    rng.random_range(-bound..=bound)
}

pub(crate) fn random_matrix<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Array2<T> {
    Array2::from_shape_fn((rows, cols), |_| T::of(uniform(rng, bound)))
}

pub(crate) fn random_vector<T: Scalar>(rng: &mut impl Rng, len: usize, bound: f64) -> Array1<T> {
    Array1::from_shape_fn(len, |_| T::of(uniform(rng, bound)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `(in, out)`
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize) -> Self {
        Linear {
            w: random_matrix(rng, input, output, 1.0 / (input as f64).sqrt()),
            b: Array1::zeros(output),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }

    pub fn backward(&self, x: &ArrayView2<T>, dy: &ArrayView2<T>, grad: &mut Linear<T>) -> Array2<T> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

impl<T: Scalar> Params<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.w.visit(&join(prefix, "w"), f);
        self.b.visit(&join(prefix, "b"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.w.visit_mut(&join(prefix, "w"), f);
        self.b.visit_mut(&join(prefix, "b"), f);
    }
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
}

pub struct LayerNormCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, LayerNormCache<T>) {
        let n = T::of(x.ncols() as f64);
        let mut xhat = x.to_owned();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|&v| v * v).sum::<T>() / n;
            *inv = T::one() / (var + T::of(LN_EPS)).sqrt();
            let s = *inv;
            row.mapv_inplace(|v| v * s);
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache<T>, dy: &ArrayView2<T>, grad: &mut LayerNorm<T>) -> Array2<T> {
        grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let n = T::of(dy.ncols() as f64);
        let dxhat = dy * &self.gamma;
        let mut dx = Array2::zeros(dy.raw_dim());
        for r in 0..dy.nrows() {
            let g = dxhat.row(r);
            let xh = cache.xhat.row(r);
            let mean_g = g.sum() / n;
            let mean_gx = g.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<T>() / n;
            let inv = cache.inv_std[r];
            for c in 0..dy.ncols() {
                dx[[r, c]] = inv * (g[c] - mean_g - xh[c] * mean_gx);
            }
        }
        dx
    }
}

impl<T: Scalar> Params<T> for LayerNorm<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.gamma.visit(&join(prefix, "gamma"), f);
        self.beta.visit(&join(prefix, "beta"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.gamma.visit_mut(&join(prefix, "gamma"), f);
        self.beta.visit_mut(&join(prefix, "beta"), f);
    }
}

// tanh approximation
fn gelu<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let half = T::of(0.5);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + T::of(3.0) * k * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

/// Row-wise softmax.
pub(crate) fn softmax_rows<T: Scalar>(s: &ArrayView2<T>) -> Array2<T> {
    let mut p = s.to_owned();
    for mut row in p.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Multi-head self-attention without masking.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub q: Linear<T>,
    pub k: Linear<T>,
    pub v: Linear<T>,
    pub o: Linear<T>,
    pub n_heads: usize,
}

pub struct AttentionCache<T> {
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    probs: Vec<Array2<T>>,
    concat: Array2<T>,
}

impl<T: Scalar> Attention<T> {
    pub fn new(rng: &mut impl Rng, width: usize, n_heads: usize) -> Self {
        Attention {
            q: Linear::new(rng, width, width),
            k: Linear::new(rng, width, width),
            v: Linear::new(rng, width, width),
            o: Linear::new(rng, width, width),
            n_heads,
        }
    }

    fn head_dim(&self) -> usize {
        self.q.w.ncols() / self.n_heads
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, AttentionCache<T>) {
        let q = self.q.forward(x);
        let k = self.k.forward(x);
        let v = self.v.forward(x);
        let dh = self.head_dim();
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut concat = Array2::zeros(q.raw_dim());
        let mut probs = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            let p = softmax_rows(&scores.view());
            concat.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        let out = self.o.forward(&concat.view());
        (out, AttentionCache { q, k, v, probs, concat })
    }

    pub fn backward(
        &self,
        x: &ArrayView2<T>,
        cache: &AttentionCache<T>,
        dy: &ArrayView2<T>,
        grad: &mut Attention<T>,
    ) -> Array2<T> {
        let dconcat = self.o.backward(&cache.concat.view(), dy, &mut grad.o);
        let dh = self.head_dim();
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for h in 0..self.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let p = &cache.probs[h];
            let d_out = dconcat.slice(cols);
            let dp = d_out.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&d_out));
            // softmax backward: ds = p * (dp - rowsum(dp * p))
            let mut ds = &dp * p;
            let row_dot = ds.sum_axis(Axis(1));
            for (mut row, (prow, &rd)) in ds.rows_mut().into_iter().zip(p.rows().into_iter().zip(row_dot.iter())) {
                for (d, &pv) in row.iter_mut().zip(prow.iter()) {
                    *d -= pv * rd;
                }
            }
            ds.mapv_inplace(|v| v * scale);
            dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
        }
        let mut dx = self.q.backward(x, &dq.view(), &mut grad.q);
        dx += &self.k.backward(x, &dk.view(), &mut grad.k);
        dx += &self.v.backward(x, &dv.view(), &mut grad.v);
        dx
    }
}

impl<T: Scalar> Params<T> for Attention<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.q.visit(&join(prefix, "q"), f);
        self.k.visit(&join(prefix, "k"), f);
        self.v.visit(&join(prefix, "v"), f);
        self.o.visit(&join(prefix, "o"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.q.visit_mut(&join(prefix, "q"), f);
        self.k.visit_mut(&join(prefix, "k"), f);
        self.v.visit_mut(&join(prefix, "v"), f);
        self.o.visit_mut(&join(prefix, "o"), f);
    }
}

/// Pre-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub ln1: LayerNorm<T>,
    pub attn: Attention<T>,
    pub ln2: LayerNorm<T>,
    pub ff1: Linear<T>,
    pub ff2: Linear<T>,
}

pub struct BlockCache<T> {
    ln1: LayerNormCache<T>,
    a: Array2<T>,
    attn: AttentionCache<T>,
    ln2: LayerNormCache<T>,
    b: Array2<T>,
    pre_act: Array2<T>,
    act: Array2<T>,
}

pub const FF_MULT: usize = 4;

impl<T: Scalar> Block<T> {
    pub fn new(rng: &mut impl Rng, width: usize, n_heads: usize) -> Self {
        Block {
            ln1: LayerNorm::new(width),
            attn: Attention::new(rng, width, n_heads),
            ln2: LayerNorm::new(width),
            ff1: Linear::new(rng, width, FF_MULT * width),
            ff2: Linear::new(rng, FF_MULT * width, width),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, BlockCache<T>) {
        let (a, ln1) = self.ln1.forward(x);
        let (attn_out, attn) = self.attn.forward(&a.view());
        let x1 = x + &attn_out;
        let (b, ln2) = self.ln2.forward(&x1.view());
        let pre_act = self.ff1.forward(&b.view());
        let act = pre_act.mapv(gelu);
        let y = &x1 + &self.ff2.forward(&act.view());
        let cache = BlockCache {
            ln1,
            a,
            attn,
            ln2,
            b,
            pre_act,
            act,
        };
        (y, cache)
    }

    pub fn backward(&self, cache: &BlockCache<T>, dy: &ArrayView2<T>, grad: &mut Block<T>) -> Array2<T> {
        let dact = self.ff2.backward(&cache.act.view(), dy, &mut grad.ff2);
        let dpre = dact * &cache.pre_act.mapv(gelu_grad);
        let db = self.ff1.backward(&cache.b.view(), &dpre.view(), &mut grad.ff1);
        let mut dx1 = self.ln2.backward(&cache.ln2, &db.view(), &mut grad.ln2);
        dx1 += dy;
        let da = self.attn.backward(&cache.a.view(), &cache.attn, &dx1.view(), &mut grad.attn);
        let mut dx = self.ln1.backward(&cache.ln1, &da.view(), &mut grad.ln1);
        dx += &dx1;
        dx
    }
}

impl<T: Scalar> Params<T> for Block<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.ln1.visit(&join(prefix, "ln1"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        self.ln2.visit(&join(prefix, "ln2"), f);
        self.ff1.visit(&join(prefix, "ff1"), f);
        self.ff2.visit(&join(prefix, "ff2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.ln1.visit_mut(&join(prefix, "ln1"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.ln2.visit_mut(&join(prefix, "ln2"), f);
        self.ff1.visit_mut(&join(prefix, "ff1"), f);
        self.ff2.visit_mut(&join(prefix, "ff2"), f);
    }
}

/// Stack of blocks followed by a final layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream<T> {
    pub blocks: Vec<Block<T>>,
    pub ln_f: LayerNorm<T>,
}

pub struct StreamCache<T> {
    blocks: Vec<BlockCache<T>>,
    ln_f: LayerNormCache<T>,
}

impl<T: Scalar> Stream<T> {
    pub fn new(rng: &mut impl Rng, width: usize, n_layers: usize, n_heads: usize) -> Self {
        Stream {
            blocks: (0..n_layers).map(|_| Block::new(rng, width, n_heads)).collect(),
            ln_f: LayerNorm::new(width),
        }
    }

    pub fn forward(&self, x: Array2<T>) -> (Array2<T>, StreamCache<T>) {
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut h = x;
        for block in &self.blocks {
            let (next, cache) = block.forward(&h.view());
            caches.push(cache);
            h = next;
        }
        let (y, ln_f) = self.ln_f.forward(&h.view());
        (
            y,
            StreamCache {
                blocks: caches,
                ln_f,
            },
        )
    }

    /// Forward pass that keeps no activations.
    pub fn infer(&self, x: Array2<T>) -> Array2<T> {
        let mut h = x;
        for block in &self.blocks {
            h = block.forward(&h.view()).0;
        }
        self.ln_f.forward(&h.view()).0
    }

    pub fn backward(&self, cache: &StreamCache<T>, dy: &ArrayView2<T>, grad: &mut Stream<T>) -> Array2<T> {
        let mut d = self.ln_f.backward(&cache.ln_f, dy, &mut grad.ln_f);
        for i in (0..self.blocks.len()).rev() {
            d = self.blocks[i].backward(&cache.blocks[i], &d.view(), &mut grad.blocks[i]);
        }
        d
    }
}

impl<T: Scalar> Params<T> for Stream<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.blocks.visit(&join(prefix, "blocks"), f);
        self.ln_f.visit(&join(prefix, "ln_f"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.blocks.visit_mut(&join(prefix, "blocks"), f);
        self.ln_f.visit_mut(&join(prefix, "ln_f"), f);
    }
}
