use std::collections::HashMap;

use mkg_core::crossmodal::params::{flatten, param_count, tensor_specs, zeros_like, Params};
use mkg_core::crossmodal::synthetic::class_pairs;
use mkg_core::crossmodal::{
    auc_f64, build_index, cmr_loss, finetune_matching, FinetuneConfig, load_checkpoint, mlm_loss, mpfr_loss, pretrain, pretrain_objective,
    save_checkpoint, EmbeddingIndex, Encoders, JointScorer, LossWeights, MatchExample, ModelConfig, ModelError,
    PatchSequence, TokenSequence, TrainConfig, TrainingBatch, TrainingPair, Vocab, CLS,
};
use mkg_core::ingest::RawImage;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocab8() -> Vocab {
    Vocab::from_tokens(["[PAD]", "[UNK]", "[CLS]", "[MASK]", "a", "b", "c", "d"].map(String::from).to_vec())
}

fn tiny_config(n_heads: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_layers: 1,
        n_heads,
        max_text_len: 4,
        patch_size: 2,
        image_h: 4,
        image_w: 4,
        channels: 1,
        seed: 3,
        ..ModelConfig::default()
    }
}

fn tiny(n_heads: usize) -> Encoders<f64> {
    Encoders::new(tiny_config(n_heads), vocab8()).unwrap()
}

fn random_patches(rng: &mut ChaCha8Rng) -> PatchSequence<f64> {
    PatchSequence {
        patches: Array2::from_shape_fn((4, 4), |_| rng.random::<f64>()),
        mask_positions: vec![],
    }
}

// ---- independent forward oracle: plain nested loops over named tensors ----

struct Named(HashMap<String, (Vec<usize>, Vec<f64>)>);

impl Named {
    fn of(enc: &Encoders<f64>) -> Self {
        let mut m = HashMap::new();
        enc.visit("", &mut |name, shape, data| {
            m.insert(name.to_string(), (shape.to_vec(), data.to_vec()));
        });
        Named(m)
    }

    fn mat(&self, name: &str) -> Vec<Vec<f64>> {
        let (shape, data) = &self.0[name];
        data.chunks(shape[1]).map(|r| r.to_vec()).collect()
    }

    fn vec(&self, name: &str) -> Vec<f64> {
        self.0[name].1.clone()
    }
}

fn linear(x: &[Vec<f64>], w: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            (0..b.len())
                .map(|j| b[j] + row.iter().enumerate().map(|(i, v)| v * w[i][j]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn layer_norm(x: &[Vec<f64>], g: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter()
                .enumerate()
                .map(|(i, v)| (v - mean) / (var + 1e-5).sqrt() * g[i] + b[i])
                .collect()
        })
        .collect()
}

fn oracle_stream(net: &Named, prefix: &str, x: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let p = |s: &str| format!("{prefix}.blocks.0.{s}");
    let a = layer_norm(&x, &net.vec(&p("ln1.gamma")), &net.vec(&p("ln1.beta")));
    let q = linear(&a, &net.mat(&p("attn.q.w")), &net.vec(&p("attn.q.b")));
    let k = linear(&a, &net.mat(&p("attn.k.w")), &net.vec(&p("attn.k.b")));
    let v = linear(&a, &net.mat(&p("attn.v.w")), &net.vec(&p("attn.v.b")));
    let d = q[0].len();
    let n = x.len();
    let mut ctx = vec![vec![0.0; d]; n];
    for i in 0..n {
        let s: Vec<f64> = (0..n)
            .map(|j| (0..d).map(|c| q[i][c] * k[j][c]).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..n {
            for c in 0..d {
                ctx[i][c] += e[j] / z * v[j][c];
            }
        }
    }
    let o = linear(&ctx, &net.mat(&p("attn.o.w")), &net.vec(&p("attn.o.b")));
    let x1: Vec<Vec<f64>> = x.iter().zip(&o).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
    let b = layer_norm(&x1, &net.vec(&p("ln2.gamma")), &net.vec(&p("ln2.beta")));
    let h = linear(&b, &net.mat(&p("ff1.w")), &net.vec(&p("ff1.b")));
    let gelu = |x: f64| 0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh());
    let h: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|&v| gelu(v)).collect()).collect();
    let f = linear(&h, &net.mat(&p("ff2.w")), &net.vec(&p("ff2.b")));
    let y: Vec<Vec<f64>> = x1.iter().zip(&f).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
    layer_norm(&y, &net.vec(&format!("{prefix}.ln_f.gamma")), &net.vec(&format!("{prefix}.ln_f.beta")))
}

#[test]
fn encoders_match_hand_rolled_forward() {
    let enc = tiny(1);
    let net = Named::of(&enc);
    let ids = vec![CLS, 4, 7, 5];
    let tok = net.mat("text.tok_emb");
    let pos = net.mat("text.pos_emb");
    let x: Vec<Vec<f64>> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (0..8).map(|c| tok[id][c] + pos[i][c]).collect())
        .collect();
    let expected = oracle_stream(&net, "text.stream", x);
    let got = enc.encode_text(&TokenSequence::new(ids)).unwrap();
    for (r, row) in expected.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            assert!((got.outputs[[r, c]] - v).abs() < 1e-12);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = random_patches(&mut rng);
    let patches: Vec<Vec<f64>> = seq.patches.rows().into_iter().map(|r| r.to_vec()).collect();
    let proj = linear(&patches, &net.mat("image.patch_proj.w"), &net.vec("image.patch_proj.b"));
    let (cls, seg, ipos) = (net.vec("image.cls"), net.vec("image.segment"), net.mat("image.pos_emb"));
    let mut x = vec![(0..8).map(|c| cls[c] + seg[c] + ipos[0][c]).collect::<Vec<_>>()];
    for (j, row) in proj.iter().enumerate() {
        x.push((0..8).map(|c| row[c] + seg[c] + ipos[j + 1][c]).collect());
    }
    let expected = oracle_stream(&net, "image.stream", x);
    let got = enc.encode_image(&seq).unwrap();
    for (r, row) in expected.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            assert!((got.outputs[[r, c]] - v).abs() < 1e-12);
        }
    }
    assert_eq!(got.cls().len(), 8);
}

#[test]
fn encoding_is_deterministic_and_position_aware() {
    let enc = tiny(2);
    let before = flatten(&enc);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_patches(&mut rng);
    let a = enc.encode_image(&seq).unwrap();
    let b = enc.encode_image(&seq).unwrap();
    assert_eq!(a, b);
    let mut swapped = seq.clone();
    for c in 0..4 {
        swapped.patches.swap([0, c], [3, c]);
    }
    assert_ne!(enc.encode_image(&swapped).unwrap().cls(), a.cls());
    let t = TokenSequence::new(vec![CLS, 4, 5]);
    assert_eq!(enc.encode_text(&t).unwrap(), enc.encode_text(&t).unwrap());
    assert_eq!(flatten(&enc), before);
    assert_eq!(enc.counters.image(), 3);
    assert_eq!(enc.counters.text(), 2);
}

#[test]
fn length_checks() {
    let enc = tiny(2);
    let long = TokenSequence::new(vec![CLS, 4, 4, 4, 4, 4]);
    assert_eq!(enc.encode_text(&long), Err(ModelError::LengthExceeded { len: 6, max: 5 }));
    let short = PatchSequence::<f64> {
        patches: Array2::zeros((3, 4)),
        mask_positions: vec![],
    };
    assert!(matches!(enc.encode_image(&short), Err(ModelError::LengthExceeded { .. })));
}

#[test]
fn parameter_count_is_a_function_of_config() {
    let a = tiny(2);
    let mut cfg = tiny_config(2);
    cfg.seed = 99;
    let b = Encoders::<f64>::new(cfg, vocab8()).unwrap();
    assert_eq!(param_count(&a), param_count(&b));
    assert_eq!(tensor_specs(&a), tensor_specs(&b));
    // d=8, ff 32, V=8, L+1=5, N+1=5, pd=4
    let block = 2 * 8 * 2 + 4 * (8 * 8 + 8) + (8 * 32 + 32) + (32 * 8 + 8);
    let stream = block + 2 * 8;
    let text = 8 * 8 + 5 * 8 + stream;
    let image = (4 * 8 + 8) + 8 + 8 + 5 * 8 + 8 + stream;
    let heads = (8 * 8 + 8) + (8 * 4 + 4) + 2;
    assert_eq!(param_count(&a), text + image + heads);
}

fn batch_of(rng: &mut ChaCha8Rng, m: usize) -> TrainingBatch<f64> {
    TrainingBatch::new(
        (0..m)
            .map(|_| TrainingPair {
                text: TokenSequence::new(vec![CLS, rng.random_range(4..8), rng.random_range(4..8)]).with_mask(vec![1]),
                image: random_patches(rng).with_mask(vec![2]),
            })
            .collect(),
    )
}

#[test]
fn mlm_needs_masked_tokens_and_uniform_logits_give_ln_v() {
    let mut enc = tiny(2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut batch = batch_of(&mut rng, 2);
    enc.heads.mlm.w.fill(0.0);
    enc.heads.mlm.b.fill(0.0);
    let loss = mlm_loss(&enc, &batch, None).unwrap();
    assert!((loss - 8f64.ln()).abs() < 1e-12);
    for p in &mut batch.pairs {
        p.text.mask_positions.clear();
    }
    assert_eq!(mlm_loss(&enc, &batch, None), Err(ModelError::NoMaskableTokens));
    let bare = TrainingBatch::new(vec![TrainingPair {
        text: TokenSequence::new(vec![CLS]),
        image: random_patches(&mut rng).with_mask(vec![0]),
    }]);
    assert_eq!(mlm_loss(&enc, &bare, None), Err(ModelError::NoMaskableTokens));
}

#[test]
fn mpfr_arithmetic() {
    let mut enc = tiny(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut batch = batch_of(&mut rng, 1);
    batch.pairs[0].image.patches.fill(1.0);
    enc.heads.mpfr.w.fill(0.0);
    enc.heads.mpfr.b.fill(0.0);
    assert_eq!(mpfr_loss(&enc, &batch, None).unwrap(), 1.0);
    enc.heads.mpfr.b.fill(1.0);
    assert_eq!(mpfr_loss(&enc, &batch, None).unwrap(), 0.0);
    batch.pairs[0].image.mask_positions.clear();
    assert_eq!(mpfr_loss(&enc, &batch, None), Err(ModelError::NoMaskablePatches));
}

#[test]
fn cmr_single_pair_loss_is_zero() {
    let enc = tiny(2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    assert_eq!(cmr_loss(&enc, &batch_of(&mut rng, 1), None).unwrap(), 0.0);
}

#[test]
fn cmr_only_weights_leave_heads_without_gradient() {
    let enc = tiny(2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch = batch_of(&mut rng, 3);
    let mut grad = zeros_like(&enc);
    let w = LossWeights { mlm: 0.0, mpfr: 0.0, cmr: 1.0 };
    let out = pretrain_objective(&enc, &batch, w, Some(&mut grad)).unwrap();
    assert!(out.mlm.is_none() && out.mpfr.is_none());
    assert!(grad.heads.mlm.w.iter().chain(grad.heads.mpfr.w.iter()).all(|&g| g == 0.0));
    assert!(grad.text.tok_emb.iter().any(|&g| g != 0.0));
}

fn synthetic_corpus(n: usize, seed: u64) -> Vec<(RawImage, String)> {
    class_pairs(n, 4, seed).into_iter().map(|p| (p.image, p.text)).collect()
}

fn small_synthetic_config() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        ..mkg_core::crossmodal::synthetic::synthetic_config()
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let corpus = synthetic_corpus(1, 1);
    let cfg = small_synthetic_config();
    let train = TrainConfig { epochs: 1, learning_rate: 0.0, ..TrainConfig::default() };
    let (trained, logs) = pretrain::<f64>(&corpus, cfg.clone(), &train).unwrap();
    let fresh = Encoders::<f64>::new(cfg, trained.vocab.clone()).unwrap();
    assert_eq!(flatten(&trained), flatten(&fresh));
    assert_eq!(logs.len(), 1);
    assert_eq!(pretrain::<f64>(&[], small_synthetic_config(), &train).err(), Some(ModelError::EmptyCorpus));
}

#[test]
fn pretraining_is_reproducible_and_loss_decreases() {
    let corpus = synthetic_corpus(40, 2);
    let train = TrainConfig { epochs: 5, batch_size: 8, learning_rate: 0.05, ..TrainConfig::default() };
    let (a, logs) = pretrain::<f32>(&corpus, small_synthetic_config(), &train).unwrap();
    let (b, _) = pretrain::<f32>(&corpus, small_synthetic_config(), &train).unwrap();
    assert_eq!(flatten(&a), flatten(&b));
    for w in logs.windows(2) {
        assert!(w[1].total < w[0].total, "{logs:?}");
    }
}

#[test]
fn finetune_overfits_all_positive_set() {
    let corpus = synthetic_corpus(8, 3);
    let mut enc = Encoders::<f64>::new(small_synthetic_config(), Vocab::build(corpus.iter().map(|c| c.1.as_str()), 64)).unwrap();
    let examples: Vec<MatchExample<f64>> = corpus
        .iter()
        .map(|(img, text)| MatchExample {
            text: enc.tokenize(text),
            image: enc.prepare_image(img),
            label: true,
        })
        .collect();
    let config = FinetuneConfig {
        head_steps: 0,
        train: TrainConfig { epochs: 20, batch_size: 4, learning_rate: 0.1, ..TrainConfig::default() },
    };
    let report = finetune_matching(&mut enc, &examples, &config).unwrap();
    assert_eq!(report.train_accuracy, 1.0);
    assert_eq!(finetune_matching(&mut enc, &[], &config).err(), Some(ModelError::EmptySet));
}

#[test]
fn random_labels_give_chance_auc() {
    let pairs = class_pairs(120, 4, 9);
    let corpus: Vec<(RawImage, String)> = pairs.iter().map(|p| (p.image.clone(), p.text.clone())).collect();
    let mut enc = Encoders::<f32>::new(small_synthetic_config(), Vocab::build(corpus.iter().map(|c| c.1.as_str()), 64)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut examples = |range: std::ops::Range<usize>, enc: &Encoders<f32>| -> Vec<MatchExample<f32>> {
        pairs[range]
            .iter()
            .map(|p| MatchExample {
                text: enc.tokenize(&p.text),
                image: enc.prepare_image(&p.image),
                label: rng.random::<bool>(),
            })
            .collect()
    };
    let train = examples(0..60, &enc);
    let eval = examples(60..120, &enc);
    let config = FinetuneConfig {
        train: TrainConfig { epochs: 3, batch_size: 10, ..FinetuneConfig::default().train },
        ..FinetuneConfig::default()
    };
    finetune_matching(&mut enc, &train, &config).unwrap();
    let scores: Vec<f32> = eval
        .iter()
        .map(|e| enc.match_probability(&enc.encode_text(&e.text).unwrap().cls(), &enc.encode_image(&e.image).unwrap().cls()))
        .collect();
    let labels: Vec<bool> = eval.iter().map(|e| e.label).collect();
    let a = auc_f64(&scores, &labels).unwrap();
    assert!((a - 0.5).abs() <= 0.1, "auc {a}");
}

#[test]
fn zero_scale_and_bias_score_one_half() {
    let mut enc = tiny(2);
    enc.heads.match_scale[0] = 0.0;
    enc.heads.match_bias[0] = 0.0;
    let t = Array1::from_vec(vec![3.0; 8]);
    let i = Array1::from_vec(vec![-2.0; 8]);
    assert_eq!(enc.match_probability(&t, &i), 0.5);
}

#[test]
fn index_rows_equal_fresh_forward_passes() {
    let corpus = synthetic_corpus(5, 4);
    let enc = Encoders::<f32>::new(small_synthetic_config(), Vocab::build(corpus.iter().map(|c| c.1.as_str()), 64)).unwrap();
    let mut images: Vec<(String, RawImage)> = corpus.iter().enumerate().map(|(i, c)| (format!("im{i}"), c.0.clone())).collect();
    images.push(("dup".into(), corpus[0].0.clone()));
    let index = build_index(&enc, &images).unwrap();
    assert_eq!(index.len(), 6);
    for (id, img) in &images {
        assert_eq!(index.row_of(id).unwrap(), enc.image_cls(img).unwrap());
    }
    assert_eq!(index.row_of("dup"), index.row_of("im0"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.bin");
    index.save(&path).unwrap();
    assert_eq!(EmbeddingIndex::<f32>::load(&path).unwrap(), index);
}

#[test]
fn match_scores_and_ties() {
    let ids: Vec<String> = (0..10).map(|i| format!("img{i:02}")).collect();
    let mut rows = Array2::<f64>::zeros((10, 4));
    let query = Array1::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    for r in 0..10 {
        rows[[r, 1 + r % 3]] = 1.0;
    }
    rows.row_mut(7).assign(&(&query * 10.0));
    let index = EmbeddingIndex::from_rows(ids.clone(), rows).unwrap();
    let hits = index.top_k(&query, 3).unwrap();
    assert_eq!(hits[0].id, "img07");
    assert_eq!(hits[0].score, 10.0);
    // remaining scores all 0: ascending id order
    assert_eq!(hits[1].id, "img00");
    assert_eq!(hits[2].id, "img01");
    assert_eq!(index.top_k(&query, 50).unwrap().len(), 10);

    let single = EmbeddingIndex::from_rows(vec!["only".into()], Array2::from_elem((1, 4), -1.0)).unwrap();
    assert_eq!(single.top_k(&query, 5).unwrap()[0].id, "only");
    let empty = EmbeddingIndex::<f64>::from_rows(vec![], Array2::zeros((0, 4))).unwrap();
    assert_eq!(empty.top_k(&query, 1), Err(ModelError::EmptyIndex));
    assert!(EmbeddingIndex::from_rows(vec!["a".into(), "a".into()], Array2::<f64>::zeros((2, 4))).is_err());
}

#[test]
fn checkpoint_round_trip_and_shape_validation() {
    let corpus = synthetic_corpus(3, 5);
    let enc = Encoders::<f32>::new(small_synthetic_config(), Vocab::build(corpus.iter().map(|c| c.1.as_str()), 64)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&enc, &path).unwrap();
    let back: Encoders<f32> = load_checkpoint(&path).unwrap();
    assert_eq!(flatten(&back), flatten(&enc));
    assert_eq!(back.config, enc.config);
    assert_eq!(back.vocab, enc.vocab);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 4);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(ModelError::Checkpoint(_))));
    std::fs::write(&path, b"garbage!").unwrap();
    assert!(load_checkpoint::<f32>(&path).is_err());
}

#[test]
fn joint_scorer_counts_one_forward_per_pair() {
    let cfg = tiny_config(2);
    let joint = JointScorer::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let text = TokenSequence::new(vec![CLS, 4, 6]);
    let images: Vec<_> = (0..7).map(|_| random_patches(&mut rng)).collect();
    let first: Vec<f64> = images.iter().map(|img| joint.score(&text, img).unwrap()).collect();
    assert_eq!(joint.forwards(), 7);
    let again: Vec<f64> = images.iter().map(|img| joint.score(&text, img).unwrap()).collect();
    assert_eq!(first, again);
    assert_eq!(joint.forwards(), 14);
}
