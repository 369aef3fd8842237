use mkg_core::crossmodal::gradcheck::check_gradients;
use mkg_core::crossmodal::params::zeros_like;
use mkg_core::crossmodal::{
    cmr_loss, matching_objective, mlm_loss, mpfr_loss, pretrain_objective, Encoders, LossWeights, MatchExample,
    ModelConfig, PatchSequence, TokenSequence, TrainingBatch, TrainingPair, Vocab, CLS,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn tiny() -> Encoders<f64> {
    let config = ModelConfig {
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        max_text_len: 4,
        patch_size: 2,
        image_h: 4,
        image_w: 4,
        channels: 1,
        seed: 5,
        ..ModelConfig::default()
    };
    let vocab = Vocab::from_tokens(
        ["[PAD]", "[UNK]", "[CLS]", "[MASK]", "a", "b", "c", "d"].map(String::from).to_vec(),
    );
    Encoders::new(config, vocab).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, m: usize) -> TrainingBatch<f64> {
    let pairs = (0..m)
        .map(|k| {
            let len = 2 + k % 3;
            let mut ids = vec![CLS];
            ids.extend((1..len).map(|_| rng.random_range(4..8)));
            let text = TokenSequence::new(ids).with_mask(vec![1 + k % (len - 1)]);
            let patches = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
            let image = PatchSequence { patches, mask_positions: vec![k % 4, (k + 2) % 4] };
            TrainingPair { text, image }
        })
        .collect();
    TrainingBatch::new(pairs)
}

type Loss = fn(&Encoders<f64>, &TrainingBatch<f64>, Option<&mut Encoders<f64>>) -> Result<f64, mkg_core::crossmodal::ModelError>;

fn check(name: &str, loss: Loss) {
    let enc = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batch = random_batch(&mut rng, 3);
    let mut grad = zeros_like(&enc);
    loss(&enc, &batch, Some(&mut grad)).unwrap();
    let report = check_gradients(&enc, &grad, STEP, FLOOR, |p| loss(p, &batch, None).unwrap());
    println!("{name}: {report:?}");
    assert!(report.max_rel_err < TOL, "{name}: {report:?}");
}

#[test]
fn mlm_gradients_match_finite_differences() {
    check("mlm", mlm_loss);
}

#[test]
fn mpfr_gradients_match_finite_differences() {
    check("mpfr", mpfr_loss);
}

#[test]
fn cmr_gradients_match_finite_differences() {
    check("cmr", cmr_loss);
}

#[test]
fn combined_objective_gradients() {
    let w = LossWeights { mlm: 0.7, mpfr: 1.3, cmr: 0.4 };
    let enc = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let batch = random_batch(&mut rng, 2);
    let mut grad = zeros_like(&enc);
    pretrain_objective(&enc, &batch, w, Some(&mut grad)).unwrap();
    let report = check_gradients(&enc, &grad, STEP, FLOOR, |p| pretrain_objective(p, &batch, w, None).unwrap().total);
    assert!(report.max_rel_err < TOL, "{report:?}");
}

#[test]
fn matching_gradients() {
    let mut enc = tiny();
    enc.heads.match_scale[0] = 0.7;
    enc.heads.match_bias[0] = -0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let batch = random_batch(&mut rng, 3);
    let examples: Vec<MatchExample<f64>> = batch
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| MatchExample {
            text: TokenSequence::new(p.text.ids.clone()),
            image: PatchSequence { patches: p.image.patches.clone(), mask_positions: vec![] },
            label: k % 2 == 0,
        })
        .collect();
    let refs: Vec<&MatchExample<f64>> = examples.iter().collect();
    let mut grad = zeros_like(&enc);
    matching_objective(&enc, &refs, Some(&mut grad)).unwrap();
    let report = check_gradients(&enc, &grad, STEP, FLOOR, |p| matching_objective(p, &refs, None).unwrap());
    assert!(report.max_rel_err < TOL, "{report:?}");
}
