use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyteller_core::model::*;
use storyteller_core::numerics::{gradient_check, LstmState, GATE_FORGET};
use storyteller_core::text::{EOS, PAD};

fn config(image_dim: usize, embed: usize, hidden: usize, vocab: usize) -> ModelConfig {
    ModelConfig {
        image_dim,
        embed_dim: embed,
        hidden_dim: hidden,
        vocab_size: vocab,
        ..ModelConfig::default()
    }
}

fn random_sequence(image_dim: usize, rng: &mut ChaCha8Rng) -> ImageSequence {
    let images = (0..5)
        .map(|i| {
            let values = (0..image_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            ImageEmbedding::new(format!("p{i}"), values)
        })
        .collect();
    ImageSequence::new(images).unwrap()
}

fn random_story(vocab: usize, rng: &mut ChaCha8Rng) -> Story {
    Story::new(
        (0..5)
            .map(|_| {
                let len = rng.gen_range(1..5);
                let mut seg: Vec<usize> = (0..len).map(|_| rng.gen_range(4..vocab)).collect();
                seg.push(EOS);
                seg
            })
            .collect(),
    )
}

fn model_loss(model: &StoryModel, flat: &[f64], seq: &ImageSequence, story: &Story) -> f64 {
    let mut m = model.clone();
    m.params.assign_flat(flat).unwrap();
    forward_loss(&m, seq, story).unwrap().0
}

#[test]
fn zero_network_gives_zero_context() {
    let model = StoryModel::zeros(config(6, 4, 3, 10)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ctx = encode_sequence(&model, &random_sequence(6, &mut rng)).unwrap();
    assert_eq!(ctx.h(), &[0.0; 3]);
    assert_eq!(ctx.c(), &[0.0; 3]);
}

#[test]
fn encoder_is_order_sensitive() {
    let model = StoryModel::new(config(6, 4, 5, 10), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_sequence(6, &mut rng);
    let mut images = seq.images().to_vec();
    images.swap(0, 4);
    let swapped = ImageSequence::new(images).unwrap();
    let a = encode_sequence(&model, &seq).unwrap();
    let b = encode_sequence(&model, &swapped).unwrap();
    assert_ne!(a, b);
}

#[test]
fn encoder_equals_chained_cell_calls() {
    let model = StoryModel::new(config(6, 4, 5, 10), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = random_sequence(6, &mut rng);
    let mut state = LstmState::zeros(5);
    for img in seq.images() {
        let mut x = model.params.image_bias.clone();
        for r in 0..4 {
            for c in 0..6 {
                x[r] += model.params.image_proj.get(r, c) * img.values[c];
            }
        }
        state = storyteller_core::numerics::lstm_cell_forward(&model.params.encoder[0], &x, &state)
            .unwrap()
            .0;
    }
    let ctx = encode_sequence(&model, &seq).unwrap();
    for k in 0..5 {
        assert!((ctx.h()[k] - state.h[k]).abs() < 1e-12);
        assert!((ctx.c()[k] - state.c[k]).abs() < 1e-12);
    }
}

#[test]
fn changing_any_image_changes_context() {
    let model = StoryModel::new(config(6, 4, 5, 10), 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seq = random_sequence(6, &mut rng);
    let base = encode_sequence(&model, &seq).unwrap();
    for k in 0..5 {
        let mut images = seq.images().to_vec();
        images[k].values[0] += 0.5;
        let changed = encode_sequence(&model, &ImageSequence::new(images).unwrap()).unwrap();
        assert_ne!(changed, base, "image {k}");
    }
}

#[test]
fn sequence_and_position_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq = random_sequence(6, &mut rng);
    assert!(matches!(
        ImageSequence::new(seq.images()[..4].to_vec()),
        Err(ModelError::SequenceLength(4))
    ));
    let model = StoryModel::new(config(6, 4, 5, 10), 1).unwrap();
    let ctx = encode_sequence(&model, &seq).unwrap();
    let cfg = DecodeConfig::default();
    assert!(matches!(
        decode_segment(&model, 0, &ctx, &seq.images()[0], &cfg),
        Err(ModelError::InvalidPosition(0))
    ));
    assert!(matches!(
        decode_segment(&model, 6, &ctx, &seq.images()[0], &cfg),
        Err(ModelError::InvalidPosition(6))
    ));
    let wrong_dim = random_sequence(7, &mut rng);
    assert!(matches!(
        encode_sequence(&model, &wrong_dim),
        Err(ModelError::ImageDim { expected: 6, got: 7, .. })
    ));
}

#[test]
fn zero_budget_gives_empty_segments() {
    let model = StoryModel::new(config(6, 4, 5, 10), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let seq = random_sequence(6, &mut rng);
    for width in [1, 3] {
        let story = generate_story(&model, &seq, &DecodeConfig { max_len: 0, beam_width: width }).unwrap();
        assert!(story.segments.iter().all(Vec::is_empty));
    }
}

#[test]
fn zero_model_segments_are_identical() {
    let model = StoryModel::zeros(config(6, 4, 5, 10)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let story = generate_story(
        &model,
        &random_sequence(6, &mut rng),
        &DecodeConfig { max_len: 3, beam_width: 1 },
    )
    .unwrap();
    // All logits tie, so the lowest emittable id (<eos>) is chosen.
    for seg in &story.segments {
        assert_eq!(seg, &vec![EOS]);
    }
}

#[test]
fn beam_width_one_equals_greedy() {
    for seed in 0..15u64 {
        let model = StoryModel::new(config(6, 5, 7, 12), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let seq = random_sequence(6, &mut rng);
        let ctx = encode_sequence(&model, &seq).unwrap();
        for pos in 1..=5 {
            let img = &seq.images()[pos - 1];
            let greedy = decode_segment(&model, pos, &ctx, img, &DecodeConfig { max_len: 12, beam_width: 1 }).unwrap();
            let beam1 = beam_search(&model, pos, &ctx, img, 12, 1).unwrap();
            assert_eq!(greedy, beam1);
        }
    }
}

#[test]
fn generated_segments_respect_eos_xor_budget() {
    for seed in 0..10u64 {
        let model = StoryModel::new(config(6, 5, 7, 9), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = random_sequence(6, &mut rng);
        for width in [1, 2, 4] {
            let cfg = DecodeConfig { max_len: 4, beam_width: width };
            let story = generate_story(&model, &seq, &cfg).unwrap();
            for seg in &story.segments {
                let ends_eos = seg.last() == Some(&EOS);
                let words = seg.iter().filter(|&&t| t != EOS).count();
                assert!(ends_eos ^ (words == cfg.max_len), "{seg:?}");
                assert!(!seg.contains(&PAD));
                assert_eq!(seg.iter().filter(|&&t| t == EOS).count(), ends_eos as usize);
            }
        }
    }
}

#[test]
fn perturbing_one_decoder_changes_only_its_segment() {
    let model = StoryModel::new(config(6, 5, 7, 12), 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let seq = random_sequence(6, &mut rng);
    let cfg = DecodeConfig { max_len: 8, beam_width: 2 };
    let base = generate_story(&model, &seq, &cfg).unwrap();
    let mut perturbed = model.clone();
    perturbed.params.heads[2].b.iter_mut().enumerate().for_each(|(i, b)| *b += i as f64);
    let after = generate_story(&perturbed, &seq, &cfg).unwrap();
    for k in [0, 1, 3, 4] {
        assert_eq!(base.segments[k], after.segments[k]);
    }
    assert_ne!(base.segments[2], after.segments[2]);
}

#[test]
fn uniform_model_loss_is_log_vocab() {
    let model = StoryModel::zeros(config(6, 4, 5, 20)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let seq = random_sequence(6, &mut rng);
    let story = random_story(20, &mut rng);
    let (loss, _) = forward_loss(&model, &seq, &story).unwrap();
    assert!((loss - 20f64.ln()).abs() < 1e-12);
}

#[test]
fn empty_reference_is_rejected() {
    let model = StoryModel::new(config(6, 4, 5, 20), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seq = random_sequence(6, &mut rng);
    let empty = Story::new(vec![Vec::new(); 5]);
    assert!(matches!(forward_loss(&model, &seq, &empty), Err(ModelError::EmptyReference)));
    let bad = Story::new(vec![vec![99], vec![], vec![], vec![], vec![]]);
    assert!(matches!(
        forward_loss(&model, &seq, &bad),
        Err(ModelError::TokenOutOfRange { token: 99, .. })
    ));
}

/// Central differences at eps 1e-5 on a loss near ln V carry roughly 1e-10
/// of absolute roundoff, so entries are compared absolutely everywhere and
/// relatively only where the gradient is well above that floor.
fn check_model(cfg: ModelConfig, seed: u64) {
    let model = StoryModel::new(cfg.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let seq = random_sequence(cfg.image_dim, &mut rng);
    let story = random_story(cfg.vocab_size, &mut rng);
    let (_, grads) = forward_loss(&model, &seq, &story).unwrap();
    let analytic = grads.flatten();
    let mut flat = model.params.flatten();
    let names: Vec<String> = model
        .params
        .views()
        .iter()
        .flat_map(|v| std::iter::repeat(v.name.clone()).take(v.data.len()))
        .collect();
    let eps = 1e-5;
    for k in 0..flat.len() {
        let orig = flat[k];
        flat[k] = orig + eps;
        let plus = model_loss(&model, &flat, &seq, &story);
        flat[k] = orig - eps;
        let minus = model_loss(&model, &flat, &seq, &story);
        flat[k] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let diff = (analytic[k] - numeric).abs();
        assert!(diff < 1e-9, "{} abs diff {diff:e}", names[k]);
        let scale = analytic[k].abs().max(numeric.abs());
        if scale >= 1e-6 {
            assert!(diff / scale < 1e-4, "{} rel {:e}", names[k], diff / scale);
        }
    }
}

#[test]
fn full_model_gradient_check() {
    check_model(config(8, 8, 8, 20), 31);
}

#[test]
fn gradient_check_variants() {
    // hidden-only context, unshared embeddings, two layers
    let mut cfg = config(5, 4, 6, 11);
    cfg.copy_cell_state = false;
    check_model(cfg.clone(), 41);
    cfg.share_embeddings = false;
    check_model(cfg.clone(), 42);
    cfg.copy_cell_state = true;
    cfg.num_layers = 2;
    check_model(cfg, 43);
}

#[test]
fn corrupted_forget_gradient_is_caught() {
    let cfg = config(8, 8, 8, 20);
    let model = StoryModel::new(cfg.clone(), 51).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let seq = random_sequence(8, &mut rng);
    let story = random_story(20, &mut rng);
    let (_, mut grads) = forward_loss(&model, &seq, &story).unwrap();
    let h = cfg.hidden_dim;
    let enc = &mut grads.encoder[0];
    for r in GATE_FORGET * h..(GATE_FORGET + 1) * h {
        enc.b[r] *= 1.01;
        enc.w_x.row_mut(r).iter_mut().for_each(|v| *v *= 1.01);
        enc.w_h.row_mut(r).iter_mut().for_each(|v| *v *= 1.01);
    }
    let err = gradient_check(
        |p| model_loss(&model, p, &seq, &story),
        &model.params.flatten(),
        &grads.flatten(),
        1e-5,
    )
    .unwrap();
    assert!(err > 1e-3, "{err}");
}

#[test]
fn pad_targets_are_ignored() {
    let model = StoryModel::new(config(6, 4, 5, 12), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let seq = random_sequence(6, &mut rng);
    let story = random_story(12, &mut rng);
    let sum = example_loss(&model, &seq, &story, None).unwrap();
    assert_eq!(sum.tokens, story.token_count());
    let mut padded = story.clone();
    padded.segments[0].push(PAD);
    let sum_padded = example_loss(&model, &seq, &padded, None).unwrap();
    assert_eq!(sum_padded.tokens, sum.tokens);
    assert_eq!(sum_padded.total, sum.total);
}
