//! Skip-gram with negative sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{axpy, dot, sigmoid, Matrix};

use super::{EmbeddingTable, TextError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkipGramConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkipGramOutcome {
    pub table: EmbeddingTable,
    /// Mean negative-sampling loss per (center, context) pair, one per epoch.
    pub epoch_losses: Vec<f64>,
}

/// All `(center, context)` pairs within `window` positions of each other.
pub fn context_pairs(sentence: &[usize], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, &center) in sentence.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(sentence.len().saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                pairs.push((center, sentence[j]));
            }
        }
    }
    pairs
}

/// Seeded starting point of the input vectors: uniform in `±0.5/embed_dim`.
pub fn initial_embeddings(vocab_size: usize, embed_dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::random_uniform(vocab_size, embed_dim, 0.5 / embed_dim.max(1) as f64, &mut rng)
}

pub fn train_skipgram(
    corpus: &[Vec<usize>],
    vocab_size: usize,
    cfg: &SkipGramConfig,
) -> Result<SkipGramOutcome, TextError> {
    if cfg.window == 0 || cfg.negatives == 0 || cfg.embed_dim == 0 {
        return Err(TextError::InvalidConfig(
            "window, negatives and embed_dim must be at least 1".into(),
        ));
    }
    if cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(TextError::InvalidConfig("lr must be positive".into()));
    }
    let total_tokens: usize = corpus.iter().map(Vec::len).sum();
    if total_tokens < cfg.window + 1 {
        return Err(TextError::CorpusTooShort {
            tokens: total_tokens,
            window: cfg.window,
        });
    }
    if let Some(&bad) = corpus.iter().flatten().find(|&&id| id >= vocab_size) {
        return Err(TextError::InvalidConfig(format!(
            "token id {bad} outside vocab of size {vocab_size}"
        )));
    }

    let mut input = initial_embeddings(vocab_size, cfg.embed_dim, cfg.seed);
    let mut output = Matrix::zeros(vocab_size, cfg.embed_dim);

    let mut counts = vec![0u64; vocab_size];
    corpus.iter().flatten().for_each(|&id| counts[id] += 1);
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedIndex::new(&weights)
        .map_err(|e| TextError::InvalidConfig(format!("negative sampling table: {e}")))?;

    let pairs_per_epoch: usize = corpus.iter().map(|s| context_pairs(s, cfg.window).len()).sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let min_lr = cfg.lr * 1e-4;

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut seen = 0usize;
    let mut grad_center = vec![0.0; cfg.embed_dim];
    for _ in 0..cfg.epochs {
        // Every epoch replays the same negative draws, so each pass descends
        // one fixed objective and the per-epoch losses are comparable.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
        let mut loss_sum = 0.0;
        let mut n = 0usize;
        for sentence in corpus {
            for (center, context) in context_pairs(sentence, cfg.window) {
                let lr = (cfg.lr * (1.0 - seen as f64 / total_pairs)).max(min_lr);
                seen += 1;
                grad_center.fill(0.0);
                loss_sum += sgns_step(
                    &input,
                    &mut output,
                    center,
                    context,
                    1.0,
                    lr,
                    &mut grad_center,
                );
                for _ in 0..cfg.negatives {
                    let neg = noise.sample(&mut rng);
                    if neg == context {
                        continue;
                    }
                    loss_sum +=
                        sgns_step(&input, &mut output, center, neg, 0.0, lr, &mut grad_center);
                }
                axpy(1.0, &grad_center, input.row_mut(center));
                n += 1;
            }
        }
        epoch_losses.push(if n == 0 { 0.0 } else { loss_sum / n as f64 });
    }

    Ok(SkipGramOutcome {
        table: EmbeddingTable::new(input),
        epoch_losses,
    })
}

/// One logistic update for `(center, target)` with `label` 1 (positive) or 0
/// (negative). Updates the output vector in place and accumulates the center
/// vector's update into `grad_center`. Returns the logistic loss before the update.
fn sgns_step(
    input: &Matrix,
    output: &mut Matrix,
    center: usize,
    target: usize,
    label: f64,
    lr: f64,
    grad_center: &mut [f64],
) -> f64 {
    let v = input.row(center);
    let score = dot(v, output.row(target));
    let p = sigmoid(score);
    let loss = if label > 0.5 {
        -(p.max(1e-12)).ln()
    } else {
        -((1.0 - p).max(1e-12)).ln()
    };
    let g = lr * (label - p);
    axpy(g, output.row(target), grad_center);
    axpy(g, v, output.row_mut(target));
    loss
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
