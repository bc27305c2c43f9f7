//! Adam with global-norm clipping, the seeded mini-batch training loop, and
//! checkpoint persistence.

mod checkpoint;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{example_loss, ImageSequence, LossSum, ModelError, Story, StoryModel, StoryParams};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite gradient; step rejected")]
    NonFiniteGradient,
    #[error("optimizer state does not match the model: {0}")]
    StateMismatch(String),
    #[error("example {story_id}: {source}")]
    Example {
        story_id: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    /// Parameters and moments are rounded to f32 after every update.
    Single,
}

impl Precision {
    pub fn round(self, v: f64) -> f64 {
        match self {
            Precision::Double => v,
            Precision::Single => v as f32 as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            batch_size: 16,
            epochs: 20,
            seed: 0,
            precision: Precision::Double,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Adam moments, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: StoryParams,
    pub v: StoryParams,
    pub t: u64,
}

impl OptimState {
    pub fn new(model: &StoryModel) -> Self {
        Self {
            m: StoryParams::zeros(&model.config),
            v: StoryParams::zeros(&model.config),
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamStep {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Factor the gradient was multiplied by (1 when under the limit).
    pub clip_scale: f64,
}

fn is_frozen(model: &StoryModel, name: &str) -> bool {
    model.config.freeze_embeddings && name.starts_with("embedding")
}

/// Global L2 norm over the trainable tensors.
pub fn global_norm(model: &StoryModel, grads: &StoryParams) -> f64 {
    grads
        .views()
        .iter()
        .filter(|v| !is_frozen(model, &v.name))
        .map(|v| crate::numerics::norm_sq(v.data))
        .sum::<f64>()
        .sqrt()
}

/// Scale factor that brings a gradient of norm `norm` down to `clip_norm`.
pub fn clip_scale(norm: f64, clip_norm: f64) -> f64 {
    if norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    }
}

/// One bias-corrected Adam step on the clipped gradient.
///
/// A non-finite gradient rejects the step and leaves model and state untouched.
pub fn adam_update(
    model: &mut StoryModel,
    grads: &StoryParams,
    state: &mut OptimState,
    cfg: &TrainConfig,
) -> Result<AdamStep, TrainError> {
    if !grads.is_finite() {
        return Err(TrainError::NonFiniteGradient);
    }
    let grad_norm = global_norm(model, grads);
    let scale = clip_scale(grad_norm, cfg.clip_norm);

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let frozen: Vec<bool> = grads.views().iter().map(|v| is_frozen(model, &v.name)).collect();
    let g_views: Vec<&[f64]> = grads.views().into_iter().map(|v| v.data).collect();
    let params = model.params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for ((((p, m), v), g), frozen) in params.into_iter().zip(ms).zip(vs).zip(g_views).zip(frozen) {
        if frozen {
            continue;
        }
        for i in 0..p.len() {
            let gi = g[i] * scale;
            m[i] = cfg.precision.round(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi);
            v[i] = cfg.precision.round(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi);
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = cfg.precision.round(p[i] - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps));
        }
    }
    Ok(AdamStep {
        grad_norm,
        clip_scale: scale,
    })
}

#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub story_id: String,
    pub images: ImageSequence,
    pub reference: Story,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Per-token loss over the epoch, measured before each batch's update.
    pub mean_loss: f64,
    pub tokens: usize,
    pub steps: usize,
    pub rejected_steps: usize,
    pub mean_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: StoryModel,
    pub optim: OptimState,
    pub epochs: Vec<EpochStats>,
}

/// Sums losses and gradients of a batch in index order.
pub fn batch_gradient(
    model: &StoryModel,
    batch: &[&TrainingExample],
) -> Result<(LossSum, StoryParams), TrainError> {
    let parts = batch
        .par_iter()
        .map(|ex| {
            let mut g = StoryParams::zeros(&model.config);
            example_loss(model, &ex.images, &ex.reference, Some(&mut g))
                .map(|sum| (sum, g))
                .map_err(|source| TrainError::Example {
                    story_id: ex.story_id.clone(),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = LossSum::default();
    let mut grads = StoryParams::zeros(&model.config);
    for (sum, g) in &parts {
        total.total += sum.total;
        total.tokens += sum.tokens;
        grads.add_assign(g);
    }
    grads.scale(1.0 / total.tokens.max(1) as f64);
    Ok((total, grads))
}

/// Per-token loss over a dataset, without gradients.
pub fn evaluate_loss(model: &StoryModel, data: &[TrainingExample]) -> Result<LossSum, TrainError> {
    let parts = data
        .par_iter()
        .map(|ex| {
            example_loss(model, &ex.images, &ex.reference, None).map_err(|source| TrainError::Example {
                story_id: ex.story_id.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.iter().fold(LossSum::default(), |acc, s| LossSum {
        total: acc.total + s.total,
        tokens: acc.tokens + s.tokens,
    }))
}

pub fn train(model: StoryModel, data: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let optim = OptimState::new(&model);
    train_from(model, optim, data, cfg, |_| {})
}

/// Trains from an existing optimizer state; `on_epoch` sees each epoch's stats
/// as soon as it finishes.
pub fn train_from<F>(
    mut model: StoryModel,
    mut optim: OptimState,
    data: &[TrainingExample],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochStats),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if optim.m.check_shapes(&model.config).is_err() || optim.v.check_shapes(&model.config).is_err() {
        return Err(TrainError::StateMismatch("moment shapes differ from the model".into()));
    }
    if cfg.epochs > 0 && cfg.precision == Precision::Single {
        for t in model.params.tensors_mut() {
            t.iter_mut().for_each(|v| *v = Precision::Single.round(*v));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossSum::default();
        let mut steps = 0;
        let mut rejected = 0;
        let mut norm_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainingExample> = chunk.iter().map(|&i| &data[i]).collect();
            let (batch_sum, grads) = batch_gradient(&model, &batch)?;
            sum.total += batch_sum.total;
            sum.tokens += batch_sum.tokens;
            match adam_update(&mut model, &grads, &mut optim, cfg) {
                Ok(step) => {
                    steps += 1;
                    norm_sum += step.grad_norm;
                }
                Err(TrainError::NonFiniteGradient) => rejected += 1,
                Err(e) => return Err(e),
            }
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: sum.mean(),
            tokens: sum.tokens,
            steps,
            rejected_steps: rejected,
            mean_grad_norm: if steps == 0 { 0.0 } else { norm_sum / steps as f64 },
        };
        on_epoch(&stats);
        epochs.push(stats);
    }
    Ok(TrainOutcome { model, optim, epochs })
}
