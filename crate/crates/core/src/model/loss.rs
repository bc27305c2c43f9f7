//! Teacher-forced loss over all five decoders, with backpropagation through
//! the decoders, the context vector, the encoder and the image projection.

use crate::numerics::{softmax_cross_entropy, LstmState, StepCache};
use crate::text::PAD;

use super::{stack, ContextVector, ImageSequence, ModelError, Story, StoryModel, StoryParams, SEGMENTS};

/// Unnormalized cross-entropy sum and the number of scored tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossSum {
    pub total: f64,
    pub tokens: usize,
}

impl LossSum {
    pub fn mean(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.total / self.tokens as f64
        }
    }
}

/// Per-token mean loss of one example and its gradient.
pub fn forward_loss(
    model: &StoryModel,
    seq: &ImageSequence,
    reference: &Story,
) -> Result<(f64, StoryParams), ModelError> {
    let mut grads = StoryParams::zeros(&model.config);
    let sum = example_loss(model, seq, reference, Some(&mut grads))?;
    grads.scale(1.0 / sum.tokens as f64);
    Ok((sum.mean(), grads))
}

fn validate_reference(model: &StoryModel, reference: &Story) -> Result<usize, ModelError> {
    if reference.segments.len() != SEGMENTS {
        return Err(ModelError::ReferenceSegments(reference.segments.len()));
    }
    let vocab_size = model.config.vocab_size;
    let mut tokens = 0;
    for &t in reference.segments.iter().flatten() {
        if t >= vocab_size {
            return Err(ModelError::TokenOutOfRange { token: t, vocab_size });
        }
        if t != PAD {
            tokens += 1;
        }
    }
    if tokens == 0 {
        return Err(ModelError::EmptyReference);
    }
    Ok(tokens)
}

/// Cross-entropy summed over every non-pad reference token. When `grads` is
/// given, the gradient of that sum is accumulated into it.
pub fn example_loss(
    model: &StoryModel,
    seq: &ImageSequence,
    reference: &Story,
    mut grads: Option<&mut StoryParams>,
) -> Result<LossSum, ModelError> {
    let tokens = validate_reference(model, reference)?;
    let cfg = &model.config;
    let params = &model.params;

    let projected = seq
        .images()
        .iter()
        .map(|img| model.project_image(img))
        .collect::<Result<Vec<_>, _>>()?;

    let mut enc_caches: Vec<Vec<StepCache>> = Vec::with_capacity(SEGMENTS);
    let mut states = vec![LstmState::zeros(cfg.hidden_dim); cfg.num_layers];
    for x in &projected {
        let (next, caches) = stack::forward(&params.encoder, x, &states)?;
        states = next;
        enc_caches.push(caches);
    }
    let ctx = ContextVector { layers: states };

    let mut total = 0.0;
    let mut d_ctx = vec![LstmState::zeros(cfg.hidden_dim); cfg.num_layers];
    let mut d_projected = vec![vec![0.0; cfg.embed_dim]; SEGMENTS];

    for (k, segment) in reference.segments.iter().enumerate() {
        if segment.is_empty() {
            continue;
        }
        let position = k + 1;
        let layers = &params.decoders[k];
        let embeddings = model.embedding_for(position);

        let mut states = model.decoder_init(&ctx);
        let mut step_caches = Vec::with_capacity(segment.len());
        let mut dlogits = Vec::with_capacity(segment.len());
        let mut tops = Vec::with_capacity(segment.len());
        for (j, &target) in segment.iter().enumerate() {
            let x = if j == 0 {
                projected[k].as_slice()
            } else {
                embeddings.row(segment[j - 1])
            };
            let (next, caches) = stack::forward(layers, x, &states)?;
            states = next;
            let h = states.last().expect("non-empty stack").h.clone();
            if target == PAD {
                dlogits.push(None);
            } else {
                let (loss, d) = softmax_cross_entropy(&model.logits(position, &h), target)?;
                total += loss;
                dlogits.push(Some(d));
            }
            step_caches.push(caches);
            tops.push(h);
        }

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        let emb_idx = if cfg.share_embeddings { 0 } else { k };
        let mut dstates = vec![LstmState::zeros(cfg.hidden_dim); cfg.num_layers];
        for j in (0..segment.len()).rev() {
            let dh_top = dlogits[j].as_ref().map(|d| {
                let head = &params.heads[k];
                let gh = &mut g.heads[k];
                gh.w.outer_acc(d, &tops[j]);
                crate::numerics::add_assign(&mut gh.b, d);
                let mut dh = vec![0.0; cfg.hidden_dim];
                head.w.tmatvec_acc(d, &mut dh);
                dh
            });
            let dx = stack::backward(
                layers,
                &step_caches[j],
                dh_top.as_deref(),
                &mut dstates,
                &mut g.decoders[k],
            )?;
            if j == 0 {
                crate::numerics::add_assign(&mut d_projected[k], &dx);
            } else {
                let row = g.embeddings[emb_idx].row_mut(segment[j - 1]);
                crate::numerics::add_assign(row, &dx);
            }
        }
        for (dc, ds) in d_ctx.iter_mut().zip(&dstates) {
            crate::numerics::add_assign(&mut dc.h, &ds.h);
            if cfg.copy_cell_state {
                crate::numerics::add_assign(&mut dc.c, &ds.c);
            }
        }
    }

    if let Some(g) = grads {
        let mut dstates = d_ctx;
        for t in (0..SEGMENTS).rev() {
            let dx = stack::backward(&params.encoder, &enc_caches[t], None, &mut dstates, &mut g.encoder)?;
            crate::numerics::add_assign(&mut d_projected[t], &dx);
        }
        for (img, d) in seq.images().iter().zip(&d_projected) {
            g.image_proj.outer_acc(d, &img.values);
            crate::numerics::add_assign(&mut g.image_bias, d);
        }
    }

    Ok(LossSum { total, tokens })
}
